#include "mbt/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mbt/checkpoint.hpp"
#include "mbt/dataset.hpp"
#include "mbt/gradcheck.hpp"
#include "mbt/image.hpp"
#include "mbt/metrics.hpp"
#include "mbt/rng.hpp"
#include "mbt/synth.hpp"
#include "mbt/trainer.hpp"

namespace mbt {

namespace fs = std::filesystem;

namespace {

int run_guarded(const char* what, const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const UsageError& e) {
        std::cerr << what << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << what << ": error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// Creates cfg.out_dir. An existing non-empty directory is refused unless
// --force was given (or the command resumes into it).
fs::path prepare_out_dir(const RunConfig& cfg, bool resuming = false) {
    if (cfg.out_dir.empty()) throw UsageError("an output directory is required (--out)");
    fs::path dir(cfg.out_dir);
    if (!resuming && !cfg.force && fs::exists(dir) && fs::is_directory(dir) &&
        !fs::is_empty(dir)) {
        throw UsageError("output directory '" + dir.string() +
                         "' is not empty (pass --force to write into it anyway)");
    }
    if (resuming && !fs::exists(dir)) {
        throw UsageError("cannot resume: output directory '" + dir.string() + "' does not exist");
    }
    fs::create_directories(dir);
    return dir;
}

std::string fmt4(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

std::string metrics_line(const MetricsReport& m) {
    std::ostringstream os;
    os << "DICE " << fmt4(m.dice) << "  F1 " << fmt4(m.f1) << "  SE " << fmt4(m.se) << "  SP "
       << fmt4(m.sp);
    return os.str();
}

DatasetManifest load_manifest(const RunConfig& cfg) {
    if (cfg.manifest.empty()) throw UsageError("a dataset manifest is required (--manifest)");
    return read_manifest(cfg.manifest);
}

// Branch supervision needs the decoupling branches; without them the body
// and edge weights are forced to zero.
LossWeights effective_weights(const RunConfig& cfg, bool verbose) {
    LossWeights w = cfg.weights;
    if (!cfg.model.body_edge && (w.body != 0.0 || w.edge != 0.0)) {
        if (verbose) {
            std::cout << "note: body/edge branches are disabled; forcing lambda_body and "
                         "lambda_edge to 0\n";
        }
        w.body = 0.0;
        w.edge = 0.0;
    }
    try {
        w.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    return w;
}

// spatial size shared by a loaded split
std::pair<int, int> sample_size(const std::vector<SampleRecord>& samples) {
    return {samples.front().image.extent(2), samples.front().image.extent(3)};
}

ModelConfig model_config_for(const RunConfig& cfg, int h, int w) {
    ModelConfig mc = cfg.model;
    mc.input_h = h;
    mc.input_w = w;
    try {
        mc.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    return mc;
}

void apply_params_from(const fs::path& ckpt_path, MBTNet<float>& model) {
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    apply_checkpoint(ckpt, model.parameters());
}

struct SynthCounts {
    int train = 0, val = 0, test = 0;
};

// Writes images/, masks/ and manifest.tsv under root. Deterministic in
// (cfg.synth, patch layout, cfg.seed).
SynthCounts synth_dataset(const RunConfig& cfg, const fs::path& root) {
    try {
        cfg.synth.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (cfg.patch < 8 || cfg.patch % 8 != 0) {
        throw UsageError("patch size must be a positive multiple of 8, got " +
                         std::to_string(cfg.patch));
    }
    if (cfg.patch > cfg.synth.width || cfg.patch > cfg.synth.height) {
        throw UsageError("patch size " + std::to_string(cfg.patch) +
                         " exceeds the mosaic size " + std::to_string(cfg.synth.width) + "x" +
                         std::to_string(cfg.synth.height));
    }
    if (cfg.patches_per_mosaic < 1) throw UsageError("patches_per_mosaic must be >= 1");
    if (cfg.train_mosaics < 0 || cfg.val_mosaics < 0 || cfg.test_mosaics < 0) {
        throw UsageError("mosaic counts must be non-negative");
    }

    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");

    const char* split_names[3] = {"train", "val", "test"};
    int split_mosaics[3] = {cfg.train_mosaics, cfg.val_mosaics, cfg.test_mosaics};
    std::vector<ManifestEntry> entries;
    SynthCounts counts;

    for (int si = 0; si < 3; ++si) {
        int written = 0;
        for (int m = 0; m < split_mosaics[si]; ++m) {
            std::uint64_t mosaic_seed =
                mix_seed(cfg.seed, static_cast<std::uint64_t>(si) * 100003u +
                                       static_cast<std::uint64_t>(m));
            MosaicSample mosaic = generate_voronoi_mosaic(cfg.synth, mosaic_seed);
            std::mt19937_64 prng(mix_seed(mosaic_seed, 0xA11CEu));
            auto patches =
                crop_patches(mosaic, cfg.patch, cfg.patch, cfg.patches_per_mosaic, prng);
            for (const auto& p : patches) {
                std::ostringstream stem;
                stem << split_names[si] << "_" << std::setw(4) << std::setfill('0') << written;
                std::string img_rel = "images/" + stem.str() + ".png";
                std::string msk_rel = "masks/" + stem.str() + ".png";
                write_png((root / img_rel).string(), gray01_to_image(p.image));
                write_png((root / msk_rel).string(), mask_to_image(p.mask));
                entries.push_back({split_names[si], img_rel, msk_rel, 0});
                ++written;
            }
        }
        if (si == 0) counts.train = written;
        if (si == 1) counts.val = written;
        if (si == 2) counts.test = written;
    }

    write_manifest(root / "manifest.tsv", entries);
    return counts;
}

void print_eval(std::ostream& os, const EvalResult& ev, const LossWeights& w) {
    os << "loss (joint)     " << fmt4(ev.mean_loss) << "\n"
       << "  body term      " << fmt4(ev.mean_body) << "  (lambda " << fmt4(w.body) << ")\n"
       << "  edge term      " << fmt4(ev.mean_edge) << "  (lambda " << fmt4(w.edge) << ")\n"
       << "  final term     " << fmt4(ev.mean_final) << "  (lambda " << fmt4(w.final_weight)
       << ")\n"
       << "pooled           " << metrics_line(ev.pooled) << "\n"
       << "mean per image   " << metrics_line(ev.mean_per_image) << "\n";
}

}  // namespace

// --------------------------------------------------------------------- synth

int cmd_synth(const RunConfig& cfg) {
    return run_guarded("synth", [&] {
        fs::path dir = prepare_out_dir(cfg);
        SynthCounts c = synth_dataset(cfg, dir);
        cfg.write(dir / "run_config.txt");
        std::cout << "wrote " << (c.train + c.val + c.test) << " patches (" << c.train
                  << " train, " << c.val << " val, " << c.test << " test) of " << cfg.patch << "x"
                  << cfg.patch << " to " << dir.string() << "\n"
                  << "manifest: " << (dir / "manifest.tsv").string() << "\n";
        return kExitOk;
    });
}

// --------------------------------------------------------------------- train

int cmd_train(const RunConfig& cfg) {
    return run_guarded("train", [&] {
        if (cfg.epochs < 0) throw UsageError("epochs must be non-negative");
        DatasetManifest manifest = load_manifest(cfg);
        auto train = load_split(manifest, "train");
        auto val = load_split(manifest, "val");
        auto [h, w] = sample_size(train);

        ModelConfig mc = model_config_for(cfg, h, w);
        MBTNet<float> model(mc, cfg.seed);

        TrainConfig tc;
        tc.epochs = cfg.epochs;
        tc.weights = effective_weights(cfg, true);
        tc.opt = cfg.opt;
        tc.plateau = cfg.plateau;
        tc.seed = cfg.seed;
        tc.out_dir = prepare_out_dir(cfg, cfg.resume);
        tc.verbose = true;

        Trainer trainer(model, tc);
        if (cfg.resume) {
            fs::path last = tc.out_dir / "last.ckpt";
            if (!fs::exists(last)) {
                throw UsageError("cannot resume: '" + last.string() + "' not found");
            }
            trainer.restore(last);
            std::cout << "resumed from " << last.string() << " ("
                      << trainer.state().epochs_done << " epochs done)\n";
        }
        cfg.write(tc.out_dir / "run_config.txt");

        std::cout << "model: " << model.parameter_count() << " parameters, input " << h << "x"
                  << w << ", " << train.size() << " train / " << val.size() << " val samples\n";
        TrainReport report = trainer.run(train, val);
        std::cout << "done: best val DICE " << fmt4(report.best_val_dice) << " at epoch "
                  << report.best_epoch << "; checkpoints in " << tc.out_dir.string() << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------- eval

int cmd_eval(const RunConfig& cfg) {
    return run_guarded("eval", [&] {
        DatasetManifest manifest = load_manifest(cfg);
        auto samples = load_split(manifest, cfg.split);

        auto per_image_table = [&](const std::vector<MetricsReport>& rows) {
            std::ostringstream t;
            t << "id,dice,f1,se,sp\n" << std::fixed << std::setprecision(4);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                t << samples[i].id << "," << rows[i].dice << "," << rows[i].f1 << ","
                  << rows[i].se << "," << rows[i].sp << "\n";
            }
            return t.str();
        };

        std::ostringstream out;
        if (cfg.oracle_mode) {
            // pipeline self-check: score the ground truth against itself
            ConfusionCounts pooled;
            MetricsReport mean;
            std::vector<MetricsReport> per_image;
            for (const auto& s : samples) {
                ConfusionCounts c = confusion_from_binary(s.masks.final_mask, s.masks.final_mask);
                pooled.add(c);
                MetricsReport m = metrics_from_counts(c);
                per_image.push_back(m);
                mean.dice += m.dice;
                mean.f1 += m.f1;
                mean.se += m.se;
                mean.sp += m.sp;
            }
            double n = static_cast<double>(samples.size());
            mean.dice /= n;
            mean.f1 /= n;
            mean.se /= n;
            mean.sp /= n;
            out << "oracle mode: scoring ground truth against itself ("
                << cfg.split << ", " << samples.size() << " samples)\n"
                << per_image_table(per_image)
                << "pooled           " << metrics_line(metrics_from_counts(pooled)) << "\n"
                << "mean per image   " << metrics_line(mean) << "\n";
        } else {
            if (cfg.checkpoint.empty()) {
                throw UsageError("a checkpoint is required (--checkpoint), or use --oracle-mode");
            }
            auto [h, w] = sample_size(samples);
            ModelConfig mc = model_config_for(cfg, h, w);
            MBTNet<float> model(mc, cfg.seed);
            apply_params_from(cfg.checkpoint, model);
            LossWeights weights = effective_weights(cfg, true);
            EvalResult ev = evaluate_model(model, samples, weights);
            out << "split " << cfg.split << ": " << samples.size() << " samples\n"
                << per_image_table(ev.per_image);
            print_eval(out, ev, weights);
        }

        std::cout << out.str();
        if (!cfg.out_dir.empty()) {
            fs::path dir = prepare_out_dir(cfg);
            std::ofstream f(dir / "metrics.txt", std::ios::trunc);
            if (!f) throw std::runtime_error("cannot write metrics.txt");
            f << out.str();
            std::cout << "wrote " << (dir / "metrics.txt").string() << "\n";
        }
        return kExitOk;
    });
}

// ------------------------------------------------------------------- predict

int cmd_predict(const RunConfig& cfg) {
    return run_guarded("predict", [&] {
        if (cfg.checkpoint.empty()) throw UsageError("a checkpoint is required (--checkpoint)");
        if (cfg.image.empty()) throw UsageError("an input image is required (--image)");
        fs::path dir = prepare_out_dir(cfg);

        ImageU8 img = read_png(cfg.image);
        if (img.channels != 1) {
            throw UsageError("expected a single-channel grayscale PNG, got " +
                             std::to_string(img.channels) + " channels");
        }
        if (img.height % 8 != 0 || img.width % 8 != 0 || img.height < 8 || img.width < 8) {
            throw UsageError("image size " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) +
                             " is not a multiple of 8; pad the image first");
        }
        histogram_equalize(img);
        Tensor<float> gray = image_to_gray01(img);  // (H,W)
        Tensor<float> input(Shape{1, 1, img.height, img.width}, gray.vec());

        ModelConfig mc = model_config_for(cfg, img.height, img.width);
        MBTNet<float> model(mc, cfg.seed);
        apply_params_from(cfg.checkpoint, model);

        Graph<float> g;
        auto outid = model.forward(g, g.constant(input));
        const Tensor<float>& logits = g.val(outid.final_logits);

        Tensor<float> prob(Shape{img.height, img.width});
        Tensor<float> pred(Shape{img.height, img.width});
        for (std::int64_t i = 0; i < logits.numel(); ++i) {
            prob[i] = ops::sigmoid_value(logits[i]);
            pred[i] = logits[i] >= 0.0f ? 1.0f : 0.0f;
        }
        write_png((dir / "prob.png").string(), gray01_to_image(prob));
        write_png((dir / "mask.png").string(), mask_to_image(pred));
        cfg.write(dir / "run_config.txt");
        std::cout << "wrote " << (dir / "prob.png").string() << " and "
                  << (dir / "mask.png").string() << "\n";

        if (!cfg.mask.empty()) {
            ImageU8 gt_img = read_png(cfg.mask);
            Tensor<float> gt = image_to_mask(gt_img);
            if (!gt.same_shape(pred)) {
                throw UsageError("mask size " + shape_str(gt.shape()) +
                                 " does not match the image " + shape_str(pred.shape()));
            }
            MetricsReport m = metrics_from_counts(confusion_from_binary(pred, gt));
            write_png((dir / "overlay.png").string(), render_overlay(gray, pred, gt));
            std::cout << "wrote " << (dir / "overlay.png").string() << "\n"
                      << "vs truth         " << metrics_line(m) << "\n";
        }
        return kExitOk;
    });
}

// -------------------------------------------------------------------- ablate

int cmd_ablate(const RunConfig& cfg) {
    return run_guarded("ablate", [&] {
        if (cfg.epochs < 1) throw UsageError("epochs must be >= 1");
        fs::path dir = prepare_out_dir(cfg);
        cfg.write(dir / "run_config.txt");

        std::cout << "generating shared dataset...\n";
        fs::path data_dir = dir / "data";
        SynthCounts c = synth_dataset(cfg, data_dir);
        std::cout << "dataset: " << c.train << " train / " << c.val << " val / " << c.test
                  << " test patches of " << cfg.patch << "x" << cfg.patch << "\n";

        DatasetManifest manifest = read_manifest(data_dir / "manifest.tsv");
        auto train = load_split(manifest, "train");
        auto val = load_split(manifest, "val");
        auto test = load_split(manifest, "test");
        auto [h, w] = sample_size(train);

        struct Row {
            int tr_depth = 0;
            bool body_edge = false;
            std::int64_t params = 0;
            EvalResult ev;
        };
        std::vector<Row> rows;

        for (int td = 0; td <= 4; ++td) {
            for (int be = 1; be >= 0; --be) {
                RunConfig rc = cfg;
                rc.model.tr_depth = td;
                rc.model.body_edge = be != 0;
                ModelConfig mc = model_config_for(rc, h, w);
                MBTNet<float> model(mc, cfg.seed);

                std::ostringstream run_name;
                run_name << "td" << td << "_be" << (be ? "on" : "off");
                std::cout << "run " << run_name.str() << ": " << model.parameter_count()
                          << " parameters, " << cfg.epochs << " epochs... " << std::flush;

                TrainConfig tc;
                tc.epochs = cfg.epochs;
                tc.weights = effective_weights(rc, false);
                tc.opt = cfg.opt;
                tc.plateau = cfg.plateau;
                tc.seed = cfg.seed;
                tc.out_dir = dir / "runs" / run_name.str();
                tc.verbose = false;
                fs::create_directories(tc.out_dir);

                Trainer trainer(model, tc);
                trainer.run(train, val);

                Row row;
                row.tr_depth = td;
                row.body_edge = be != 0;
                row.params = model.parameter_count();
                row.ev = evaluate_model(model, test, tc.weights);
                std::cout << "test " << metrics_line(row.ev.pooled) << "\n";
                rows.push_back(std::move(row));
            }
        }

        std::ostringstream csv;
        csv << "tr_depth,body_edge,params,test_dice,test_f1,test_se,test_sp,"
               "loss_body,loss_edge,loss_final,loss_total\n";
        csv << std::setprecision(9);
        for (const auto& r : rows) {
            csv << r.tr_depth << "," << (r.body_edge ? 1 : 0) << "," << r.params << ","
                << r.ev.pooled.dice << "," << r.ev.pooled.f1 << "," << r.ev.pooled.se << ","
                << r.ev.pooled.sp << "," << r.ev.mean_body << "," << r.ev.mean_edge << ","
                << r.ev.mean_final << "," << r.ev.mean_loss << "\n";
        }
        std::ofstream f(dir / "ablation.csv", std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write ablation.csv");
        f << csv.str();

        std::cout << "\n tr_depth  branches      params   test DICE     F1      SE      SP\n";
        for (const auto& r : rows) {
            std::ostringstream line;
            line << std::setw(9) << r.tr_depth << "  " << std::setw(8)
                 << (r.body_edge ? "on" : "off") << "  " << std::setw(10) << r.params << "  "
                 << std::setw(10) << fmt4(r.ev.pooled.dice) << "  " << fmt4(r.ev.pooled.f1)
                 << "  " << fmt4(r.ev.pooled.se) << "  " << fmt4(r.ev.pooled.sp);
            std::cout << line.str() << "\n";
        }
        std::cout << "wrote " << (dir / "ablation.csv").string() << "\n";
        return kExitOk;
    });
}

// ----------------------------------------------------------------- gradcheck

int cmd_gradcheck(const RunConfig& cfg) {
    return run_guarded("gradcheck", [&] {
        GradSuiteOptions opts;
        opts.seed = cfg.seed + 7;
        std::cout << "running gradient checks (seed " << opts.seed << ")...\n";
        auto results = run_gradcheck_suite(opts);
        int failed = 0;
        for (const auto& r : results) {
            std::ostringstream line;
            line << (r.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(36) << r.name
                 << std::right << " max rel err " << std::scientific << std::setprecision(3)
                 << r.max_rel_err << " (tol " << r.tolerance << ", " << r.checked
                 << " elements)";
            std::cout << line.str() << "\n";
            if (!r.pass) {
                ++failed;
                if (!r.message.empty()) {
                    std::cout << "      " << r.message << "\n";
                } else {
                    std::ostringstream det;
                    det << "      worst: " << r.worst.param << "[" << r.worst.index
                        << "] analytic " << std::scientific << std::setprecision(6)
                        << r.worst.analytic << " vs numeric " << r.worst.numeric;
                    std::cout << det.str() << "\n";
                }
            }
        }
        int total = static_cast<int>(results.size());
        std::cout << (failed == 0 ? "all " : "") << (total - failed) << "/" << total
                  << " gradient checks passed\n";
        return failed == 0 ? kExitOk : kExitCheck;
    });
}

}  // namespace mbt
