#include "mbt/trainer.hpp"

#include "mbt/rng.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mbt {

namespace {

// explicit Fisher-Yates: identical order on every standard library
void shuffle_indices(std::vector<int>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

MaskTriplet<float> sample_targets(const SampleRecord& s) { return s.masks; }

}  // namespace

EvalResult evaluate_model(MBTNet<float>& model, const std::vector<SampleRecord>& samples,
                          const LossWeights& weights) {
    if (samples.empty()) throw std::invalid_argument("evaluate_model: empty sample list");
    EvalResult res;
    double loss_acc = 0, body_acc = 0, edge_acc = 0, final_acc = 0;
    double dice_acc = 0, f1_acc = 0, se_acc = 0, sp_acc = 0;
    ConfusionCounts pooled;
    for (const auto& s : samples) {
        Graph<float> g;
        auto out = model.forward(g, g.constant(s.image));
        auto loss = joint_loss(g, out, sample_targets(s), weights);
        loss_acc += static_cast<double>(g.val(loss.total).value());
        body_acc += loss.body;
        edge_acc += loss.edge;
        final_acc += loss.final_comp;
        ConfusionCounts c =
            confusion_from_logits(g.val(out.final_logits), s.masks.final_mask);
        pooled.add(c);
        MetricsReport r = metrics_from_counts(c);
        dice_acc += r.dice;
        f1_acc += r.f1;
        se_acc += r.se;
        sp_acc += r.sp;
        res.per_image.push_back(r);
    }
    double n = static_cast<double>(samples.size());
    res.mean_loss = static_cast<float>(loss_acc / n);
    res.mean_body = static_cast<float>(body_acc / n);
    res.mean_edge = static_cast<float>(edge_acc / n);
    res.mean_final = static_cast<float>(final_acc / n);
    res.pooled = metrics_from_counts(pooled);
    res.mean_per_image.dice = dice_acc / n;
    res.mean_per_image.f1 = f1_acc / n;
    res.mean_per_image.se = se_acc / n;
    res.mean_per_image.sp = sp_acc / n;
    res.mean_per_image.counts = pooled;
    return res;
}

Trainer::Trainer(MBTNet<float>& model, TrainConfig cfg)
    : model_(model),
      cfg_(std::move(cfg)),
      opt_(model.parameters(), cfg_.opt),
      sched_(cfg_.plateau) {
    cfg_.weights.validate();
    if (cfg_.epochs < 0) throw std::invalid_argument("trainer: epochs must be >= 0");
    if (cfg_.out_dir.empty()) throw std::invalid_argument("trainer: out_dir is required");
    state_.lr = cfg_.opt.lr;
    state_.plateau_best = std::numeric_limits<float>::infinity();
    state_.plateau_wait = 0;
    state_.epochs_done = 0;
    state_.best_val_dice = -1.0f;  // any real score beats an untrained marker
}

NamedTensors Trainer::trainer_entries() const {
    NamedTensors entries = opt_.state_entries();
    auto scalar = [](float v) { return Tensor<float>(Shape{1}, std::vector<float>{v}); };
    entries.emplace_back("__state.lr", scalar(state_.lr));
    entries.emplace_back("__state.plateau_best", scalar(state_.plateau_best));
    entries.emplace_back("__state.plateau_wait", scalar(static_cast<float>(state_.plateau_wait)));
    entries.emplace_back("__state.epochs_done", scalar(static_cast<float>(state_.epochs_done)));
    entries.emplace_back("__state.best_val_dice", scalar(state_.best_val_dice));
    return entries;
}

void Trainer::save(const std::filesystem::path& file) {
    NamedTensors entries = trainer_entries();
    save_checkpoint(file, model_.parameters(), &entries);
}

void Trainer::restore(const std::filesystem::path& checkpoint) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
    if (!ckpt.has_trainer_section) {
        throw std::runtime_error("trainer: checkpoint " + checkpoint.string() +
                                 " has no trainer section; cannot resume from it");
    }
    apply_checkpoint(ckpt, model_.parameters());
    NamedTensors accum;
    auto take_scalar = [&](const std::string& name) -> float {
        for (const auto& [n, t] : ckpt.trainer) {
            if (n == name) {
                if (t.numel() != 1) {
                    throw std::runtime_error("trainer: malformed state entry " + name);
                }
                return t[0];
            }
        }
        throw std::runtime_error("trainer: checkpoint lacks state entry " + name);
    };
    for (const auto& e : ckpt.trainer) {
        if (e.first.rfind("__state.", 0) != 0) accum.push_back(e);
    }
    opt_.load_state(accum);
    state_.lr = take_scalar("__state.lr");
    state_.plateau_best = take_scalar("__state.plateau_best");
    state_.plateau_wait = static_cast<int>(take_scalar("__state.plateau_wait"));
    state_.epochs_done = static_cast<int>(take_scalar("__state.epochs_done"));
    state_.best_val_dice = take_scalar("__state.best_val_dice");
    opt_.set_lr(state_.lr);
    sched_.restore(state_.plateau_best, state_.plateau_wait);
}

TrainReport Trainer::run(const std::vector<SampleRecord>& train,
                         const std::vector<SampleRecord>& val) {
    if (train.empty()) throw std::invalid_argument("trainer: empty training set");
    if (val.empty()) throw std::invalid_argument("trainer: empty validation set");
    std::filesystem::create_directories(cfg_.out_dir);

    TrainReport report;
    report.best_val_dice = state_.best_val_dice;
    report.best_epoch = 0;
    opt_.set_lr(state_.lr);

    if (cfg_.epochs == state_.epochs_done) {
        save(cfg_.out_dir / "last.ckpt");  // nothing to train; leave a checkpoint
        write_report_csv(cfg_.out_dir / "report.csv", report);
        return report;
    }
    if (cfg_.epochs < state_.epochs_done) {
        throw std::invalid_argument("trainer: checkpoint already has " +
                                    std::to_string(state_.epochs_done) +
                                    " epochs, requested only " + std::to_string(cfg_.epochs));
    }

    std::vector<int> order(train.size());
    for (int e = state_.epochs_done; e < cfg_.epochs; ++e) {
        auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 erng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(e)));
        shuffle_indices(order, erng);

        double total_acc = 0, body_acc = 0, edge_acc = 0, final_acc = 0;
        for (int idx : order) {
            const SampleRecord& s = train[static_cast<std::size_t>(idx)];
            try {
                Graph<float> g;
                auto out = model_.forward(g, g.constant(s.image));
                auto loss = joint_loss(g, out, sample_targets(s), cfg_.weights);
                float lv = g.val(loss.total).value();
                if (!std::isfinite(lv)) {
                    throw std::runtime_error("non-finite training loss");
                }
                total_acc += static_cast<double>(lv);
                body_acc += loss.body;
                edge_acc += loss.edge;
                final_acc += loss.final_comp;
                model_.zero_grads();
                g.backward(loss.total);
                opt_.step();
            } catch (const std::exception& ex) {
                throw std::runtime_error("train: epoch " + std::to_string(e + 1) + ", sample '" +
                                         s.id + "': " + ex.what());
            }
        }
        double n = static_cast<double>(train.size());

        EvalResult ev = evaluate_model(model_, val, cfg_.weights);
        float val_dice = static_cast<float>(ev.pooled.dice);
        float new_lr = sched_.observe(ev.mean_loss, opt_.lr());
        opt_.set_lr(new_lr);

        EpochRow row;
        row.epoch = e + 1;
        row.train_total = static_cast<float>(total_acc / n);
        row.train_body = static_cast<float>(body_acc / n);
        row.train_edge = static_cast<float>(edge_acc / n);
        row.train_final = static_cast<float>(final_acc / n);
        row.val_total = ev.mean_loss;
        row.val_dice = ev.pooled.dice;
        row.val_f1 = ev.pooled.f1;
        row.val_se = ev.pooled.se;
        row.val_sp = ev.pooled.sp;
        row.lr = new_lr;

        state_.lr = new_lr;
        state_.plateau_best = sched_.best();
        state_.plateau_wait = sched_.wait();
        state_.epochs_done = e + 1;
        if (val_dice > state_.best_val_dice) {
            state_.best_val_dice = val_dice;
            report.best_epoch = e + 1;
            save(cfg_.out_dir / "best.ckpt");
        }
        save(cfg_.out_dir / "last.ckpt");

        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.rows.push_back(row);
        report.best_val_dice = state_.best_val_dice;

        if (cfg_.verbose) {
            std::ostringstream line;
            line << "epoch " << row.epoch << "/" << cfg_.epochs << "  train "
                 << std::setprecision(5) << row.train_total << "  val " << row.val_total
                 << "  dice " << std::setprecision(4) << row.val_dice << "  lr "
                 << std::setprecision(3) << row.lr << "  (" << std::setprecision(3)
                 << row.seconds << "s)";
            std::cout << line.str() << std::endl;
        }
    }
    write_report_csv(cfg_.out_dir / "report.csv", report);
    return report;
}

void write_report_csv(const std::filesystem::path& path, const TrainReport& report) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("trainer: cannot write " + path.string());
    f << "epoch,train_total,train_body,train_edge,train_final,"
         "val_total,val_dice,val_f1,val_se,val_sp,lr,seconds\n";
    f << std::setprecision(9);
    for (const auto& r : report.rows) {
        f << r.epoch << ',' << r.train_total << ',' << r.train_body << ',' << r.train_edge << ','
          << r.train_final << ',' << r.val_total << ',' << r.val_dice << ',' << r.val_f1 << ','
          << r.val_se << ',' << r.val_sp << ',' << r.lr << ',' << r.seconds << '\n';
    }
    if (!f) throw std::runtime_error("trainer: short write to " + path.string());
}

}  // namespace mbt
