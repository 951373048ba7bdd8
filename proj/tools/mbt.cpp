// mbt — synthesize data, train, evaluate and probe the segmentation network.
//
// Settings merge in three layers: built-in defaults, then an optional
// `--config key=value` file, then explicit command-line flags (strongest).

#include <functional>
#include <iostream>
#include <list>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbt/commands.hpp"

namespace {

// Flags are collected as strings and funneled through RunConfig::apply so
// file values and flag values share one parser and one set of errors.
struct FlagSet {
    std::string config_path;
    // a list keeps the value strings CLI11 binds to at stable addresses
    struct Entry {
        std::string key;
        std::string value;
        CLI::Option* opt = nullptr;
    };
    std::list<Entry> entries;

    void add(CLI::App* cmd, const std::string& flag, const std::string& key,
             const std::string& help) {
        entries.push_back({key, "", nullptr});
        Entry& e = entries.back();
        e.opt = cmd->add_option(flag, e.value, help);
    }

    void apply_to(mbt::RunConfig& cfg) const {
        if (!config_path.empty()) cfg.apply_file(config_path);
        for (const auto& e : entries) {
            if (e.opt != nullptr && e.opt->count() > 0) cfg.apply(e.key, e.value);
        }
    }
};

void add_model_flags(CLI::App* cmd, FlagSet& f) {
    f.add(cmd, "--tr-depth", "tr_depth", "transformer stages, deepest first (0..4)");
    f.add(cmd, "--widths", "widths", "stage widths, e.g. 8,16,32,64");
    f.add(cmd, "--heads", "heads", "attention heads per axial layer");
    f.add(cmd, "--span", "span", "axial attention span m");
    f.add(cmd, "--bottleneck-div", "bottleneck_div", "attention bottleneck divisor");
}

void add_train_flags(CLI::App* cmd, FlagSet& f) {
    f.add(cmd, "--epochs", "epochs", "training epochs");
    f.add(cmd, "--lr", "lr", "RMSprop learning rate");
    f.add(cmd, "--lambda-body", "lambda_body", "body branch loss weight");
    f.add(cmd, "--lambda-edge", "lambda_edge", "edge branch loss weight");
    f.add(cmd, "--lambda-final", "lambda_final", "final branch loss weight");
}

void add_synth_flags(CLI::App* cmd, FlagSet& f) {
    f.add(cmd, "--mosaic-size", "synth_width", "mosaic width in pixels");
    f.add(cmd, "--mosaic-height", "synth_height", "mosaic height in pixels");
    f.add(cmd, "--cells", "synth_cells", "Voronoi cells per mosaic");
    f.add(cmd, "--patch", "patch", "square patch size (multiple of 8)");
    f.add(cmd, "--patches-per-mosaic", "patches_per_mosaic", "patches cropped per mosaic");
    f.add(cmd, "--train-mosaics", "train_mosaics", "mosaics for the train split");
    f.add(cmd, "--val-mosaics", "val_mosaics", "mosaics for the val split");
    f.add(cmd, "--test-mosaics", "test_mosaics", "mosaics for the test split");
}

struct SubCommand {
    CLI::App* app = nullptr;
    FlagSet flags;
    bool force = false, resume = false, oracle = false, no_body_edge = false;
    std::function<int(const mbt::RunConfig&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-branch transformer network for cell boundary segmentation"};
    app.require_subcommand(1);

    std::vector<std::unique_ptr<SubCommand>> subs;

    auto make = [&](const std::string& name, const std::string& help,
                    std::function<int(const mbt::RunConfig&)> fn) -> SubCommand& {
        subs.push_back(std::make_unique<SubCommand>());
        SubCommand& sc = *subs.back();
        sc.app = app.add_subcommand(name, help);
        sc.run = std::move(fn);
        sc.app->add_option("--config", sc.flags.config_path,
                           "configuration file (key = value lines)");
        sc.flags.add(sc.app, "--seed", "seed", "base RNG seed");
        sc.flags.add(sc.app, "--out", "out_dir", "output directory");
        sc.app->add_flag("--force", sc.force, "write into a non-empty output directory");
        return sc;
    };

    {
        SubCommand& sc = make("synth", "generate a synthetic cell-mosaic dataset", mbt::cmd_synth);
        add_synth_flags(sc.app, sc.flags);
    }
    {
        SubCommand& sc = make("train", "train on a manifest dataset", mbt::cmd_train);
        sc.flags.add(sc.app, "--manifest", "manifest", "dataset manifest (TSV)");
        add_model_flags(sc.app, sc.flags);
        add_train_flags(sc.app, sc.flags);
        sc.app->add_flag("--no-body-edge", sc.no_body_edge,
                         "disable the body/edge decoupling branches");
        sc.app->add_flag("--resume", sc.resume, "continue from <out>/last.ckpt");
    }
    {
        SubCommand& sc = make("eval", "evaluate a checkpoint on one split", mbt::cmd_eval);
        sc.flags.add(sc.app, "--manifest", "manifest", "dataset manifest (TSV)");
        sc.flags.add(sc.app, "--checkpoint", "checkpoint", "model checkpoint to evaluate");
        sc.flags.add(sc.app, "--split", "split", "manifest split (default test)");
        add_model_flags(sc.app, sc.flags);
        add_train_flags(sc.app, sc.flags);
        sc.app->add_flag("--no-body-edge", sc.no_body_edge,
                         "disable the body/edge decoupling branches");
        sc.app->add_flag("--oracle-mode", sc.oracle,
                         "score the ground truth against itself (pipeline self-check)");
    }
    {
        SubCommand& sc = make("predict", "segment one PNG image", mbt::cmd_predict);
        sc.flags.add(sc.app, "--checkpoint", "checkpoint", "model checkpoint");
        sc.flags.add(sc.app, "--image", "image", "input grayscale PNG");
        sc.flags.add(sc.app, "--mask", "mask", "optional ground-truth mask PNG for an overlay");
        add_model_flags(sc.app, sc.flags);
        sc.app->add_flag("--no-body-edge", sc.no_body_edge,
                         "disable the body/edge decoupling branches");
    }
    {
        SubCommand& sc = make("ablate", "train the 10-run tr-depth x branches grid",
                              mbt::cmd_ablate);
        add_model_flags(sc.app, sc.flags);
        add_train_flags(sc.app, sc.flags);
        add_synth_flags(sc.app, sc.flags);
    }
    {
        make("gradcheck", "verify analytic gradients against central differences",
             mbt::cmd_gradcheck);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? mbt::kExitOk : mbt::kExitUsage;
    }

    for (const auto& sc : subs) {
        if (!sc->app->parsed()) continue;
        mbt::RunConfig cfg;
        try {
            sc->flags.apply_to(cfg);
        } catch (const mbt::UsageError& e) {
            std::cerr << sc->app->get_name() << ": " << e.what() << "\n";
            return mbt::kExitUsage;
        }
        if (sc->force) cfg.force = true;
        if (sc->resume) cfg.resume = true;
        if (sc->oracle) cfg.oracle_mode = true;
        if (sc->no_body_edge) cfg.model.body_edge = false;
        return sc->run(cfg);
    }
    return mbt::kExitUsage;  // unreachable: a subcommand is required
}
