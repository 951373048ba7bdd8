#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mbt/dataset.hpp"
#include "mbt/losses.hpp"
#include "mbt/metrics.hpp"
#include "mbt/model.hpp"
#include "mbt/optimizer.hpp"

namespace mbt {

struct TrainConfig {
    int epochs = 100;
    LossWeights weights;
    RmsPropConfig opt;
    PlateauConfig plateau;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;  // checkpoints + report.csv land here
    bool verbose = true;
};

struct EpochRow {
    int epoch = 0;  // 1-based
    float train_total = 0, train_body = 0, train_edge = 0, train_final = 0;
    float val_total = 0;
    double val_dice = 0, val_f1 = 0, val_se = 0, val_sp = 0;
    float lr = 0;
    double seconds = 0;  // wall time, deliberately the last column
};

struct TrainReport {
    std::vector<EpochRow> rows;
    float best_val_dice = 0;
    int best_epoch = 0;
};

// Everything the optimizer loop needs to continue bit-exactly after a
// restart; serialized into the checkpoint's trainer section.
struct TrainerState {
    float lr = 0;
    float plateau_best = 0;
    int plateau_wait = 0;
    int epochs_done = 0;
    float best_val_dice = 0;
};

struct EvalResult {
    float mean_loss = 0;              // joint loss averaged over samples
    float mean_body = 0, mean_edge = 0, mean_final = 0;
    MetricsReport pooled;             // confusion pooled over all pixels
    MetricsReport mean_per_image;     // metric means over per-image reports
    std::vector<MetricsReport> per_image;
};

// Forward-only pass over a sample list; metrics from the final branch.
EvalResult evaluate_model(MBTNet<float>& model, const std::vector<SampleRecord>& samples,
                          const LossWeights& weights);

// Single-sample-per-step RMSprop training with per-epoch reshuffling,
// reduce-on-plateau scheduling on the validation loss, checkpointing of the
// last and best (pooled validation DICE) states, and a CSV report. Restart
// from a "last" checkpoint continues bit-exactly: the shuffle order is a
// pure function of (seed, epoch index).
class Trainer {
public:
    Trainer(MBTNet<float>& model, TrainConfig cfg);

    // resume from a checkpoint produced by this trainer (requires its
    // trainer section: parameters, accumulators and bookkeeping)
    void restore(const std::filesystem::path& checkpoint);

    TrainReport run(const std::vector<SampleRecord>& train,
                    const std::vector<SampleRecord>& val);

    const TrainerState& state() const { return state_; }

private:
    void save(const std::filesystem::path& file);
    NamedTensors trainer_entries() const;

    MBTNet<float>& model_;
    TrainConfig cfg_;
    RmsProp opt_;
    PlateauSchedule sched_;
    TrainerState state_;
};

void write_report_csv(const std::filesystem::path& path, const TrainReport& report);

}  // namespace mbt
