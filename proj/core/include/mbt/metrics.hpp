#pragma once

#include <cstdint>

#include "mbt/tensor.hpp"

namespace mbt {

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

    void add(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
    }
    std::int64_t total() const { return tp + fp + tn + fn; }
};

struct MetricsReport {
    double dice = 0.0, f1 = 0.0, se = 0.0, sp = 0.0;
    ConfusionCounts counts;
    double threshold = 0.5;  // probability cut the counts were taken at
};

// Binarize sigmoid(logit) >= threshold against a binary target. For the
// default threshold 0.5 this is exactly logit >= 0; in general the logit is
// compared against log(t/(1-t)), avoiding any loss of precision from
// evaluating the sigmoid.
ConfusionCounts confusion_from_logits(const Tensor<float>& logits, const Tensor<float>& target,
                                      double threshold = 0.5);

// Both operands already binary {0,1}.
ConfusionCounts confusion_from_binary(const Tensor<float>& pred, const Tensor<float>& target);

// DICE = 2tp/(2tp+fp+fn), F1 from precision/recall, SE = tp/(tp+fn),
// SP = tn/(tn+fp). A zero denominator scores 1 when the class is absent
// from prediction and ground truth alike, else 0. Under these rules
// DICE == F1 identically.
MetricsReport metrics_from_counts(const ConfusionCounts& c, double threshold = 0.5);

}  // namespace mbt
