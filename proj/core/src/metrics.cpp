#include "mbt/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mbt {

namespace {

void require_binary_target(const Tensor<float>& t, const char* who) {
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        if (t[i] != 0.0f && t[i] != 1.0f) {
            throw std::invalid_argument(std::string(who) + ": target must be binary {0,1}, found " +
                                        std::to_string(t[i]));
        }
    }
}

ConfusionCounts count(const Tensor<float>& target, const std::vector<char>& pred) {
    ConfusionCounts c;
    for (std::int64_t i = 0; i < target.numel(); ++i) {
        bool gt = target[i] != 0.0f;
        bool pr = pred[static_cast<std::size_t>(i)] != 0;
        if (pr && gt) ++c.tp;
        else if (pr && !gt) ++c.fp;
        else if (!pr && gt) ++c.fn;
        else ++c.tn;
    }
    return c;
}

}  // namespace

ConfusionCounts confusion_from_logits(const Tensor<float>& logits, const Tensor<float>& target,
                                      double threshold) {
    if (!logits.same_shape(target)) {
        throw std::invalid_argument("confusion_from_logits: shape mismatch " +
                                    shape_str(logits.shape()) + " vs " + shape_str(target.shape()));
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("confusion_from_logits: threshold must be in (0,1)");
    }
    require_binary_target(target, "confusion_from_logits");
    double logit_thr = std::log(threshold / (1.0 - threshold));
    std::vector<char> pred(static_cast<std::size_t>(logits.numel()));
    for (std::int64_t i = 0; i < logits.numel(); ++i) {
        pred[static_cast<std::size_t>(i)] = static_cast<double>(logits[i]) >= logit_thr ? 1 : 0;
    }
    return count(target, pred);
}

ConfusionCounts confusion_from_binary(const Tensor<float>& pred, const Tensor<float>& target) {
    if (!pred.same_shape(target)) {
        throw std::invalid_argument("confusion_from_binary: shape mismatch " +
                                    shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    }
    require_binary_target(target, "confusion_from_binary");
    require_binary_target(pred, "confusion_from_binary");
    std::vector<char> p(static_cast<std::size_t>(pred.numel()));
    for (std::int64_t i = 0; i < pred.numel(); ++i) p[static_cast<std::size_t>(i)] = pred[i] != 0.0f;
    return count(target, p);
}

MetricsReport metrics_from_counts(const ConfusionCounts& c, double threshold) {
    MetricsReport r;
    r.counts = c;
    r.threshold = threshold;
    double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);

    // zero-denominator rule: 1 when the measured class is empty in both
    // prediction and ground truth, 0 otherwise
    r.dice = (c.tp + c.fp + c.fn) == 0 ? 1.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    r.se = (c.tp + c.fn) == 0 ? (c.fp == 0 ? 1.0 : 0.0) : tp / (tp + fn);
    r.sp = (c.tn + c.fp) == 0 ? (c.fn == 0 ? 1.0 : 0.0) : tn / (tn + fp);
    double precision = (c.tp + c.fp) == 0 ? (c.fn == 0 ? 1.0 : 0.0) : tp / (tp + fp);
    double recall = r.se;
    r.f1 = (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    if ((c.tp + c.fp + c.fn) == 0) r.f1 = 1.0;  // empty/empty, consistent with dice
    return r;
}

}  // namespace mbt
