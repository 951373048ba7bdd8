#pragma once

#include <vector>

#include "mbt/checkpoint.hpp"
#include "mbt/graph.hpp"

namespace mbt {

struct RmsPropConfig {
    float lr = 2e-4f;
    float rho = 0.99f;  // accumulator decay
    float eps = 1e-8f;
};

// RMSprop:  s <- rho*s + (1-rho)*g^2 ;  p <- p - lr * g / (sqrt(s) + eps)
// A step first validates every gradient and aborts (without touching any
// state) if one is non-finite, then updates and finally clears the grads.
class RmsProp {
public:
    RmsProp(std::vector<Parameter<float>*> params, RmsPropConfig cfg);

    void step();

    float lr() const { return lr_; }
    void set_lr(float lr) { lr_ = lr; }

    // accumulators as named records for checkpoints
    NamedTensors state_entries() const;
    void load_state(const NamedTensors& entries);

private:
    std::vector<Parameter<float>*> params_;
    std::vector<Tensor<float>> accum_;
    RmsPropConfig cfg_;
    float lr_;
};

struct PlateauConfig {
    float factor = 0.5f;
    int patience = 5;
    float min_delta = 1e-4f;
    float min_lr = 1e-6f;
};

// Reduce-on-plateau: a monitored value must improve the running best by
// more than min_delta; after `patience` consecutive non-improving
// observations the learning rate is multiplied by `factor` (floored at
// min_lr) and the counter resets. The rate never increases.
class PlateauSchedule {
public:
    explicit PlateauSchedule(PlateauConfig cfg) : cfg_(cfg) {}

    float observe(float monitored, float current_lr);

    float best() const { return best_; }
    int wait() const { return wait_; }
    void restore(float best, int wait) {
        best_ = best;
        wait_ = wait;
    }

private:
    PlateauConfig cfg_;
    float best_ = std::numeric_limits<float>::infinity();
    int wait_ = 0;
};

}  // namespace mbt
