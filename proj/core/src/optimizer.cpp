#include "mbt/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace mbt {

RmsProp::RmsProp(std::vector<Parameter<float>*> params, RmsPropConfig cfg)
    : params_(std::move(params)), cfg_(cfg), lr_(cfg.lr) {
    if (!(cfg_.lr > 0)) throw std::invalid_argument("rmsprop: lr must be positive");
    if (!(cfg_.rho > 0 && cfg_.rho < 1)) throw std::invalid_argument("rmsprop: rho must be in (0,1)");
    if (!(cfg_.eps > 0)) throw std::invalid_argument("rmsprop: eps must be positive");
    accum_.reserve(params_.size());
    for (const auto* p : params_) accum_.emplace_back(p->value.shape());
}

void RmsProp::step() {
    // validate first so a poisoned gradient aborts the step atomically
    for (const auto* p : params_) {
        const Tensor<float>& g = p->grad;
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            if (!std::isfinite(g[i])) {
                throw std::runtime_error("rmsprop: non-finite gradient in '" + p->name +
                                         "' at flat index " + std::to_string(i));
            }
        }
    }
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter<float>& p = *params_[k];
        Tensor<float>& s = accum_[k];
        for (std::int64_t i = 0; i < p.value.numel(); ++i) {
            float g = p.grad[i];
            s[i] = cfg_.rho * s[i] + (1.0f - cfg_.rho) * g * g;
            p.value[i] -= lr_ * g / (std::sqrt(s[i]) + cfg_.eps);
        }
        p.zero_grad();
    }
}

NamedTensors RmsProp::state_entries() const {
    NamedTensors out;
    out.reserve(params_.size());
    for (std::size_t k = 0; k < params_.size(); ++k) {
        out.emplace_back(params_[k]->name, accum_[k]);
    }
    return out;
}

void RmsProp::load_state(const NamedTensors& entries) {
    std::unordered_map<std::string, const Tensor<float>*> by_name;
    for (const auto& [name, t] : entries) by_name.emplace(name, &t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto it = by_name.find(params_[k]->name);
        if (it == by_name.end()) {
            throw std::runtime_error("rmsprop: checkpoint lacks accumulator for '" +
                                     params_[k]->name + "'");
        }
        if (it->second->shape() != accum_[k].shape()) {
            throw std::runtime_error("rmsprop: accumulator shape mismatch for '" +
                                     params_[k]->name + "'");
        }
        accum_[k] = *it->second;
    }
}

float PlateauSchedule::observe(float monitored, float current_lr) {
    if (monitored < best_ - cfg_.min_delta) {
        best_ = monitored;
        wait_ = 0;
        return current_lr;
    }
    ++wait_;
    if (wait_ >= cfg_.patience) {
        wait_ = 0;
        float reduced = current_lr * cfg_.factor;
        if (reduced < cfg_.min_lr) reduced = cfg_.min_lr;
        if (reduced > current_lr) reduced = current_lr;  // the rate never increases
        return reduced;
    }
    return current_lr;
}

}  // namespace mbt
