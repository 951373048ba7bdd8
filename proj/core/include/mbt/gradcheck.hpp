#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mbt/graph.hpp"

// Central-difference gradient verification for double-precision graphs.
// A case exposes its parameters and a loss functional; the checker compares
// the analytic gradient from one backward pass against (L(p+h)-L(p-h))/2h
// for every checked element.

namespace mbt {

struct GradCheckOptions {
    double step = 1e-5;          // scaled by max(1,|value|) per element
    double tolerance = 1e-4;
    // elements checked per parameter tensor; <0 checks all of them
    int samples_per_param = -1;
    std::uint64_t sample_seed = 17;
};

struct GradCheckWorst {
    std::string param;
    std::int64_t index = -1;
    double analytic = 0, numeric = 0, rel_err = 0;
};

struct GradCheckResult {
    std::string name;
    bool pass = false;
    double max_rel_err = 0;
    double tolerance = 0;
    std::int64_t checked = 0;
    GradCheckWorst worst;
    std::string message;  // set when the check aborted (non-finite, throw)
};

// loss(with_grads): evaluate the loss at the current parameter values on a
// fresh graph; when with_grads is set, also run backward so Parameter::grad
// is filled. Gradients are zeroed here before that call.
GradCheckResult check_gradients(const std::string& name,
                                const std::vector<Parameter<double>*>& params,
                                const std::function<double(bool)>& loss,
                                const GradCheckOptions& opts = GradCheckOptions{});

// The standard verification suite: every primitive op, the attention
// primitive, both residual blocks and (optionally) a sampled check of a
// full toy network.
struct GradSuiteOptions {
    bool include_model = true;
    int model_samples_per_param = 4;
    double op_tolerance = 1e-4;
    double model_tolerance = 1e-3;
    std::uint64_t seed = 7;
};

std::vector<GradCheckResult> run_gradcheck_suite(const GradSuiteOptions& opts);

}  // namespace mbt
