#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "mbt/attention.hpp"
#include "mbt/graph.hpp"
#include "mbt/ops.hpp"

namespace mbt {

// ------------------------------------------------------------------ layers

template <typename T>
struct Conv2dLayer {
    Parameter<T> weight, bias;
    int stride = 1, pad = 0;

    Conv2dLayer() = default;

    template <typename Rng>
    Conv2dLayer(int cin, int cout, int k, int stride_, int pad_, Rng& rng, bool zero_init = false)
        : stride(stride_), pad(pad_) {
        Shape ws{cout, cin, k, k};
        if (zero_init) {
            weight = Parameter<T>("weight", Tensor<T>::zeros(ws));
        } else {
            T lim = static_cast<T>(std::sqrt(6.0 / (static_cast<double>(cin) * k * k)));
            weight = Parameter<T>("weight", Tensor<T>::uniform(ws, rng, -lim, lim));
        }
        bias = Parameter<T>("bias", Tensor<T>::zeros(Shape{cout}));
    }

    typename Graph<T>::NodeId forward(Graph<T>& g, typename Graph<T>::NodeId x) {
        return ops::conv2d(g, x, g.param(weight), g.param(bias), stride, pad);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) {
        v(prefix + ".weight", weight);
        v(prefix + ".bias", bias);
    }
};

template <typename T>
struct InstanceNorm2d {
    Parameter<T> scale, shift;
    T eps = static_cast<T>(1e-5);

    InstanceNorm2d() = default;

    explicit InstanceNorm2d(int channels)
        : scale("scale", Tensor<T>::full(Shape{channels}, T(1))),
          shift("shift", Tensor<T>::zeros(Shape{channels})) {}

    typename Graph<T>::NodeId forward(Graph<T>& g, typename Graph<T>::NodeId x) {
        return ops::instance_norm(g, x, g.param(scale), g.param(shift), eps);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) {
        v(prefix + ".scale", scale);
        v(prefix + ".shift", shift);
    }
};

// ------------------------------------------------------------------ blocks

// Pre-activation free residual block:
//   y = relu( norm2(conv2(relu(norm1(conv1(x))))) + skip(x) )
// conv1 carries any stride / width change; skip is identity when shapes
// match and a bare 1x1 strided projection otherwise.
template <typename T>
struct ConvResidualBlock {
    Conv2dLayer<T> conv1, conv2;
    InstanceNorm2d<T> norm1, norm2;
    std::optional<Conv2dLayer<T>> skip;

    ConvResidualBlock() = default;

    template <typename Rng>
    ConvResidualBlock(int cin, int cout, int stride, Rng& rng)
        : conv1(cin, cout, 3, stride, 1, rng),
          conv2(cout, cout, 3, 1, 1, rng),
          norm1(cout),
          norm2(cout) {
        if (stride != 1 || cin != cout) {
            skip.emplace(cin, cout, 1, stride, 0, rng);
        }
    }

    typename Graph<T>::NodeId forward(Graph<T>& g, typename Graph<T>::NodeId x) {
        auto h = ops::relu(g, norm1.forward(g, conv1.forward(g, x)));
        h = norm2.forward(g, conv2.forward(g, h));
        auto s = skip ? skip->forward(g, x) : x;
        return ops::relu(g, ops::add(g, h, s));
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) {
        conv1.visit(prefix + ".conv1", v);
        norm1.visit(prefix + ".norm1", v);
        conv2.visit(prefix + ".conv2", v);
        norm2.visit(prefix + ".norm2", v);
        if (skip) skip->visit(prefix + ".skip", v);
    }
};

// Shape-preserving residual transformer block:
//   y = x + exit(width_attn(height_attn(relu(norm(entry(x))))))
// entry is a 1x1 conv squeezing to a bottleneck width, the two axial
// multi-head attentions run consecutively with no norm in between, and the
// 1x1 exit conv restores the block width. The exit conv is zero-initialized
// so a fresh block is exactly the identity.
template <typename T>
struct ResidualTransformerBlock {
    Conv2dLayer<T> entry, exit_conv;
    InstanceNorm2d<T> norm;
    MultiHeadAxial<T> height_attn, width_attn;
    int width = 0, bottleneck = 0;

    ResidualTransformerBlock() = default;

    template <typename Rng>
    ResidualTransformerBlock(int width_, int heads, int span, Rng& rng, int bottleneck_div = 2)
        : width(width_) {
        if (width_ % bottleneck_div != 0) {
            throw std::invalid_argument("transformer block: width " + std::to_string(width_) +
                                        " not divisible by bottleneck divisor " +
                                        std::to_string(bottleneck_div));
        }
        bottleneck = width_ / bottleneck_div;
        if (bottleneck % heads != 0) {
            throw std::invalid_argument("transformer block: bottleneck width " +
                                        std::to_string(bottleneck) + " not divisible by " +
                                        std::to_string(heads) + " heads");
        }
        int d = bottleneck / heads;
        entry = Conv2dLayer<T>(width_, bottleneck, 1, 1, 0, rng);
        norm = InstanceNorm2d<T>(bottleneck);
        height_attn = MultiHeadAxial<T>(heads, bottleneck, d, d, span, 2, rng);
        width_attn = MultiHeadAxial<T>(heads, bottleneck, d, d, span, 3, rng);
        exit_conv = Conv2dLayer<T>(bottleneck, width_, 1, 1, 0, rng, /*zero_init=*/true);
    }

    typename Graph<T>::NodeId forward(Graph<T>& g, typename Graph<T>::NodeId x) {
        auto h = ops::relu(g, norm.forward(g, entry.forward(g, x)));
        h = height_attn.forward(g, h);
        h = width_attn.forward(g, h);
        h = exit_conv.forward(g, h);
        return ops::add(g, x, h);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) {
        entry.visit(prefix + ".entry", v);
        norm.visit(prefix + ".norm", v);
        height_attn.visit(prefix + ".hattn", v);
        width_attn.visit(prefix + ".wattn", v);
        exit_conv.visit(prefix + ".exit", v);
    }
};

}  // namespace mbt
