#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mbt/graph.hpp"
#include "mbt/tensor.hpp"

// Primitive differentiable ops. Every op validates its operands, computes
// the forward value eagerly and registers a closure that accumulates input
// gradients from the output gradient. Iteration orders are fixed, so
// results are bit-reproducible run to run within one build.

namespace mbt {
namespace ops {

template <typename T>
using Id = typename Graph<T>::NodeId;

namespace detail {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
}

template <typename T>
void require_rank(const Tensor<T>& t, int rank, const char* op, const char* operand) {
    if (t.rank() != rank) {
        throw std::invalid_argument(std::string(op) + ": " + operand + " must have rank " +
                                    std::to_string(rank) + ", got shape " + shape_str(t.shape()));
    }
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <typename T>
Id<T> add(Graph<T>& g, Id<T> a, Id<T> b) {
    const Tensor<T>&av = g.val(a), &bv = g.val(b);
    detail::require_same_shape(av, bv, "add");
    Tensor<T> out(av.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        Tensor<T>&ga = t.grad(a), &gb = t.grad(b);
        for (std::int64_t i = 0; i < go.numel(); ++i) {
            ga[i] += go[i];
            gb[i] += go[i];
        }
    });
}

template <typename T>
Id<T> sub(Graph<T>& g, Id<T> a, Id<T> b) {
    const Tensor<T>&av = g.val(a), &bv = g.val(b);
    detail::require_same_shape(av, bv, "sub");
    Tensor<T> out(av.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        Tensor<T>&ga = t.grad(a), &gb = t.grad(b);
        for (std::int64_t i = 0; i < go.numel(); ++i) {
            ga[i] += go[i];
            gb[i] -= go[i];
        }
    });
}

template <typename T>
Id<T> mul(Graph<T>& g, Id<T> a, Id<T> b) {
    const Tensor<T>&av = g.val(a), &bv = g.val(b);
    detail::require_same_shape(av, bv, "mul");
    Tensor<T> out(av.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
    return g.emit(std::move(out), {a, b}, [a, b](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        const Tensor<T>&av = t.val(a), &bv = t.val(b);
        Tensor<T>&ga = t.grad(a), &gb = t.grad(b);
        for (std::int64_t i = 0; i < go.numel(); ++i) {
            ga[i] += go[i] * bv[i];
            gb[i] += go[i] * av[i];
        }
    });
}

template <typename T>
Id<T> scale(Graph<T>& g, Id<T> a, T c) {
    const Tensor<T>& av = g.val(a);
    Tensor<T> out(av.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] * c;
    return g.emit(std::move(out), {a}, [a, c](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        Tensor<T>& ga = t.grad(a);
        for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * c;
    });
}

template <typename T>
Id<T> relu(Graph<T>& g, Id<T> a) {
    const Tensor<T>& av = g.val(a);
    Tensor<T> out(av.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
    return g.emit(std::move(out), {a}, [a](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        const Tensor<T>& av = t.val(a);
        Tensor<T>& ga = t.grad(a);
        for (std::int64_t i = 0; i < go.numel(); ++i) {
            if (av[i] > T(0)) ga[i] += go[i];
        }
    });
}

template <typename T>
T sigmoid_value(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
Id<T> sigmoid(Graph<T>& g, Id<T> a) {
    const Tensor<T>& av = g.val(a);
    Tensor<T> out(av.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = sigmoid_value(av[i]);
    return g.emit(std::move(out), {a}, [a](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        const Tensor<T>& ov = t.val(self);
        Tensor<T>& ga = t.grad(a);
        for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * ov[i] * (T(1) - ov[i]);
    });
}

// Elementwise maximum over k >= 2 same-shaped inputs. The subgradient is
// routed to the first input attaining the maximum, so ties resolve
// deterministically.
template <typename T>
Id<T> max_many(Graph<T>& g, const std::vector<Id<T>>& ids) {
    if (ids.size() < 2) throw std::invalid_argument("max_many: needs at least two inputs");
    const Tensor<T>& first = g.val(ids[0]);
    for (std::size_t k = 1; k < ids.size(); ++k) {
        detail::require_same_shape(first, g.val(ids[k]), "max_many");
    }
    Tensor<T> out = first;
    std::vector<std::uint8_t> argmax(static_cast<std::size_t>(out.numel()), 0);
    for (std::size_t k = 1; k < ids.size(); ++k) {
        const Tensor<T>& v = g.val(ids[k]);
        for (std::int64_t i = 0; i < out.numel(); ++i) {
            if (v[i] > out[i]) {
                out[i] = v[i];
                argmax[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(k);
            }
        }
    }
    std::vector<Id<T>> in = ids;
    return g.emit(std::move(out), in,
                  [in, am = std::move(argmax)](Graph<T>& t, Id<T> self) {
                      const Tensor<T>& go = t.grad(self);
                      for (std::int64_t i = 0; i < go.numel(); ++i) {
                          t.grad(in[am[static_cast<std::size_t>(i)]])[i] += go[i];
                      }
                  });
}

template <typename T>
Id<T> max3(Graph<T>& g, Id<T> a, Id<T> b, Id<T> c) {
    return max_many(g, std::vector<Id<T>>{a, b, c});
}

// ---------------------------------------------------------------- reshaping

// Concatenate along the channel axis of (B,C,H,W) tensors.
template <typename T>
Id<T> concat_channels(Graph<T>& g, const std::vector<Id<T>>& ids) {
    if (ids.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const Tensor<T>& first = g.val(ids[0]);
    detail::require_rank(first, 4, "concat_channels", "input");
    int B = first.extent(0), H = first.extent(2), W = first.extent(3);
    int C = 0;
    for (Id<T> id : ids) {
        const Tensor<T>& v = g.val(id);
        detail::require_rank(v, 4, "concat_channels", "input");
        if (v.extent(0) != B || v.extent(2) != H || v.extent(3) != W) {
            throw std::invalid_argument("concat_channels: incompatible shapes " +
                                        shape_str(first.shape()) + " vs " + shape_str(v.shape()));
        }
        C += v.extent(1);
    }
    Tensor<T> out(Shape{B, C, H, W});
    int c0 = 0;
    for (Id<T> id : ids) {
        const Tensor<T>& v = g.val(id);
        int ci = v.extent(1);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < ci; ++c)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) out.at(b, c0 + c, y, x) = v.at(b, c, y, x);
        c0 += ci;
    }
    std::vector<Id<T>> in = ids;
    return g.emit(std::move(out), in, [in, B, H, W](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        int c0 = 0;
        for (Id<T> id : in) {
            Tensor<T>& gi = t.grad(id);
            int ci = t.val(id).extent(1);
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < ci; ++c)
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x) gi.at(b, c, y, x) += go.at(b, c0 + c, y, x);
            c0 += ci;
        }
    });
}

// ---------------------------------------------------------------- reductions

template <typename T>
Id<T> sum(Graph<T>& g, Id<T> a) {
    const Tensor<T>& av = g.val(a);
    double acc = 0.0;
    for (std::int64_t i = 0; i < av.numel(); ++i) acc += static_cast<double>(av[i]);
    return g.emit(Tensor<T>::scalar(static_cast<T>(acc)), {a}, [a](Graph<T>& t, Id<T> self) {
        T go = t.grad(self)[0];
        Tensor<T>& ga = t.grad(a);
        for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += go;
    });
}

template <typename T>
Id<T> mean(Graph<T>& g, Id<T> a) {
    const Tensor<T>& av = g.val(a);
    double acc = 0.0;
    for (std::int64_t i = 0; i < av.numel(); ++i) acc += static_cast<double>(av[i]);
    double n = static_cast<double>(av.numel());
    return g.emit(Tensor<T>::scalar(static_cast<T>(acc / n)), {a}, [a, n](Graph<T>& t, Id<T> self) {
        T go = static_cast<T>(static_cast<double>(t.grad(self)[0]) / n);
        Tensor<T>& ga = t.grad(a);
        for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += go;
    });
}

// ---------------------------------------------------------------- matmul

template <typename T>
Id<T> matmul(Graph<T>& g, Id<T> a, Id<T> b) {
    const Tensor<T>&av = g.val(a), &bv = g.val(b);
    detail::require_rank(av, 2, "matmul", "lhs");
    detail::require_rank(bv, 2, "matmul", "rhs");
    int m = av.extent(0), k = av.extent(1), n = bv.extent(1);
    if (bv.extent(0) != k) {
        throw std::invalid_argument("matmul: inner dims differ, " + shape_str(av.shape()) + " x " +
                                    shape_str(bv.shape()));
    }
    Tensor<T> out(Shape{m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            T aip = av.at(i, p);
            for (int j = 0; j < n; ++j) out.at(i, j) += aip * bv.at(p, j);
        }
    return g.emit(std::move(out), {a, b}, [a, b, m, k, n](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        const Tensor<T>&av = t.val(a), &bv = t.val(b);
        Tensor<T>&ga = t.grad(a), &gb = t.grad(b);
        // ga += go * b^T ; gb += a^T * go
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                T gij = go.at(i, j);
                for (int p = 0; p < k; ++p) {
                    ga.at(i, p) += gij * bv.at(p, j);
                    gb.at(p, j) += av.at(i, p) * gij;
                }
            }
    });
}

// ---------------------------------------------------------------- softmax

// Numerically stable softmax along `axis`: subtracts the slice max before
// exponentiation; the normalizer is accumulated in double.
template <typename T>
Id<T> softmax(Graph<T>& g, Id<T> a, int axis) {
    const Tensor<T>& av = g.val(a);
    if (axis < 0 || axis >= av.rank()) {
        throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                    " out of range for shape " + shape_str(av.shape()));
    }
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= av.extent(i);
    std::int64_t L = av.extent(axis);
    for (int i = axis + 1; i < av.rank(); ++i) inner *= av.extent(i);

    Tensor<T> out(av.shape());
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t in = 0; in < inner; ++in) {
            std::int64_t base = o * L * inner + in;
            T mx = av[base];
            for (std::int64_t l = 1; l < L; ++l) mx = std::max(mx, av[base + l * inner]);
            double denom = 0.0;
            for (std::int64_t l = 0; l < L; ++l) {
                T e = std::exp(av[base + l * inner] - mx);
                out[base + l * inner] = e;
                denom += static_cast<double>(e);
            }
            for (std::int64_t l = 0; l < L; ++l) {
                out[base + l * inner] =
                    static_cast<T>(static_cast<double>(out[base + l * inner]) / denom);
            }
        }
    return g.emit(std::move(out), {a}, [a, outer, L, inner](Graph<T>& t, Id<T> self) {
        const Tensor<T>& go = t.grad(self);
        const Tensor<T>& y = t.val(self);
        Tensor<T>& ga = t.grad(a);
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t in = 0; in < inner; ++in) {
                std::int64_t base = o * L * inner + in;
                double dot = 0.0;
                for (std::int64_t l = 0; l < L; ++l) {
                    std::int64_t i = base + l * inner;
                    dot += static_cast<double>(go[i]) * static_cast<double>(y[i]);
                }
                for (std::int64_t l = 0; l < L; ++l) {
                    std::int64_t i = base + l * inner;
                    ga[i] += y[i] * (go[i] - static_cast<T>(dot));
                }
            }
    });
}

// ---------------------------------------------------------------- conv2d

// Zero-padded strided 2-D convolution (cross-correlation, the deep-learning
// convention). x:(B,Ci,H,W)  w:(Co,Ci,kh,kw)  b:(Co) -> (B,Co,OH,OW).
template <typename T>
Id<T> conv2d(Graph<T>& g, Id<T> x, Id<T> w, Id<T> b, int stride, int pad) {
    const Tensor<T>&xv = g.val(x), &wv = g.val(w), &bv = g.val(b);
    detail::require_rank(xv, 4, "conv2d", "input");
    detail::require_rank(wv, 4, "conv2d", "weight");
    detail::require_rank(bv, 1, "conv2d", "bias");
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
    int B = xv.extent(0), Ci = xv.extent(1), H = xv.extent(2), W = xv.extent(3);
    int Co = wv.extent(0), kh = wv.extent(2), kw = wv.extent(3);
    if (wv.extent(1) != Ci) {
        throw std::invalid_argument("conv2d: weight expects " + std::to_string(wv.extent(1)) +
                                    " input channels, input has " + std::to_string(Ci));
    }
    if (bv.extent(0) != Co) {
        throw std::invalid_argument("conv2d: bias size " + std::to_string(bv.extent(0)) +
                                    " != output channels " + std::to_string(Co));
    }
    if (H + 2 * pad < kh || W + 2 * pad < kw) {
        throw std::invalid_argument("conv2d: kernel " + std::to_string(kh) + "x" +
                                    std::to_string(kw) + " larger than padded input " +
                                    shape_str(xv.shape()) + " pad " + std::to_string(pad));
    }
    int OH = (H + 2 * pad - kh) / stride + 1;
    int OW = (W + 2 * pad - kw) / stride + 1;

    // valid output-x range for a kernel column: ix = ox*stride + kx - pad in [0, W)
    auto ox_range = [&](int kx, int& lo, int& hi) {
        lo = 0;
        while (lo < OW && lo * stride + kx - pad < 0) ++lo;
        hi = OW - 1;
        while (hi >= 0 && hi * stride + kx - pad >= W) --hi;
    };
    auto oy_range = [&](int ky, int& lo, int& hi) {
        lo = 0;
        while (lo < OH && lo * stride + ky - pad < 0) ++lo;
        hi = OH - 1;
        while (hi >= 0 && hi * stride + ky - pad >= H) --hi;
    };

    Tensor<T> out(Shape{B, Co, OH, OW});
    for (int n = 0; n < B; ++n)
        for (int co = 0; co < Co; ++co) {
            T bias = bv[co];
            T* op = &out.at(n, co, 0, 0);
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(OH) * OW; ++i) op[i] = bias;
            for (int ci = 0; ci < Ci; ++ci)
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        T wk = wv.at(co, ci, ky, kx);
                        if (wk == T(0)) continue;
                        int oylo, oyhi, oxlo, oxhi;
                        oy_range(ky, oylo, oyhi);
                        ox_range(kx, oxlo, oxhi);
                        for (int oy = oylo; oy <= oyhi; ++oy) {
                            int iy = oy * stride + ky - pad;
                            const T* xr = &xv.at(n, ci, iy, 0);
                            T* orow = &out.at(n, co, oy, 0);
                            for (int ox = oxlo; ox <= oxhi; ++ox) {
                                orow[ox] += wk * xr[ox * stride + kx - pad];
                            }
                        }
                    }
        }

    return g.emit(std::move(out), {x, w, b},
                  [x, w, b, stride, pad, B, Ci, H, W, Co, kh, kw, OH, OW](Graph<T>& t, Id<T> self) {
                      const Tensor<T>& go = t.grad(self);
                      const Tensor<T>&xv = t.val(x), &wv = t.val(w);
                      Tensor<T>&gx = t.grad(x), &gw = t.grad(w), &gb = t.grad(b);
                      auto ox_range = [&](int kx, int& lo, int& hi) {
                          lo = 0;
                          while (lo < OW && lo * stride + kx - pad < 0) ++lo;
                          hi = OW - 1;
                          while (hi >= 0 && hi * stride + kx - pad >= W) --hi;
                      };
                      auto oy_range = [&](int ky, int& lo, int& hi) {
                          lo = 0;
                          while (lo < OH && lo * stride + ky - pad < 0) ++lo;
                          hi = OH - 1;
                          while (hi >= 0 && hi * stride + ky - pad >= H) --hi;
                      };
                      for (int n = 0; n < B; ++n)
                          for (int co = 0; co < Co; ++co) {
                              const T* gop = &go.at(n, co, 0, 0);
                              double gbias = 0.0;
                              for (std::int64_t i = 0; i < static_cast<std::int64_t>(OH) * OW; ++i)
                                  gbias += static_cast<double>(gop[i]);
                              gb[co] += static_cast<T>(gbias);
                              for (int ci = 0; ci < Ci; ++ci)
                                  for (int ky = 0; ky < kh; ++ky)
                                      for (int kx = 0; kx < kw; ++kx) {
                                          int oylo, oyhi, oxlo, oxhi;
                                          oy_range(ky, oylo, oyhi);
                                          ox_range(kx, oxlo, oxhi);
                                          T wk = wv.at(co, ci, ky, kx);
                                          double gwk = 0.0;
                                          for (int oy = oylo; oy <= oyhi; ++oy) {
                                              int iy = oy * stride + ky - pad;
                                              const T* xr = &xv.at(n, ci, iy, 0);
                                              T* gxr = &gx.at(n, ci, iy, 0);
                                              const T* gor = &go.at(n, co, oy, 0);
                                              for (int ox = oxlo; ox <= oxhi; ++ox) {
                                                  int ix = ox * stride + kx - pad;
                                                  gwk += static_cast<double>(gor[ox]) *
                                                         static_cast<double>(xr[ix]);
                                                  gxr[ix] += wk * gor[ox];
                                              }
                                          }
                                          gw.at(co, ci, ky, kx) += static_cast<T>(gwk);
                                      }
                          }
                  });
}

// ---------------------------------------------------------------- norm

// Instance normalization: statistics per (batch, channel) over the spatial
// extent, then a learned per-channel affine. Suited to batch size 1.
template <typename T>
Id<T> instance_norm(Graph<T>& g, Id<T> x, Id<T> scale_id, Id<T> shift_id, T eps = T(1e-5)) {
    const Tensor<T>&xv = g.val(x), &sc = g.val(scale_id), &sh = g.val(shift_id);
    detail::require_rank(xv, 4, "instance_norm", "input");
    detail::require_rank(sc, 1, "instance_norm", "scale");
    detail::require_rank(sh, 1, "instance_norm", "shift");
    int B = xv.extent(0), C = xv.extent(1), H = xv.extent(2), W = xv.extent(3);
    if (sc.extent(0) != C || sh.extent(0) != C) {
        throw std::invalid_argument("instance_norm: scale/shift must have " + std::to_string(C) +
                                    " channels, got " + std::to_string(sc.extent(0)) + "/" +
                                    std::to_string(sh.extent(0)));
    }
    std::int64_t HW = static_cast<std::int64_t>(H) * W;
    Tensor<T> out(xv.shape());
    // cache normalized activations and inverse stddev for the backward pass
    auto xhat = std::make_shared<Tensor<T>>(xv.shape());
    auto istd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(B) * C);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const T* xp = &xv.at(b, c, 0, 0);
            double mu = 0.0;
            for (std::int64_t i = 0; i < HW; ++i) mu += static_cast<double>(xp[i]);
            mu /= static_cast<double>(HW);
            double var = 0.0;
            for (std::int64_t i = 0; i < HW; ++i) {
                double d = static_cast<double>(xp[i]) - mu;
                var += d * d;
            }
            var /= static_cast<double>(HW);
            T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            (*istd)[static_cast<std::size_t>(b) * C + c] = is;
            T* hp = &xhat->at(b, c, 0, 0);
            T* op = &out.at(b, c, 0, 0);
            T mu_t = static_cast<T>(mu);
            for (std::int64_t i = 0; i < HW; ++i) {
                hp[i] = (xp[i] - mu_t) * is;
                op[i] = sc[c] * hp[i] + sh[c];
            }
        }
    return g.emit(
        std::move(out), {x, scale_id, shift_id},
        [x, scale_id, shift_id, B, C, HW, xhat, istd](Graph<T>& t, Id<T> self) {
            const Tensor<T>& go = t.grad(self);
            const Tensor<T>& sc = t.val(scale_id);
            Tensor<T>&gx = t.grad(x), &gsc = t.grad(scale_id), &gsh = t.grad(shift_id);
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    std::int64_t base = (static_cast<std::int64_t>(b) * C + c) * HW;
                    const T* gop = go.data() + base;
                    const T* hp = xhat->data() + base;
                    T* gxp = gx.data() + base;
                    double sum_g = 0.0, sum_gh = 0.0;
                    for (std::int64_t i = 0; i < HW; ++i) {
                        sum_g += static_cast<double>(gop[i]);
                        sum_gh += static_cast<double>(gop[i]) * static_cast<double>(hp[i]);
                    }
                    gsh[c] += static_cast<T>(sum_g);
                    gsc[c] += static_cast<T>(sum_gh);
                    // d/dx of ((x - mu) * istd * scale + shift)
                    T is = (*istd)[static_cast<std::size_t>(b) * C + c];
                    T mean_g = static_cast<T>(sum_g / static_cast<double>(HW));
                    T mean_gh = static_cast<T>(sum_gh / static_cast<double>(HW));
                    for (std::int64_t i = 0; i < HW; ++i) {
                        gxp[i] += sc[c] * is * (gop[i] - mean_g - hp[i] * mean_gh);
                    }
                }
        });
}

// ---------------------------------------------------------------- upsample

namespace detail {

struct LerpTap {
    int i0, i1;
    double w0, w1;
};

// half-pixel source mapping for a fixed 2x factor (align_corners = false)
inline LerpTap lerp_tap_2x(int d, int src_extent) {
    double s = 0.5 * d - 0.25;
    double fl = std::floor(s);
    double f = s - fl;
    int i0 = static_cast<int>(fl);
    int i1 = i0 + 1;
    if (i0 < 0) i0 = 0;
    if (i0 > src_extent - 1) i0 = src_extent - 1;
    if (i1 < 0) i1 = 0;
    if (i1 > src_extent - 1) i1 = src_extent - 1;
    return {i0, i1, 1.0 - f, f};
}

}  // namespace detail

// Bilinear 2x spatial upsampling with half-pixel alignment and edge clamping.
template <typename T>
Id<T> upsample_bilinear2x(Graph<T>& g, Id<T> x) {
    const Tensor<T>& xv = g.val(x);
    detail::require_rank(xv, 4, "upsample_bilinear2x", "input");
    int B = xv.extent(0), C = xv.extent(1), H = xv.extent(2), W = xv.extent(3);
    int OH = 2 * H, OW = 2 * W;
    std::vector<detail::LerpTap> ty(static_cast<std::size_t>(OH)), tx(static_cast<std::size_t>(OW));
    for (int d = 0; d < OH; ++d) ty[static_cast<std::size_t>(d)] = detail::lerp_tap_2x(d, H);
    for (int d = 0; d < OW; ++d) tx[static_cast<std::size_t>(d)] = detail::lerp_tap_2x(d, W);
    Tensor<T> out(Shape{B, C, OH, OW});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int oy = 0; oy < OH; ++oy) {
                const auto& y = ty[static_cast<std::size_t>(oy)];
                for (int ox = 0; ox < OW; ++ox) {
                    const auto& t = tx[static_cast<std::size_t>(ox)];
                    double v = y.w0 * (t.w0 * xv.at(b, c, y.i0, t.i0) + t.w1 * xv.at(b, c, y.i0, t.i1)) +
                               y.w1 * (t.w0 * xv.at(b, c, y.i1, t.i0) + t.w1 * xv.at(b, c, y.i1, t.i1));
                    out.at(b, c, oy, ox) = static_cast<T>(v);
                }
            }
    return g.emit(std::move(out), {x},
                  [x, B, C, OH, OW, ty = std::move(ty), tx = std::move(tx)](Graph<T>& t, Id<T> self) {
                      const Tensor<T>& go = t.grad(self);
                      Tensor<T>& gx = t.grad(x);
                      for (int b = 0; b < B; ++b)
                          for (int c = 0; c < C; ++c)
                              for (int oy = 0; oy < OH; ++oy) {
                                  const auto& y = ty[static_cast<std::size_t>(oy)];
                                  for (int ox = 0; ox < OW; ++ox) {
                                      const auto& tp = tx[static_cast<std::size_t>(ox)];
                                      T g = go.at(b, c, oy, ox);
                                      gx.at(b, c, y.i0, tp.i0) += static_cast<T>(y.w0 * tp.w0) * g;
                                      gx.at(b, c, y.i0, tp.i1) += static_cast<T>(y.w0 * tp.w1) * g;
                                      gx.at(b, c, y.i1, tp.i0) += static_cast<T>(y.w1 * tp.w0) * g;
                                      gx.at(b, c, y.i1, tp.i1) += static_cast<T>(y.w1 * tp.w1) * g;
                                  }
                              }
                  });
}

// ---------------------------------------------------------------- losses

// Mean binary cross-entropy on logits, computed in the numerically stable
// form max(z,0) - z*y + log(1 + exp(-|z|)). The mean is accumulated in
// double. Non-finite logits are rejected so a diverging model fails loudly.
template <typename T>
Id<T> bce_with_logits(Graph<T>& g, Id<T> logits, const Tensor<T>& target) {
    const Tensor<T>& zv = g.val(logits);
    detail::require_same_shape(zv, target, "bce_with_logits");
    double acc = 0.0;
    for (std::int64_t i = 0; i < zv.numel(); ++i) {
        T z = zv[i];
        if (!std::isfinite(static_cast<double>(z))) {
            throw std::runtime_error("bce_with_logits: non-finite logit at flat index " +
                                     std::to_string(i));
        }
        double zd = static_cast<double>(z), yd = static_cast<double>(target[i]);
        acc += std::max(zd, 0.0) - zd * yd + std::log1p(std::exp(-std::abs(zd)));
    }
    double n = static_cast<double>(zv.numel());
    Tensor<T> tgt = target;
    return g.emit(Tensor<T>::scalar(static_cast<T>(acc / n)), {logits},
                  [logits, n, tgt = std::move(tgt)](Graph<T>& t, Id<T> self) {
                      T go = t.grad(self)[0];
                      const Tensor<T>& zv = t.val(logits);
                      Tensor<T>& gz = t.grad(logits);
                      T inv_n = static_cast<T>(1.0 / n);
                      for (std::int64_t i = 0; i < zv.numel(); ++i) {
                          gz[i] += go * (sigmoid_value(zv[i]) - tgt[i]) * inv_n;
                      }
                  });
}

}  // namespace ops
}  // namespace mbt
