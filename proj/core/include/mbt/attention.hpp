#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbt/graph.hpp"
#include "mbt/ops.hpp"
#include "mbt/tensor.hpp"

// Axial self-attention along one spatial axis with learned relative-position
// terms on queries, keys and values:
//
//   y_o = sum_{p in N(o)} softmax_p( q_o.k_p + q_o.r^q_{p-o} + k_p.r^k_{p-o} )
//                          * ( v_p + r^v_{p-o} )
//
// No 1/sqrt(d) scaling is applied to the logits. N(o) is a span-m window.
//
// Window convention (shared with the dense reference used in tests):
//   m_eff  = min(m, L)
//   start  = clamp(o - (m_eff - 1) / 2, 0, L - m_eff)
//   N(o)   = [start, start + m_eff)
// i.e. the window always holds exactly m_eff positions and slides inward at
// the borders. When m >= L every position attends to the whole line, which
// is how the deepest stages get global axial attention. Relative offsets
// p - o index row (p - o) + (m - 1) of the (2m-1)-row tables.

namespace mbt {

inline int axial_window_start(int o, int len, int m_eff) {
    int s = o - (m_eff - 1) / 2;
    if (s < 0) s = 0;
    if (s > len - m_eff) s = len - m_eff;
    return s;
}

namespace ops {

namespace detail {

template <typename T>
struct AxialGeom {
    int B, C, H, W, L, lines;
    std::int64_t pos_stride;   // step between adjacent positions on a line
    std::int64_t line_stride;  // step between adjacent lines
};

template <typename T>
AxialGeom<T> axial_geom(const Tensor<T>& x, int axis) {
    if (axis != 2 && axis != 3) {
        throw std::invalid_argument("axial_attention: axis must be 2 (height) or 3 (width)");
    }
    AxialGeom<T> geo;
    geo.B = x.extent(0);
    geo.C = x.extent(1);
    geo.H = x.extent(2);
    geo.W = x.extent(3);
    if (axis == 3) {
        geo.L = geo.W;
        geo.lines = geo.H;
        geo.pos_stride = 1;
        geo.line_stride = geo.W;
    } else {
        geo.L = geo.H;
        geo.lines = geo.W;
        geo.pos_stride = geo.W;
        geo.line_stride = 1;
    }
    return geo;
}

// projected activations for one (batch, line) slice: out[d * L + p]
template <typename T>
void project_line(const Tensor<T>& x, const Tensor<T>& w, int b, int line,
                  const AxialGeom<T>& geo, std::vector<double>& out) {
    int d_dim = w.extent(0);
    out.assign(static_cast<std::size_t>(d_dim) * geo.L, 0.0);
    std::int64_t base = static_cast<std::int64_t>(b) * geo.C * geo.H * geo.W +
                        static_cast<std::int64_t>(line) * geo.line_stride;
    for (int d = 0; d < d_dim; ++d)
        for (int c = 0; c < geo.C; ++c) {
            double wdc = static_cast<double>(w.at(d, c));
            if (wdc == 0.0) continue;
            const T* xp = x.data() + base + static_cast<std::int64_t>(c) * geo.H * geo.W;
            double* op = out.data() + static_cast<std::size_t>(d) * geo.L;
            for (int p = 0; p < geo.L; ++p) op[p] += wdc * static_cast<double>(xp[p * geo.pos_stride]);
        }
}

}  // namespace detail

// Fused single-head axial attention. x:(B,C,H,W), wq/wk:(dq,C), wv:(dv,C),
// rq/rk:(2m-1,dq), rv:(2m-1,dv) -> (B,dv,H,W). The backward pass recomputes
// the projections and attention weights instead of caching them.
template <typename T>
Id<T> axial_attention(Graph<T>& g, Id<T> x, Id<T> wq, Id<T> wk, Id<T> wv, Id<T> rq, Id<T> rk,
                      Id<T> rv, int axis, int span) {
    const Tensor<T>& xv = g.val(x);
    detail::require_rank(xv, 4, "axial_attention", "input");
    const Tensor<T>&wqv = g.val(wq), &wkv = g.val(wk), &wvv = g.val(wv);
    const Tensor<T>&rqv = g.val(rq), &rkv = g.val(rk), &rvv = g.val(rv);
    detail::require_rank(wqv, 2, "axial_attention", "wq");
    detail::require_rank(wkv, 2, "axial_attention", "wk");
    detail::require_rank(wvv, 2, "axial_attention", "wv");
    detail::require_rank(rqv, 2, "axial_attention", "rq");
    detail::require_rank(rkv, 2, "axial_attention", "rk");
    detail::require_rank(rvv, 2, "axial_attention", "rv");
    if (span < 1) throw std::invalid_argument("axial_attention: span must be >= 1");
    int C = xv.extent(1), dq = wqv.extent(0), dv = wvv.extent(0);
    if (wqv.extent(1) != C || wkv.extent(1) != C || wvv.extent(1) != C) {
        throw std::invalid_argument("axial_attention: projection widths must match input channels " +
                                    std::to_string(C));
    }
    if (wkv.extent(0) != dq) {
        throw std::invalid_argument("axial_attention: wq and wk must share the query depth");
    }
    int rows = 2 * span - 1;
    if (rqv.extent(0) != rows || rkv.extent(0) != rows || rvv.extent(0) != rows) {
        throw std::invalid_argument("axial_attention: relative tables need " + std::to_string(rows) +
                                    " rows for span " + std::to_string(span));
    }
    if (rqv.extent(1) != dq || rkv.extent(1) != dq || rvv.extent(1) != dv) {
        throw std::invalid_argument("axial_attention: relative table depth mismatch");
    }

    auto geo = detail::axial_geom(xv, axis);
    int L = geo.L;
    int m_eff = span < L ? span : L;

    Tensor<T> out(Shape{geo.B, dv, geo.H, geo.W});
    std::vector<double> q, k, v, logit(static_cast<std::size_t>(m_eff)),
        attn(static_cast<std::size_t>(m_eff));
    for (int b = 0; b < geo.B; ++b)
        for (int line = 0; line < geo.lines; ++line) {
            detail::project_line(xv, wqv, b, line, geo, q);
            detail::project_line(xv, wkv, b, line, geo, k);
            detail::project_line(xv, wvv, b, line, geo, v);
            std::int64_t obase = static_cast<std::int64_t>(b) * dv * geo.H * geo.W +
                                 static_cast<std::int64_t>(line) * geo.line_stride;
            for (int o = 0; o < L; ++o) {
                int lo = axial_window_start(o, L, m_eff);
                double mx = -1e300;
                for (int j = 0; j < m_eff; ++j) {
                    int p = lo + j;
                    int row = (p - o) + (span - 1);
                    double l = 0.0;
                    for (int d = 0; d < dq; ++d) {
                        double qd = q[static_cast<std::size_t>(d) * L + o];
                        double kd = k[static_cast<std::size_t>(d) * L + p];
                        l += qd * kd + qd * static_cast<double>(rqv.at(row, d)) +
                             kd * static_cast<double>(rkv.at(row, d));
                    }
                    logit[static_cast<std::size_t>(j)] = l;
                    if (l > mx) mx = l;
                }
                double denom = 0.0;
                for (int j = 0; j < m_eff; ++j) {
                    double e = std::exp(logit[static_cast<std::size_t>(j)] - mx);
                    attn[static_cast<std::size_t>(j)] = e;
                    denom += e;
                }
                for (int j = 0; j < m_eff; ++j) attn[static_cast<std::size_t>(j)] /= denom;
                for (int i = 0; i < dv; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < m_eff; ++j) {
                        int p = lo + j;
                        int row = (p - o) + (span - 1);
                        acc += attn[static_cast<std::size_t>(j)] *
                               (v[static_cast<std::size_t>(i) * L + p] +
                                static_cast<double>(rvv.at(row, i)));
                    }
                    out[obase + static_cast<std::int64_t>(i) * geo.H * geo.W +
                        static_cast<std::int64_t>(o) * geo.pos_stride] = static_cast<T>(acc);
                }
            }
        }

    return g.emit(
        std::move(out), {x, wq, wk, wv, rq, rk, rv},
        [x, wq, wk, wv, rq, rk, rv, axis, span, dq, dv](Graph<T>& t, Id<T> self) {
            const Tensor<T>& xv = t.val(x);
            const Tensor<T>&wqv = t.val(wq), &wkv = t.val(wk), &wvv = t.val(wv);
            const Tensor<T>&rqv = t.val(rq), &rkv = t.val(rk), &rvv = t.val(rv);
            const Tensor<T>& go = t.grad(self);
            Tensor<T>&gx = t.grad(x), &gwq = t.grad(wq), &gwk = t.grad(wk), &gwv = t.grad(wv);
            Tensor<T>&grq = t.grad(rq), &grk = t.grad(rk), &grv = t.grad(rv);

            auto geo = detail::axial_geom(xv, axis);
            int L = geo.L, C = geo.C;
            int m_eff = span < L ? span : L;
            std::vector<double> q, k, v, logit(static_cast<std::size_t>(m_eff)),
                attn(static_cast<std::size_t>(m_eff)), ga(static_cast<std::size_t>(m_eff)),
                gl(static_cast<std::size_t>(m_eff));
            std::vector<double> gq(static_cast<std::size_t>(dq) * L),
                gk(static_cast<std::size_t>(dq) * L), gv(static_cast<std::size_t>(dv) * L);
            std::vector<double> gyl(static_cast<std::size_t>(dv) * L);

            for (int b = 0; b < geo.B; ++b)
                for (int line = 0; line < geo.lines; ++line) {
                    detail::project_line(xv, wqv, b, line, geo, q);
                    detail::project_line(xv, wkv, b, line, geo, k);
                    detail::project_line(xv, wvv, b, line, geo, v);
                    std::fill(gq.begin(), gq.end(), 0.0);
                    std::fill(gk.begin(), gk.end(), 0.0);
                    std::fill(gv.begin(), gv.end(), 0.0);
                    std::int64_t obase = static_cast<std::int64_t>(b) * dv * geo.H * geo.W +
                                         static_cast<std::int64_t>(line) * geo.line_stride;
                    for (int i = 0; i < dv; ++i)
                        for (int p = 0; p < L; ++p) {
                            gyl[static_cast<std::size_t>(i) * L + p] = static_cast<double>(
                                go[obase + static_cast<std::int64_t>(i) * geo.H * geo.W +
                                   static_cast<std::int64_t>(p) * geo.pos_stride]);
                        }

                    for (int o = 0; o < L; ++o) {
                        int lo = axial_window_start(o, L, m_eff);
                        // recompute attention weights for this query position
                        double mx = -1e300;
                        for (int j = 0; j < m_eff; ++j) {
                            int p = lo + j;
                            int row = (p - o) + (span - 1);
                            double l = 0.0;
                            for (int d = 0; d < dq; ++d) {
                                double qd = q[static_cast<std::size_t>(d) * L + o];
                                double kd = k[static_cast<std::size_t>(d) * L + p];
                                l += qd * kd + qd * static_cast<double>(rqv.at(row, d)) +
                                     kd * static_cast<double>(rkv.at(row, d));
                            }
                            logit[static_cast<std::size_t>(j)] = l;
                            if (l > mx) mx = l;
                        }
                        double denom = 0.0;
                        for (int j = 0; j < m_eff; ++j) {
                            double e = std::exp(logit[static_cast<std::size_t>(j)] - mx);
                            attn[static_cast<std::size_t>(j)] = e;
                            denom += e;
                        }
                        for (int j = 0; j < m_eff; ++j) attn[static_cast<std::size_t>(j)] /= denom;

                        // d(loss)/d(attn_j) plus value-path gradients
                        for (int j = 0; j < m_eff; ++j) {
                            int p = lo + j;
                            int row = (p - o) + (span - 1);
                            double a = attn[static_cast<std::size_t>(j)];
                            double acc = 0.0;
                            for (int i = 0; i < dv; ++i) {
                                double gy = gyl[static_cast<std::size_t>(i) * L + o];
                                acc += gy * (v[static_cast<std::size_t>(i) * L + p] +
                                             static_cast<double>(rvv.at(row, i)));
                                gv[static_cast<std::size_t>(i) * L + p] += a * gy;
                                grv.at(row, i) += static_cast<T>(a * gy);
                            }
                            ga[static_cast<std::size_t>(j)] = acc;
                        }
                        // softmax backward
                        double dot = 0.0;
                        for (int j = 0; j < m_eff; ++j)
                            dot += attn[static_cast<std::size_t>(j)] * ga[static_cast<std::size_t>(j)];
                        for (int j = 0; j < m_eff; ++j)
                            gl[static_cast<std::size_t>(j)] =
                                attn[static_cast<std::size_t>(j)] * (ga[static_cast<std::size_t>(j)] - dot);
                        // logit backward into q, k and the relative tables
                        for (int j = 0; j < m_eff; ++j) {
                            int p = lo + j;
                            int row = (p - o) + (span - 1);
                            double glj = gl[static_cast<std::size_t>(j)];
                            if (glj == 0.0) continue;
                            for (int d = 0; d < dq; ++d) {
                                double qd = q[static_cast<std::size_t>(d) * L + o];
                                double kd = k[static_cast<std::size_t>(d) * L + p];
                                gq[static_cast<std::size_t>(d) * L + o] +=
                                    glj * (kd + static_cast<double>(rqv.at(row, d)));
                                gk[static_cast<std::size_t>(d) * L + p] +=
                                    glj * (qd + static_cast<double>(rkv.at(row, d)));
                                grq.at(row, d) += static_cast<T>(glj * qd);
                                grk.at(row, d) += static_cast<T>(glj * kd);
                            }
                        }
                    }

                    // projection backward: gW += g_proj x^T, gx += W^T g_proj
                    std::int64_t base = static_cast<std::int64_t>(b) * C * geo.H * geo.W +
                                        static_cast<std::int64_t>(line) * geo.line_stride;
                    auto fold = [&](const std::vector<double>& gproj, const Tensor<T>& wmat,
                                    Tensor<T>& gwmat, int d_dim) {
                        for (int d = 0; d < d_dim; ++d)
                            for (int c = 0; c < C; ++c) {
                                const T* xp = xv.data() + base + static_cast<std::int64_t>(c) * geo.H * geo.W;
                                T* gxp = gx.data() + base + static_cast<std::int64_t>(c) * geo.H * geo.W;
                                double wdc = static_cast<double>(wmat.at(d, c));
                                double gw_acc = 0.0;
                                const double* gp = gproj.data() + static_cast<std::size_t>(d) * L;
                                for (int p = 0; p < L; ++p) {
                                    gw_acc += gp[p] * static_cast<double>(xp[p * geo.pos_stride]);
                                    gxp[p * geo.pos_stride] += static_cast<T>(wdc * gp[p]);
                                }
                                gwmat.at(d, c) += static_cast<T>(gw_acc);
                            }
                    };
                    fold(gq, wqv, gwq, dq);
                    fold(gk, wkv, gwk, dq);
                    fold(gv, wvv, gwv, dv);
                }
        });
}

}  // namespace ops

// ------------------------------------------------------------------ modules

// Walks a module tree assigning hierarchical parameter names; used for
// registration, checkpointing and optimizer-state alignment.
template <typename T>
using ParamVisitor = std::function<void(const std::string&, Parameter<T>&)>;

// Parameters of one attention head on one axis.
template <typename T>
struct AxialHead {
    Parameter<T> wq, wk, wv, rq, rk, rv;
    int span = 1;

    AxialHead() = default;

    template <typename Rng>
    AxialHead(int channels, int d_qk, int d_v, int span_, Rng& rng) : span(span_) {
        T lim_q = static_cast<T>(std::sqrt(3.0 / channels));
        wq = Parameter<T>("wq", Tensor<T>::uniform(Shape{d_qk, channels}, rng, -lim_q, lim_q));
        wk = Parameter<T>("wk", Tensor<T>::uniform(Shape{d_qk, channels}, rng, -lim_q, lim_q));
        wv = Parameter<T>("wv", Tensor<T>::uniform(Shape{d_v, channels}, rng, -lim_q, lim_q));
        int rows = 2 * span - 1;
        rq = Parameter<T>("rq", Tensor<T>::zeros(Shape{rows, d_qk}));
        rk = Parameter<T>("rk", Tensor<T>::zeros(Shape{rows, d_qk}));
        rv = Parameter<T>("rv", Tensor<T>::zeros(Shape{rows, d_v}));
    }

    typename Graph<T>::NodeId forward(Graph<T>& g, typename Graph<T>::NodeId x, int axis) {
        return ops::axial_attention(g, x, g.param(wq), g.param(wk), g.param(wv), g.param(rq),
                                    g.param(rk), g.param(rv), axis, span);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) {
        v(prefix + ".wq", wq);
        v(prefix + ".wk", wk);
        v(prefix + ".wv", wv);
        v(prefix + ".rq", rq);
        v(prefix + ".rk", rk);
        v(prefix + ".rv", rv);
    }
};

// Multi-head axial attention: independent heads along the same axis, outputs
// concatenated over channels. Every head must produce the same value depth.
template <typename T>
struct MultiHeadAxial {
    std::vector<AxialHead<T>> heads;
    int axis = 3;

    MultiHeadAxial() = default;

    template <typename Rng>
    MultiHeadAxial(int n_heads, int channels, int d_qk, int d_v, int span, int axis_, Rng& rng)
        : axis(axis_) {
        if (n_heads < 1) throw std::invalid_argument("multi_head_axial: needs at least one head");
        heads.reserve(static_cast<std::size_t>(n_heads));
        for (int h = 0; h < n_heads; ++h) heads.emplace_back(channels, d_qk, d_v, span, rng);
    }

    typename Graph<T>::NodeId forward(Graph<T>& g, typename Graph<T>::NodeId x) {
        int dv = heads.front().wv.value.extent(0);
        std::vector<typename Graph<T>::NodeId> outs;
        outs.reserve(heads.size());
        for (auto& h : heads) {
            if (h.wv.value.extent(0) != dv) {
                throw std::invalid_argument("multi_head_axial: heads disagree on value depth");
            }
            outs.push_back(h.forward(g, x, axis));
        }
        if (outs.size() == 1) return outs.front();
        return ops::concat_channels(g, outs);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) {
        for (std::size_t h = 0; h < heads.size(); ++h) {
            heads[h].visit(prefix + ".h" + std::to_string(h), v);
        }
    }
};

}  // namespace mbt
