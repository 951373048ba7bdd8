#include "mbt/gradcheck.hpp"

#include <algorithm>
#include <memory>

#include "mbt/attention.hpp"
#include "mbt/blocks.hpp"
#include "mbt/losses.hpp"
#include "mbt/model.hpp"
#include "mbt/ops.hpp"

namespace mbt {

GradCheckResult check_gradients(const std::string& name,
                                const std::vector<Parameter<double>*>& params,
                                const std::function<double(bool)>& loss,
                                const GradCheckOptions& opts) {
    GradCheckResult res;
    res.name = name;
    res.tolerance = opts.tolerance;
    try {
        for (auto* p : params) p->zero_grad();
        double base = loss(true);
        if (!std::isfinite(base)) {
            res.message = "loss is non-finite at the evaluation point";
            return res;
        }
        std::mt19937_64 rng(opts.sample_seed);
        double max_rel = 0.0;
        GradCheckWorst worst;
        for (auto* p : params) {
            std::vector<std::int64_t> indices;
            std::int64_t n = p->value.numel();
            if (opts.samples_per_param < 0 || opts.samples_per_param >= n) {
                indices.resize(static_cast<std::size_t>(n));
                for (std::int64_t i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
            } else {
                for (int k = 0; k < opts.samples_per_param; ++k) {
                    indices.push_back(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n)));
                }
                std::sort(indices.begin(), indices.end());
                indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
            }
            for (std::int64_t i : indices) {
                double saved = p->value[i];
                double h = opts.step * std::max(1.0, std::abs(saved));
                p->value[i] = saved + h;
                double lp = loss(false);
                p->value[i] = saved - h;
                double lm = loss(false);
                p->value[i] = saved;
                if (!std::isfinite(lp) || !std::isfinite(lm)) {
                    res.message = "non-finite loss while perturbing " + p->name + "[" +
                                  std::to_string(i) + "]";
                    return res;
                }
                double numeric = (lp - lm) / (2.0 * h);
                double analytic = p->grad[i];
                if (!std::isfinite(analytic)) {
                    res.message = "non-finite analytic gradient at " + p->name + "[" +
                                  std::to_string(i) + "]";
                    return res;
                }
                // the 1e-6 floor turns the comparison absolute for gradients
                // too small for central differences to resolve
                double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                double rel = std::abs(analytic - numeric) / denom;
                ++res.checked;
                if (rel > max_rel) {
                    max_rel = rel;
                    worst = {p->name, i, analytic, numeric, rel};
                }
            }
        }
        res.max_rel_err = max_rel;
        res.worst = worst;
        res.pass = max_rel < opts.tolerance;
    } catch (const std::exception& ex) {
        res.message = ex.what();
        res.pass = false;
    }
    return res;
}

// ---------------------------------------------------------------- suite

namespace {

using P = Parameter<double>;
using G = Graph<double>;
using Id = G::NodeId;

Tensor<double> rnd(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    return Tensor<double>::uniform(std::move(s), rng, lo, hi);
}

// loss = sum(out * W) against a fixed random weighting so every output
// element influences the scalar
Id weighted_sum(G& g, Id out, const Tensor<double>& w) {
    return ops::sum(g, ops::mul(g, out, g.constant(w)));
}

class CaseBuilder {
public:
    explicit CaseBuilder(std::uint64_t seed) : rng_(seed) {}

    P& make(const std::string& name, Shape shape, double lo = -1.0, double hi = 1.0) {
        store_.push_back(std::make_unique<P>(name, rnd(std::move(shape), rng_, lo, hi)));
        return *store_.back();
    }

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
    std::vector<std::unique_ptr<P>> store_;
};

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(const GradSuiteOptions& opts) {
    std::vector<GradCheckResult> results;
    std::vector<std::shared_ptr<CaseBuilder>> own;  // parameter storage for all cases
    auto builder = [&](std::uint64_t salt) {
        own.push_back(std::make_shared<CaseBuilder>(opts.seed * 1000003ull + salt));
        return own.back();
    };
    GradCheckOptions op_opts;
    op_opts.tolerance = opts.op_tolerance;

    auto check = [&](const std::string& name, const std::vector<P*>& params,
                     const std::function<double(bool)>& loss,
                     const GradCheckOptions& o) {
        results.push_back(check_gradients(name, params, loss, o));
    };

    // ---- elementwise ----
    {
        auto b = builder(1);
        P&x = b->make("x", {2, 3, 4, 5}), &y = b->make("y", {2, 3, 4, 5});
        Tensor<double> w = rnd({2, 3, 4, 5}, b->rng());
        check("op.add", {&x, &y}, [&x, &y, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::add(g, g.param(x), g.param(y)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
        check("op.sub", {&x, &y}, [&x, &y, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::sub(g, g.param(x), g.param(y)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
        check("op.mul", {&x, &y}, [&x, &y, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::mul(g, g.param(x), g.param(y)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- relu / sigmoid (inputs kept away from the relu kink) ----
    {
        auto b = builder(2);
        P& x = b->make("x", {3, 17});
        for (std::int64_t i = 0; i < x.value.numel(); ++i) {
            if (std::abs(x.value[i]) < 0.05) x.value[i] += 0.1;
        }
        Tensor<double> w = rnd({3, 17}, b->rng());
        check("op.relu", {&x}, [&x, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::relu(g, g.param(x)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
        check("op.sigmoid", {&x}, [&x, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::sigmoid(g, g.param(x)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- max over three inputs (random values make ties measure-zero) ----
    {
        auto b = builder(3);
        P&x = b->make("x", {2, 2, 3, 3}), &y = b->make("y", {2, 2, 3, 3}),
         &z = b->make("z", {2, 2, 3, 3});
        Tensor<double> w = rnd({2, 2, 3, 3}, b->rng());
        check("op.max3", {&x, &y, &z}, [&x, &y, &z, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::max3(g, g.param(x), g.param(y), g.param(z)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- concat ----
    {
        auto b = builder(4);
        P&x = b->make("x", {2, 2, 3, 4}), &y = b->make("y", {2, 3, 3, 4});
        Tensor<double> w = rnd({2, 5, 3, 4}, b->rng());
        check("op.concat_channels", {&x, &y}, [&x, &y, w](bool grads) {
            G g;
            Id l = weighted_sum(
                g, ops::concat_channels(g, std::vector<Id>{g.param(x), g.param(y)}), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- reductions / matmul / softmax ----
    {
        auto b = builder(5);
        P& x = b->make("x", {4, 6});
        check("op.sum", {&x}, [&x](bool grads) {
            G g;
            Id l = ops::sum(g, g.param(x));
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
        check("op.mean", {&x}, [&x](bool grads) {
            G g;
            Id l = ops::mean(g, ops::mul(g, g.param(x), g.param(x)));
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
        P&a = b->make("a", {3, 4}), &c = b->make("c", {4, 5});
        Tensor<double> w = rnd({3, 5}, b->rng());
        check("op.matmul", {&a, &c}, [&a, &c, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::matmul(g, g.param(a), g.param(c)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
        P& s = b->make("s", {2, 5, 3}, -2.0, 2.0);
        Tensor<double> ws = rnd({2, 5, 3}, b->rng());
        for (int axis = 0; axis < 3; ++axis) {
            check("op.softmax.axis" + std::to_string(axis), {&s}, [&s, ws, axis](bool grads) {
                G g;
                Id l = weighted_sum(g, ops::softmax(g, g.param(s), axis), ws);
                double v = g.val(l).value();
                if (grads) g.backward(l);
                return v;
            }, op_opts);
        }
    }
    // ---- conv2d ----
    {
        auto b = builder(6);
        struct Cfg {
            int stride, pad;
        };
        int idx = 0;
        for (Cfg c : {Cfg{1, 0}, Cfg{1, 1}, Cfg{2, 1}}) {
            P&x = b->make("x" + std::to_string(idx), {2, 3, 6, 7}),
             &w = b->make("w" + std::to_string(idx), {4, 3, 3, 3}),
             &bias = b->make("b" + std::to_string(idx), {4});
            int oh = (6 + 2 * c.pad - 3) / c.stride + 1;
            int ow = (7 + 2 * c.pad - 3) / c.stride + 1;
            Tensor<double> ww = rnd({2, 4, oh, ow}, b->rng());
            check("op.conv2d.s" + std::to_string(c.stride) + "p" + std::to_string(c.pad),
                  {&x, &w, &bias}, [&x, &w, &bias, ww, c](bool grads) {
                      G g;
                      Id l = weighted_sum(
                          g, ops::conv2d(g, g.param(x), g.param(w), g.param(bias), c.stride, c.pad),
                          ww);
                      double v = g.val(l).value();
                      if (grads) g.backward(l);
                      return v;
                  }, op_opts);
            ++idx;
        }
        // 1x1 conv, the projection workhorse
        P&x1 = b->make("x1", {1, 5, 4, 4}), &w1 = b->make("w1", {3, 5, 1, 1}),
         &b1 = b->make("bb1", {3});
        Tensor<double> w1w = rnd({1, 3, 4, 4}, b->rng());
        check("op.conv2d.1x1", {&x1, &w1, &b1}, [&x1, &w1, &b1, w1w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::conv2d(g, g.param(x1), g.param(w1), g.param(b1), 1, 0), w1w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- instance norm ----
    {
        auto b = builder(7);
        P&x = b->make("x", {2, 3, 4, 5}), &sc = b->make("scale", {3}, 0.5, 1.5),
         &sh = b->make("shift", {3}, -0.5, 0.5);
        Tensor<double> w = rnd({2, 3, 4, 5}, b->rng());
        check("op.instance_norm", {&x, &sc, &sh}, [&x, &sc, &sh, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::instance_norm(g, g.param(x), g.param(sc), g.param(sh)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- bilinear upsample ----
    {
        auto b = builder(8);
        P& x = b->make("x", {1, 2, 3, 4});
        Tensor<double> w = rnd({1, 2, 6, 8}, b->rng());
        check("op.upsample_bilinear2x", {&x}, [&x, w](bool grads) {
            G g;
            Id l = weighted_sum(g, ops::upsample_bilinear2x(g, g.param(x)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- bce ----
    {
        auto b = builder(9);
        P& z = b->make("z", {1, 1, 4, 4}, -2.0, 2.0);
        Tensor<double> tgt(Shape{1, 1, 4, 4});
        for (std::int64_t i = 0; i < tgt.numel(); ++i) tgt[i] = (b->rng()() % 2) ? 1.0 : 0.0;
        check("op.bce_with_logits", {&z}, [&z, tgt](bool grads) {
            G g;
            Id l = ops::bce_with_logits(g, g.param(z), tgt);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- axial attention: several window regimes on both axes ----
    {
        struct ACfg {
            int axis, span, H, W;
            const char* tag;
        };
        for (ACfg c : {ACfg{3, 3, 4, 6, "w.windowed"}, ACfg{3, 9, 4, 6, "w.global"},
                       ACfg{2, 3, 6, 4, "h.windowed"}, ACfg{2, 1, 5, 4, "h.span1"}}) {
            auto b = builder(10 + static_cast<std::uint64_t>(c.axis * 10 + c.span));
            int C = 3, dq = 2, dv = 2, rows = 2 * c.span - 1;
            P&x = b->make("x", {2, C, c.H, c.W}), &wq = b->make("wq", {dq, C}),
             &wk = b->make("wk", {dq, C}), &wv = b->make("wv", {dv, C}),
             &rq = b->make("rq", {rows, dq}, -0.5, 0.5), &rk = b->make("rk", {rows, dq}, -0.5, 0.5),
             &rv = b->make("rv", {rows, dv}, -0.5, 0.5);
            Tensor<double> w = rnd({2, dv, c.H, c.W}, b->rng());
            int axis = c.axis, span = c.span;
            check(std::string("op.axial_attention.") + c.tag,
                  {&x, &wq, &wk, &wv, &rq, &rk, &rv},
                  [&x, &wq, &wk, &wv, &rq, &rk, &rv, w, axis, span](bool grads) {
                      G g;
                      Id l = weighted_sum(
                          g,
                          ops::axial_attention(g, g.param(x), g.param(wq), g.param(wk), g.param(wv),
                                               g.param(rq), g.param(rk), g.param(rv), axis, span),
                          w);
                      double v = g.val(l).value();
                      if (grads) g.backward(l);
                      return v;
                  }, op_opts);
        }
    }
    // ---- multi-head attention module ----
    {
        auto b = builder(40);
        auto mha = std::make_shared<MultiHeadAxial<double>>(2, 4, 2, 2, 3, 3, b->rng());
        std::vector<P*> ps;
        mha->visit("mha", [&](const std::string& n, P& p) {
            p.name = n;
            ps.push_back(&p);
        });
        P& x = b->make("x", {1, 4, 3, 5});
        ps.push_back(&x);
        Tensor<double> w = rnd({1, 4, 3, 5}, b->rng());
        check("module.multi_head_axial", ps, [mha, &x, w](bool grads) {
            G g;
            Id l = weighted_sum(g, mha->forward(g, g.param(x)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- conv residual block (stride 2, width change: skip projection) ----
    {
        auto b = builder(41);
        auto blk = std::make_shared<ConvResidualBlock<double>>(3, 5, 2, b->rng());
        std::vector<P*> ps;
        blk->visit("crb", [&](const std::string& n, P& p) {
            p.name = n;
            ps.push_back(&p);
        });
        P& x = b->make("x", {1, 3, 6, 6});
        ps.push_back(&x);
        Tensor<double> w = rnd({1, 5, 3, 3}, b->rng());
        check("module.conv_residual_block", ps, [blk, &x, w](bool grads) {
            G g;
            Id l = weighted_sum(g, blk->forward(g, g.param(x)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }
    // ---- residual transformer block (zero-initialized tables and exit conv
    //      re-randomized so their gradient paths are actually exercised) ----
    {
        auto b = builder(42);
        auto blk = std::make_shared<ResidualTransformerBlock<double>>(4, 2, 3, b->rng());
        std::vector<P*> ps;
        std::mt19937_64 rr(opts.seed + 99);
        blk->visit("rtb", [&](const std::string& n, P& p) {
            p.name = n;
            bool all_zero = true;
            for (std::int64_t i = 0; i < p.value.numel(); ++i) {
                if (p.value[i] != 0.0) {
                    all_zero = false;
                    break;
                }
            }
            if (all_zero) p.value = rnd(p.value.shape(), rr, -0.3, 0.3);
            ps.push_back(&p);
        });
        P& x = b->make("x", {1, 4, 5, 6});
        ps.push_back(&x);
        Tensor<double> w = rnd({1, 4, 5, 6}, b->rng());
        check("module.residual_transformer_block", ps, [blk, &x, w](bool grads) {
            G g;
            Id l = weighted_sum(g, blk->forward(g, g.param(x)), w);
            double v = g.val(l).value();
            if (grads) g.backward(l);
            return v;
        }, op_opts);
    }

    // ---- full toy network against the joint loss, sampled elements ----
    if (opts.include_model) {
        ModelConfig mc;
        mc.tr_depth = 2;
        mc.widths = {4, 8, 16, 32};
        mc.heads = 2;
        mc.span = 5;
        mc.input_h = 32;
        mc.input_w = 32;
        mc.body_edge = true;
        auto model = std::make_shared<MBTNet<double>>(mc, opts.seed + 1234);
        // keep the loss surface smooth: re-randomize zero-initialized
        // parameters (exit convs, relative tables) so no relu/max kink sits
        // exactly at the evaluation point
        std::mt19937_64 rr(opts.seed + 4321);
        for (auto* p : model->parameters()) {
            bool all_zero = true;
            for (std::int64_t i = 0; i < p->value.numel(); ++i) {
                if (p->value[i] != 0.0) {
                    all_zero = false;
                    break;
                }
            }
            if (all_zero) p->value = rnd(p->value.shape(), rr, -0.08, 0.08);
        }
        std::mt19937_64 drng(opts.seed + 5);
        Tensor<double> img = rnd({1, 1, 32, 32}, drng, 0.0, 1.0);
        MaskTriplet<double> tgt;
        tgt.final_mask = Tensor<double>(Shape{1, 1, 32, 32});
        tgt.edge_mask = Tensor<double>(Shape{1, 1, 32, 32});
        tgt.body_mask = Tensor<double>(Shape{1, 1, 32, 32});
        for (std::int64_t i = 0; i < tgt.final_mask.numel(); ++i) {
            tgt.final_mask[i] = (drng() % 2) ? 1.0 : 0.0;
            tgt.edge_mask[i] = (drng() % 2) ? 1.0 : 0.0;
            tgt.body_mask[i] = static_cast<double>(drng() % 1000) / 1000.0;
        }
        LossWeights lw;
        GradCheckOptions model_opts;
        model_opts.tolerance = opts.model_tolerance;
        model_opts.samples_per_param = opts.model_samples_per_param;
        model_opts.sample_seed = opts.seed + 77;
        check("model.joint_loss", model->parameters(), [model, img, tgt, lw](bool grads) {
            Graph<double> g;
            auto out = model->forward(g, g.constant(img));
            auto loss = joint_loss(g, out, tgt, lw);
            double v = g.val(loss.total).value();
            if (grads) g.backward(loss.total);
            return v;
        }, model_opts);
    }

    return results;
}

}  // namespace mbt
