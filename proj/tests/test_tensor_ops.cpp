// Tensor container contracts, forward oracles for every primitive op, and
// randomized finite-difference gradient checks including a negative control.

#include <doctest.h>

#include <cmath>
#include <random>

#include "mbt/gradcheck.hpp"
#include "mbt/graph.hpp"
#include "mbt/ops.hpp"

using namespace mbt;

namespace {

template <typename T>
Tensor<T> tensor_of(Shape shape, std::vector<T> v) {
    return Tensor<T>(std::move(shape), std::move(v));
}

// independent cross-correlation oracle: direct quadruple-nested loops
template <typename T>
Tensor<T> conv2d_oracle(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                        int pad) {
    int B = x.extent(0), Cin = x.extent(1), H = x.extent(2), W = x.extent(3);
    int Cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    int oh = (H + 2 * pad - kh) / stride + 1;
    int ow = (W + 2 * pad - kw) / stride + 1;
    Tensor<T> y(Shape{B, Cout, oh, ow});
    for (int n = 0; n < B; ++n)
        for (int oc = 0; oc < Cout; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = static_cast<double>(b[oc]);
                    for (int ic = 0; ic < Cin; ++ic)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                int iy = oy * stride - pad + ky;
                                int ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += static_cast<double>(x.at(n, ic, iy, ix)) *
                                       static_cast<double>(w.at(oc, ic, ky, kx));
                            }
                    y.at(n, oc, oy, ox) = static_cast<T>(acc);
                }
    return y;
}

}  // namespace

TEST_CASE("tensor shape validation and element access") {
    CHECK_THROWS_AS(Tensor<float>(Shape{2, 0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor<float>(Shape{1, 1, 1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor<float>(Shape{2}, std::vector<float>{1, 2, 3}), std::invalid_argument);

    Tensor<float> t(Shape{2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    CHECK(t.rank() == 2);
    CHECK(t.numel() == 6);
    CHECK(t.at(1, 2) == 6.0f);
    CHECK_THROWS_AS(t.value(), std::logic_error);
    CHECK(Tensor<float>::scalar(4.5f).value() == 4.5f);

    Tensor<float> u(Shape{1, 2, 2, 3});
    u.at(0, 1, 1, 2) = 9.0f;
    CHECK(u[u.index4(0, 1, 1, 2)] == 9.0f);
}

TEST_CASE("graph: backward validates scalar loss and accumulates fan-out") {
    Graph<double> g;
    Parameter<double> p{"p", Tensor<double>(Shape{2}, std::vector<double>{3.0, -1.0})};
    auto x = g.param(p);
    CHECK_THROWS_AS(g.backward(x), std::exception);  // non-scalar loss

    // y = sum(x + x) -> dy/dx = 2 through both fan-out paths
    auto y = ops::sum(g, ops::add(g, x, x));
    p.zero_grad();
    g.backward(y);
    CHECK(p.grad[0] == doctest::Approx(2.0));
    CHECK(p.grad[1] == doctest::Approx(2.0));
}

TEST_CASE("graph: param leaves copy values; later edits don't alias") {
    Graph<float> g;
    Parameter<float> p{"p", Tensor<float>(Shape{1}, std::vector<float>{5.0f})};
    auto x = g.param(p);
    p.value[0] = 99.0f;
    CHECK(g.val(x)[0] == 5.0f);
}

TEST_CASE("elementwise ops: forward values") {
    Graph<float> g;
    auto a = g.constant(tensor_of<float>(Shape{3}, {1, -2, 3}));
    auto b = g.constant(tensor_of<float>(Shape{3}, {4, 5, -6}));
    CHECK(g.val(ops::add(g, a, b)).vec() == std::vector<float>{5, 3, -3});
    CHECK(g.val(ops::sub(g, a, b)).vec() == std::vector<float>{-3, -7, 9});
    CHECK(g.val(ops::mul(g, a, b)).vec() == std::vector<float>{4, -10, -18});
    CHECK(g.val(ops::scale(g, a, 2.0f)).vec() == std::vector<float>{2, -4, 6});

    auto mismatched = g.constant(Tensor<float>(Shape{2}));
    CHECK_THROWS_AS(ops::add(g, a, mismatched), std::invalid_argument);
}

TEST_CASE("relu: zero subgradient exactly at zero") {
    Graph<double> g;
    Parameter<double> p{"p", tensor_of<double>(Shape{3}, {-1.0, 0.0, 2.0})};
    auto y = ops::relu(g, g.param(p));
    CHECK(g.val(y).vec() == std::vector<double>{0.0, 0.0, 2.0});
    p.zero_grad();
    g.backward(ops::sum(g, y));
    CHECK(p.grad.vec() == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("sigmoid: closed-form points") {
    Graph<double> g;
    auto x = g.constant(tensor_of<double>(Shape{3}, {0.0, std::log(3.0), -std::log(3.0)}));
    auto y = ops::sigmoid(g, x);
    CHECK(g.val(y)[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g.val(y)[1] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(g.val(y)[2] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("max3: elementwise max with first-wins subgradient on ties") {
    Graph<double> g;
    Parameter<double> pa{"a", tensor_of<double>(Shape{2}, {2.0, 5.0})};
    Parameter<double> pb{"b", tensor_of<double>(Shape{2}, {2.0, 1.0})};
    Parameter<double> pc{"c", tensor_of<double>(Shape{2}, {0.0, 5.0})};
    auto m = ops::max3(g, g.param(pa), g.param(pb), g.param(pc));
    CHECK(g.val(m).vec() == std::vector<double>{2.0, 5.0});
    pa.zero_grad();
    pb.zero_grad();
    pc.zero_grad();
    g.backward(ops::sum(g, m));
    CHECK(pa.grad.vec() == std::vector<double>{1.0, 1.0});  // ties go to the first input
    CHECK(pb.grad.vec() == std::vector<double>{0.0, 0.0});
    CHECK(pc.grad.vec() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("max_many dominates every input elementwise") {
    std::mt19937_64 rng(4);
    Graph<float> g;
    std::vector<ops::Id<float>> ids;
    std::vector<Tensor<float>> vals;
    for (int i = 0; i < 4; ++i) {
        vals.push_back(Tensor<float>::uniform(Shape{2, 3}, rng, -1.0f, 1.0f));
        ids.push_back(g.constant(vals.back()));
    }
    const auto& m = g.val(ops::max_many(g, ids));
    for (std::int64_t i = 0; i < m.numel(); ++i) {
        float expected = vals[0][i];
        for (int k = 1; k < 4; ++k) expected = std::max(expected, vals[k][i]);
        CHECK(m[i] == expected);
        for (int k = 0; k < 4; ++k) CHECK(m[i] >= vals[k][i]);
    }
}

TEST_CASE("concat_channels: layout and backward split") {
    Graph<double> g;
    Parameter<double> pa{"a", tensor_of<double>(Shape{1, 1, 1, 2}, {1, 2})};
    Parameter<double> pb{"b", tensor_of<double>(Shape{1, 2, 1, 2}, {3, 4, 5, 6})};
    auto c = ops::concat_channels(g, {g.param(pa), g.param(pb)});
    CHECK(g.val(c).shape() == Shape{1, 3, 1, 2});
    CHECK(g.val(c).vec() == std::vector<double>{1, 2, 3, 4, 5, 6});

    // weight the summed output so each slot gets a distinct gradient
    auto w = g.constant(tensor_of<double>(Shape{1, 3, 1, 2}, {10, 20, 30, 40, 50, 60}));
    pa.zero_grad();
    pb.zero_grad();
    g.backward(ops::sum(g, ops::mul(g, c, w)));
    CHECK(pa.grad.vec() == std::vector<double>{10, 20});
    CHECK(pb.grad.vec() == std::vector<double>{30, 40, 50, 60});

    auto bad = g.constant(Tensor<double>(Shape{1, 1, 2, 2}));
    CHECK_THROWS_AS(ops::concat_channels(g, {g.param(pa), bad}), std::invalid_argument);
}

TEST_CASE("sum and mean") {
    Graph<double> g;
    Parameter<double> p{"p", tensor_of<double>(Shape{4}, {1, 2, 3, 4})};
    auto x = g.param(p);
    CHECK(g.val(ops::sum(g, x)).value() == 10.0);
    CHECK(g.val(ops::mean(g, x)).value() == doctest::Approx(2.5).epsilon(1e-15));
    p.zero_grad();
    g.backward(ops::mean(g, x));
    for (int i = 0; i < 4; ++i) CHECK(p.grad[i] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("matmul: hand-checked product") {
    Graph<double> g;
    auto a = g.constant(tensor_of<double>(Shape{2, 3}, {1, 2, 3, 4, 5, 6}));
    auto b = g.constant(tensor_of<double>(Shape{3, 2}, {7, 8, 9, 10, 11, 12}));
    CHECK(g.val(ops::matmul(g, a, b)).vec() == std::vector<double>{58, 64, 139, 154});
    auto bad = g.constant(Tensor<double>(Shape{4, 2}));
    CHECK_THROWS_AS(ops::matmul(g, a, bad), std::invalid_argument);
}

TEST_CASE("softmax: frozen oracle and normalization") {
    Graph<double> g;
    auto x = g.constant(tensor_of<double>(Shape{3}, {1, 2, 3}));
    const auto& y = g.val(ops::softmax(g, x, 0));
    // exp(1..3)/sum, evaluated independently at high precision
    CHECK(y[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(0.24472847105479764).epsilon(1e-12));
    CHECK(y[2] == doctest::Approx(0.66524095577482190).epsilon(1e-12));

    // rows of a rank-2 softmax along axis 1 each sum to one; shifted logits
    // give identical probabilities (max-subtraction stability)
    std::mt19937_64 rng(9);
    Tensor<double> r = Tensor<double>::uniform(Shape{4, 5}, rng, -3.0, 3.0);
    Tensor<double> shifted = r;
    for (std::int64_t i = 0; i < shifted.numel(); ++i) shifted[i] += 1000.0;
    const auto& p1 = g.val(ops::softmax(g, g.constant(r), 1));
    const auto& p2 = g.val(ops::softmax(g, g.constant(shifted), 1));
    for (int i = 0; i < 4; ++i) {
        double row = 0;
        for (int j = 0; j < 5; ++j) {
            row += p1.at(i, j);
            CHECK(p1.at(i, j) == doctest::Approx(p2.at(i, j)).epsilon(1e-12));
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("conv2d: matches the naive quadruple-loop oracle") {
    std::mt19937_64 rng(21);
    struct Cfg {
        int B, Cin, H, W, Cout, k, stride, pad;
    };
    // includes the 2x3x8x8 / 4x3x3x3 stride-2 pad-1 reference configuration
    for (Cfg c : {Cfg{2, 3, 8, 8, 4, 3, 2, 1}, Cfg{1, 2, 7, 5, 3, 3, 1, 1},
                  Cfg{1, 4, 6, 6, 2, 1, 1, 0}, Cfg{2, 1, 9, 9, 2, 5, 2, 2},
                  Cfg{1, 3, 4, 4, 3, 3, 1, 0}}) {
        Tensor<float> x = Tensor<float>::uniform(Shape{c.B, c.Cin, c.H, c.W}, rng, -1.0f, 1.0f);
        Tensor<float> w =
            Tensor<float>::uniform(Shape{c.Cout, c.Cin, c.k, c.k}, rng, -1.0f, 1.0f);
        Tensor<float> b = Tensor<float>::uniform(Shape{c.Cout}, rng, -0.5f, 0.5f);
        Graph<float> g;
        const auto& y =
            g.val(ops::conv2d(g, g.constant(x), g.constant(w), g.constant(b), c.stride, c.pad));
        Tensor<float> ref = conv2d_oracle(x, w, b, c.stride, c.pad);
        REQUIRE(y.shape() == ref.shape());
        for (std::int64_t i = 0; i < y.numel(); ++i) {
            CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("conv2d: shape validation") {
    Graph<float> g;
    auto x = g.constant(Tensor<float>(Shape{1, 3, 8, 8}));
    auto w = g.constant(Tensor<float>(Shape{4, 2, 3, 3}));  // cin mismatch
    auto b = g.constant(Tensor<float>(Shape{4}));
    CHECK_THROWS_AS(ops::conv2d(g, x, w, b, 1, 1), std::invalid_argument);
    auto w2 = g.constant(Tensor<float>(Shape{4, 3, 3, 3}));
    auto b2 = g.constant(Tensor<float>(Shape{3}));  // bias/cout mismatch
    CHECK_THROWS_AS(ops::conv2d(g, x, w2, b2, 1, 1), std::invalid_argument);
}

TEST_CASE("instance_norm: matches a direct per-channel formula") {
    std::mt19937_64 rng(13);
    Tensor<double> x = Tensor<double>::uniform(Shape{2, 3, 4, 5}, rng, -2.0, 2.0);
    Tensor<double> scale = Tensor<double>::uniform(Shape{3}, rng, 0.5, 1.5);
    Tensor<double> shift = Tensor<double>::uniform(Shape{3}, rng, -0.5, 0.5);
    Graph<double> g;
    const auto& y =
        g.val(ops::instance_norm(g, g.constant(x), g.constant(scale), g.constant(shift)));
    const double eps = 1e-5;
    for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 3; ++c) {
            double m = 0, n = 4.0 * 5.0;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 5; ++j) m += x.at(b, c, i, j);
            m /= n;
            double var = 0;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 5; ++j) var += (x.at(b, c, i, j) - m) * (x.at(b, c, i, j) - m);
            var /= n;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 5; ++j) {
                    double expect =
                        scale[c] * (x.at(b, c, i, j) - m) / std::sqrt(var + eps) + shift[c];
                    CHECK(y.at(b, c, i, j) == doctest::Approx(expect).epsilon(1e-10));
                }
        }
}

TEST_CASE("upsample_bilinear2x: closed-form 2x2 -> 4x4") {
    Graph<double> g;
    auto x = g.constant(tensor_of<double>(Shape{1, 1, 2, 2}, {1, 2, 3, 4}));
    const auto& y = g.val(ops::upsample_bilinear2x(g, x));
    REQUIRE(y.shape() == Shape{1, 1, 4, 4});
    // half-pixel-centers interpolation with edge clamping, derived by hand
    std::vector<double> expect = {1.0, 1.25, 1.75, 2.0,  1.5, 1.75, 2.25, 2.5,
                                  2.5, 2.75, 3.25, 3.5,  3.0, 3.25, 3.75, 4.0};
    for (std::int64_t i = 0; i < 16; ++i) CHECK(y[i] == doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("bce_with_logits: stable closed-form values") {
    Graph<double> g;
    const double ln2 = 0.6931471805599453;

    // logit 0 costs ln 2 regardless of the target
    auto z0 = g.constant(Tensor<double>(Shape{4}));
    Tensor<double> t0(Shape{4}, std::vector<double>{0, 1, 1, 0});
    CHECK(g.val(ops::bce_with_logits(g, z0, t0)).value() == doctest::Approx(ln2).epsilon(1e-12));

    // saturated correct prediction: logits +20 on target 1 -> < 1e-8
    auto z1 = g.constant(Tensor<double>::full(Shape{3}, 20.0));
    Tensor<double> t1 = Tensor<double>::full(Shape{3}, 1.0);
    CHECK(g.val(ops::bce_with_logits(g, z1, t1)).value() < 1e-8);

    // extreme logits stay finite in the stable form
    auto z2 = g.constant(tensor_of<double>(Shape{2}, {30.0, -30.0}));
    Tensor<double> t2(Shape{2}, std::vector<double>{0.0, 1.0});
    CHECK(g.val(ops::bce_with_logits(g, z2, t2)).value() == doctest::Approx(30.0).epsilon(1e-9));

    // ln(4/3) point: sigmoid(ln 3) = 0.75 against target 1
    auto z3 = g.constant(Tensor<double>::full(Shape{1}, std::log(3.0)));
    Tensor<double> t3 = Tensor<double>::full(Shape{1}, 1.0);
    CHECK(g.val(ops::bce_with_logits(g, z3, t3)).value() ==
          doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));

    // non-finite logits are rejected
    auto znan = g.constant(tensor_of<double>(Shape{2}, {0.0, std::nan("")}));
    Tensor<double> tz(Shape{2}, std::vector<double>{0.0, 1.0});
    CHECK_THROWS_AS(ops::bce_with_logits(g, znan, tz), std::runtime_error);
}

TEST_CASE("randomized gradient checks across seeds") {
    // ten independent seeds over the trickiest ops, full central differences
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed * 101 + 5);
        Parameter<double> x{"x", Tensor<double>::uniform(Shape{1, 2, 5, 4}, rng, -1.0, 1.0)};
        Parameter<double> w{"w", Tensor<double>::uniform(Shape{3, 2, 3, 3}, rng, -0.8, 0.8)};
        Parameter<double> b{"b", Tensor<double>::uniform(Shape{3}, rng, -0.3, 0.3)};
        Parameter<double> sc{"sc", Tensor<double>::uniform(Shape{3}, rng, 0.6, 1.4)};
        Parameter<double> sh{"sh", Tensor<double>::uniform(Shape{3}, rng, -0.4, 0.4)};
        Tensor<double> mix = Tensor<double>::uniform(Shape{1, 3, 3, 2}, rng, -1.0, 1.0);

        auto loss = [&](bool with_grads) {
            Graph<double> g;
            auto h = ops::conv2d(g, g.param(x), g.param(w), g.param(b), 2, 1);
            h = ops::instance_norm(g, h, g.param(sc), g.param(sh));
            h = ops::softmax(g, h, 1);
            auto l = ops::sum(g, ops::mul(g, h, g.constant(mix)));
            double v = g.val(l).value();
            if (with_grads) g.backward(l);
            return v;
        };
        auto res = check_gradients("conv-norm-softmax", {&x, &w, &b, &sc, &sh}, loss);
        CAPTURE(seed);
        CAPTURE(res.message);
        CAPTURE(res.worst.param);
        CHECK(res.pass);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("gradient checker negative control: corrupted backward must fail") {
    std::mt19937_64 rng(3);
    Parameter<double> p{"broken", Tensor<double>::uniform(Shape{4}, rng, 0.5, 1.5)};
    auto loss = [&](bool with_grads) {
        Graph<double> g;
        auto x = g.param(p);
        // y = x*x with a deliberately wrong backward: 3x instead of 2x
        const auto& xv = g.val(x);
        Tensor<double> yv = xv;
        for (std::int64_t i = 0; i < yv.numel(); ++i) yv[i] = xv[i] * xv[i];
        auto y = g.emit(std::move(yv), {x}, [](Graph<double>& gg, int self) {
            const auto& go = gg.grad(self);
            const auto& xin = gg.val(gg.inputs(self)[0]);
            auto& gx = gg.grad(gg.inputs(self)[0]);  // touching the slot marks it reachable
            for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += 3.0 * xin[i] * go[i];
        });
        auto l = ops::sum(g, y);
        double v = g.val(l).value();
        if (with_grads) g.backward(l);
        return v;
    };
    auto res = check_gradients("negative-control", {&p}, loss);
    CHECK_FALSE(res.pass);             // the checker must catch the corruption
    CHECK(res.worst.param == "broken");
    CHECK(res.max_rel_err > 0.1);      // 3x vs 2x is a ~50% relative error
}
