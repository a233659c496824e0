// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "evgaze/ops.hpp"
#include "gradcheck.hpp"

#include <cmath>

using namespace evgaze;
using namespace evgaze::testutil;

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
    Tape<double> tape;
    Rng rng(1);
    Var<double> x = tape.constant(random_tensor(Shape{1, 3, 4, 5}, rng));
    Tensor<double> w(Shape{3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) w.at4(c, c, 0, 0) = 1.0;
    Var<double> y = conv2d(tape, x, tape.constant(w), tape.constant(Tensor<double>(Shape{3})), 1, 0);
    CHECK(tape.val(y).data == tape.val(x).data);
}

TEST_CASE("conv2d: all-ones 3x3 kernel on a one-hot input gives a 3x3 plateau") {
    Tape<double> tape;
    Tensor<double> x(Shape{1, 1, 7, 7});
    x.at4(0, 0, 3, 3) = 1.0;
    Var<double> y = conv2d(tape, tape.constant(x), tape.constant(Tensor<double>::full(Shape{1, 1, 3, 3}, 1.0)),
                           tape.constant(Tensor<double>(Shape{1})), 1, 1);
    const Tensor<double>& out = tape.val(y);
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c) {
            double expect = (std::abs(r - 3) <= 1 && std::abs(c - 3) <= 1) ? 1.0 : 0.0;
            CHECK(out.at4(0, 0, r, c) == expect);
        }
}

TEST_CASE("conv2d: output spatial formula") {
    Tape<double> tape;
    Rng rng(2);
    Var<double> x = tape.constant(random_tensor(Shape{2, 3, 11, 9}, rng));
    Var<double> w = tape.constant(random_tensor(Shape{4, 3, 3, 3}, rng));
    Var<double> b = tape.constant(random_tensor(Shape{4}, rng));
    Var<double> y = conv2d(tape, x, w, b, 2, 1);
    CHECK(tape.val(y).shape == Shape{2, 4, 6, 5});
}

TEST_CASE("conv2d: gradients match finite differences") {
    Rng rng(3);
    auto res = gradcheck({random_tensor(Shape{2, 2, 5, 4}, rng), random_tensor(Shape{3, 2, 3, 3}, rng),
                          random_tensor(Shape{3}, rng)},
                         [](Tape<double>& tp, const std::vector<Var<double>>& v) {
                             Var<double> y = conv2d(tp, v[0], v[1], v[2], 2, 1);
                             return sum_all(tp, mul(tp, y, y));
                         });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("linear: gradients match finite differences") {
    Rng rng(4);
    auto res = gradcheck({random_tensor(Shape{3, 6}, rng), random_tensor(Shape{4, 6}, rng), random_tensor(Shape{4}, rng)},
                         [](Tape<double>& tp, const std::vector<Var<double>>& v) {
                             Var<double> y = linear(tp, v[0], v[1], v[2]);
                             return sum_all(tp, mul(tp, y, sigmoid(tp, y)));
                         });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("maxpool2d: 4x4 ramp pools to each block's maximum") {
    Tape<double> tape;
    Tensor<double> x(Shape{1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) x.data[static_cast<std::size_t>(i)] = i;
    Var<double> y = maxpool2d(tape, tape.constant(x), 2);
    const Tensor<double>& out = tape.val(y);
    CHECK(out.shape == Shape{1, 1, 2, 2});
    CHECK(out.data[0] == 5.0);
    CHECK(out.data[1] == 7.0);
    CHECK(out.data[2] == 13.0);
    CHECK(out.data[3] == 15.0);
}

TEST_CASE("maxpool2d: gradients match finite differences") {
    Rng rng(5);
    auto res = gradcheck({random_tensor(Shape{2, 3, 6, 6}, rng)},
                         [](Tape<double>& tp, const std::vector<Var<double>>& v) {
                             Var<double> y = maxpool2d(tp, v[0], 2);
                             return sum_all(tp, mul(tp, y, y));
                         });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("batchnorm: zero-variance input maps to beta") {
    Tape<double> tape;
    Tensor<double> x = Tensor<double>::full(Shape{4, 3}, 2.5);
    Tensor<double> rm(Shape{3}), rv = Tensor<double>::full(Shape{3}, 1.0);
    Var<double> y = batchnorm(tape, tape.constant(x), tape.constant(Tensor<double>::full(Shape{3}, 1.0)),
                              tape.constant(Tensor<double>(Shape{3})), rm, rv, Mode::train, 1e-5, 0.1);
    for (double v : tape.val(y).data) CHECK(std::abs(v) < 1e-12);
    // Running stats pulled toward the batch.
    CHECK(rm.data[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(rv.data[0] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("batchnorm: train-mode gradients match finite differences (4-D and 2-D)") {
    Rng rng(6);
    auto run = [&](Shape xs, int c) {
        return gradcheck({random_tensor(xs, rng), random_tensor(Shape{c}, rng, 0.5), random_tensor(Shape{c}, rng)},
                         [](Tape<double>& tp, const std::vector<Var<double>>& v) {
                             Tensor<double> rm(tp.val(v[1]).shape);
                             Tensor<double> rv = Tensor<double>::full(tp.val(v[1]).shape, 1.0);
                             Var<double> y = batchnorm(tp, v[0], v[1], v[2], rm, rv, Mode::train, 1e-5, 0.1);
                             return sum_all(tp, mul(tp, y, sigmoid(tp, y)));
                         });
    };
    CHECK(run(Shape{2, 3, 4, 3}, 3).max_rel_err < 1e-6);
    CHECK(run(Shape{5, 4}, 4).max_rel_err < 1e-6);
}

TEST_CASE("batchnorm: eval mode uses running stats and is elementwise") {
    Tape<double> tape;
    Rng rng(7);
    Tensor<double> x = random_tensor(Shape{2, 3}, rng);
    Tensor<double> rm = Tensor<double>::full(Shape{3}, 0.5);
    Tensor<double> rv = Tensor<double>::full(Shape{3}, 4.0);
    Var<double> y = batchnorm(tape, tape.constant(x), tape.constant(Tensor<double>::full(Shape{3}, 2.0)),
                              tape.constant(Tensor<double>::full(Shape{3}, 1.0)), rm, rv, Mode::eval, 0.0, 0.1);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            CHECK(tape.val(y).at2(n, c) == doctest::Approx(2.0 * (x.at2(n, c) - 0.5) / 2.0 + 1.0).epsilon(1e-12));
    CHECK(rm.data[0] == 0.5);  // eval never touches running stats
}

TEST_CASE("dropout: rate 0 is the identity in both modes") {
    Tape<double> tape;
    Rng rng(8);
    Tensor<double> x = random_tensor(Shape{3, 5}, rng);
    Var<double> a = dropout(tape, tape.constant(x), 0.0, Mode::train, 1, 2);
    Var<double> b = dropout(tape, tape.constant(x), 0.0, Mode::eval, 1, 2);
    CHECK(tape.val(a).data == x.data);
    CHECK(tape.val(b).data == x.data);
    CHECK_THROWS_AS(dropout(tape, a, 1.0, Mode::train, 1, 2), ConfigError);
}

TEST_CASE("dropout: eval is identity, train scales survivors and is nonce-stable") {
    Tape<double> tape;
    Tensor<double> x = Tensor<double>::full(Shape{1, 1000}, 1.0);
    Var<double> xa = tape.constant(x);
    Var<double> a = dropout(tape, xa, 0.4, Mode::train, 7, 3);
    Var<double> b = dropout(tape, xa, 0.4, Mode::train, 7, 3);
    CHECK(tape.val(a).data == tape.val(b).data);  // same (seed, nonce) -> same mask
    int kept = 0;
    for (double v : tape.val(a).data) {
        if (v != 0.0) {
            CHECK(v == doctest::Approx(1.0 / 0.6).epsilon(1e-12));
            ++kept;
        }
    }
    CHECK(kept > 480);
    CHECK(kept < 720);
    Var<double> c = dropout(tape, xa, 0.4, Mode::train, 7, 4);
    CHECK(tape.val(c).data != tape.val(a).data);
}

TEST_CASE("spike: heaviside forward, gaussian surrogate backward") {
    Tape<double> tape;
    Tensor<double> d(Shape{3});
    d.data = {0.3, -0.3, 0.0};
    SurrogateConfig<double> sg;  // sigma 0.5, scale 1
    Var<double> dv = tape.leaf(d, true);
    Var<double> s = spike(tape, dv, sg);
    CHECK(tape.val(s).data == std::vector<double>{1.0, 0.0, 1.0});
    Var<double> loss = sum_all(tape, s);
    tape.backward(loss);
    Tensor<double> g = tape.grad_or_zero(dv);
    // Gaussian pdf at 0 with sigma 0.5: 1/sqrt(2 pi 0.25) = 0.7978845608...
    CHECK(g.data[2] == doctest::Approx(1.0 / std::sqrt(2.0 * 3.14159265358979323846 * 0.25)).epsilon(1e-12));
    CHECK(g.data[0] == doctest::Approx(g.data[2] * std::exp(-0.5 * (0.3 / 0.5) * (0.3 / 0.5))).epsilon(1e-12));
    CHECK(g.data[0] == g.data[1]);  // symmetric around the threshold
}

TEST_CASE("spike: surrogate scale 0 zeroes the backward but not the forward") {
    Tape<double> tape;
    SurrogateConfig<double> sg;
    sg.scale = 0.0;
    Tensor<double> d(Shape{2});
    d.data = {0.2, -0.2};
    Var<double> dv = tape.leaf(d, true);
    Var<double> s = spike(tape, dv, sg);
    CHECK(tape.val(s).data == std::vector<double>{1.0, 0.0});
    tape.backward(sum_all(tape, s));
    Tensor<double> g = tape.grad_or_zero(dv);
    CHECK(g.data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("spike: smooth twin matches the analytic surrogate via finite differences") {
    Rng rng(9);
    SurrogateConfig<double> sg;
    sg.smooth_twin = true;
    auto res = gradcheck({random_tensor(Shape{2, 6}, rng)},
                         [sg](Tape<double>& tp, const std::vector<Var<double>>& v) {
                             Var<double> s = spike(tp, v[0], sg);
                             return sum_all(tp, mul(tp, s, s));
                         });
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("elementwise and reduction ops: gradients match finite differences") {
    Rng rng(10);
    auto res = gradcheck(
        {random_tensor(Shape{3, 4}, rng), random_tensor(Shape{3, 4}, rng)},
        [](Tape<double>& tp, const std::vector<Var<double>>& v) {
            Var<double> a = mul(tp, sin_op(tp, v[0]), cos_op(tp, v[1]));
            Var<double> b = sub(tp, sigmoid(tp, v[0]), affine(tp, v[1], 0.3, -0.1));
            Var<double> c = concat_cols(tp, a, b);
            Var<double> d = slice_cols(tp, c, 1, 7);
            Var<double> e = row_mean(tp, mul(tp, d, d));
            return weighted_sum(tp, e, std::vector<double>{0.3, 1.2, -0.4});
        });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("broadcast_like: gradients match finite differences") {
    Rng rng(11);
    auto res = gradcheck({random_tensor(Shape{3}, rng), random_tensor(Shape{2, 3, 2, 2}, rng)},
                         [](Tape<double>& tp, const std::vector<Var<double>>& v) {
                             Var<double> b = broadcast_like(tp, v[0], tp.val(v[1]).shape);
                             return sum_all(tp, mul(tp, b, v[1]));
                         });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("backward: loss = sum(p) gives unit gradients") {
    Tape<double> tape;
    Param<double> p;
    p.value = Tensor<double>::full(Shape{2, 3}, 1.5);
    Var<double> pv = tape.use(p);
    tape.backward(sum_all(tape, pv));
    CHECK(p.grad.data == std::vector<double>(6, 1.0));
}

TEST_CASE("backward: loss = 0.5 ||p||^2 gives gradient p") {
    Tape<double> tape;
    Param<double> p;
    Rng rng(12);
    p.value = random_tensor(Shape{7}, rng);
    Var<double> pv = tape.use(p);
    tape.backward(affine(tape, sum_all(tape, mul(tape, pv, pv)), 0.5, 0.0));
    REQUIRE(p.grad.data.size() == 7);
    for (int i = 0; i < 7; ++i) CHECK(p.grad.data[static_cast<std::size_t>(i)] == doctest::Approx(p.value.data[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("backward: unreachable parameters keep zero gradients") {
    Tape<double> tape;
    Param<double> used, unused;
    used.value = Tensor<double>::full(Shape{2}, 1.0);
    unused.value = Tensor<double>::full(Shape{2}, 1.0);
    Var<double> uv = tape.use(used);
    tape.use(unused);
    tape.backward(sum_all(tape, uv));
    CHECK(used.grad.data == std::vector<double>{1.0, 1.0});
    CHECK(unused.grad.data.empty());  // empty means zero
}

TEST_CASE("backward: weight sharing accumulates across uses") {
    Tape<double> tape;
    Param<double> p;
    p.value = Tensor<double>::full(Shape{1}, 3.0);
    Var<double> a = tape.use(p);
    Var<double> b = tape.use(p);
    CHECK(a.id == b.id);  // same binding within a window
    tape.backward(mul(tape, a, b));  // d(p^2)/dp = 2p
    CHECK(p.grad.data[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("detach: values bit-identical, gradients cut") {
    Tape<double> tape;
    Param<double> p;
    p.value = Tensor<double>::full(Shape{3}, 2.0);
    Var<double> pv = tape.use(p);
    Var<double> h = mul(tape, pv, pv);
    Var<double> hd = tape.detach(h);
    CHECK(tape.val(hd).data == tape.val(h).data);
    tape.backward(sum_all(tape, hd));
    CHECK(p.grad.data.empty());  // nothing flows past the detach point
}

TEST_CASE("detach: truncated gradients equal the hand-derived chain rule") {
    // Scalar recurrence u_t = a u_{t-1} + b x_t, loss = u_2, u_0 constant.
    double a0 = 0.7, b0 = 1.3, u0 = 0.4, x1 = 0.9, x2 = -0.6;

    auto run = [&](bool detach_between) {
        Tape<double> tape;
        Param<double> a, b;
        a.value = Tensor<double>::full(Shape{1}, a0);
        b.value = Tensor<double>::full(Shape{1}, b0);
        Var<double> av = tape.use(a);
        Var<double> bv = tape.use(b);
        Var<double> u = tape.constant(Tensor<double>::full(Shape{1}, u0));
        Var<double> u1 = add(tape, mul(tape, av, u), affine(tape, bv, x1, 0.0));
        if (detach_between) u1 = tape.detach(u1);
        Var<double> u2 = add(tape, mul(tape, av, u1), affine(tape, bv, x2, 0.0));
        tape.backward(u2);
        return std::pair<double, double>{a.grad_or_zero().data[0], b.grad_or_zero().data[0]};
    };

    double u1_val = a0 * u0 + b0 * x1;
    auto full = run(false);
    CHECK(full.first == doctest::Approx(u1_val + a0 * u0).epsilon(1e-12));
    CHECK(full.second == doctest::Approx(x2 + a0 * x1).epsilon(1e-12));
    auto trunc = run(true);
    CHECK(trunc.first == doctest::Approx(u1_val).epsilon(1e-12));
    CHECK(trunc.second == doctest::Approx(x2).epsilon(1e-12));
}

TEST_CASE("tape: node count resets after detach boundaries") {
    Tape<double> tape;
    Param<double> p;
    p.value = Tensor<double>::full(Shape{4}, 0.5);
    Tensor<double> state = Tensor<double>::zeros(Shape{4});
    std::size_t first_window = 0;
    for (int window = 0; window < 5; ++window) {
        Var<double> sv = tape.constant(state);
        Var<double> pv = tape.use(p);
        for (int t = 0; t < 3; ++t) sv = sigmoid(tape, add(tape, sv, pv));
        tape.backward(sum_all(tape, sv));
        state = tape.val(sv);
        if (window == 0) first_window = tape.size();
        CHECK(tape.size() == first_window);
        tape.reset();
    }
    CHECK(tape.peak_nodes() == first_window);
}

TEST_CASE("tape: recording off computes values without backward connectivity") {
    Tape<double> tape;
    tape.set_recording(false);
    Param<double> p;
    p.value = Tensor<double>::full(Shape{2}, 1.0);
    Var<double> y = sigmoid(tape, tape.use(p));
    CHECK(tape.val(y).data[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(!tape.needs_grad(y));
}

TEST_CASE("tape: backward rejects non-scalar losses") {
    Tape<double> tape;
    Param<double> p;
    p.value = Tensor<double>::full(Shape{3}, 1.0);
    Var<double> pv = tape.use(p);
    CHECK_THROWS_AS(tape.backward(pv), ConfigError);
}
