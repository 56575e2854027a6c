#include <doctest.h>

#include <cmath>
#include <vector>

#include "dimml/errors.hpp"
#include "dimml/fdcheck.hpp"
#include "dimml/rng.hpp"
#include "dimml/tape.hpp"
#include "dimml/tensor.hpp"

using namespace dimml;

TEST_CASE("softmax matches closed forms") {
    Tensor unif = softmax(Tensor::from({2}, {0.0, 0.0}));
    CHECK(unif[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(unif[1] == doctest::Approx(0.5).epsilon(1e-14));

    Tensor triple = softmax(Tensor::from({3}, {std::log(3.0), 0.0, 0.0}));
    CHECK(triple[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(triple[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(triple[2] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax is stable at extreme magnitudes") {
    Tensor hot = softmax(Tensor::from({2}, {1000.0, 0.0}));
    CHECK(hot.all_finite());
    CHECK(hot[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(hot[1] == doctest::Approx(0.0).epsilon(1e-15));

    Rng rng(7);
    Tensor wide = Tensor::zeros({8, 5});
    for (std::size_t i = 0; i < wide.numel(); ++i) {
        wide[i] = (rng.uniform() * 2.0 - 1.0) * 1e4;
    }
    Tensor p = softmax(wide);
    CHECK(p.all_finite());
    for (int r = 0; r < 8; ++r) {
        double s = 0.0;
        for (int c = 0; c < 5; ++c) {
            CHECK(p.at(r, c) >= 0.0);
            s += p.at(r, c);
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax rejects empty input") {
    CHECK_THROWS_AS(softmax(Tensor{}), validation_error);
    CHECK_THROWS_AS(log_softmax(Tensor{}), validation_error);
}

TEST_CASE("tensor constructors enforce invariants") {
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), validation_error);
    CHECK_THROWS_AS(Tensor::zeros({0}), validation_error);
    CHECK_THROWS_AS(Tensor::zeros({3, -1}), validation_error);
    CHECK_THROWS_AS(Tensor::zeros({2, 2}).value(), validation_error);
    CHECK(Tensor::scalar(4.0).value() == 4.0);
    CHECK(Tensor::identity(2).at(0, 1) == 0.0);
}

TEST_CASE("backward of a plain sum is all ones") {
    Tape t;
    Var p = t.leaf(Tensor::from({2, 3}, {1, -2, 3, 4, -5, 6}));
    Var loss = t.sum_all(p);
    GradMap g = t.backward(loss);
    Tensor gp = g.grad(p);
    REQUIRE(gp.same_shape(p.value));
    for (std::size_t i = 0; i < gp.numel(); ++i) CHECK(gp[i] == 1.0);
}

TEST_CASE("cross entropy gradient vanishes at a saturated correct logit") {
    // softmax([1000, 0]) puts all mass on class 0, so p_y - 1 = 0 exactly.
    Tape t;
    Var z = t.leaf(Tensor::from({1, 2}, {1000.0, 0.0}));
    Var nll = t.select_labels(t.log_softmax(z), {0});
    Var loss = t.scale(t.sum_all(nll), -1.0);
    CHECK(loss.value.value() == doctest::Approx(0.0).epsilon(1e-15));
    Tensor gz = t.backward(loss).grad(z);
    CHECK(gz.at(0, 0) == 0.0);
    CHECK(gz.at(0, 1) == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Tape t;
    Var p = t.leaf(Tensor::from({3}, {1, 2, 3}));
    Var doubled = t.scale(p, 2.0);
    CHECK_THROWS_AS(t.backward(doubled), validation_error);
}

TEST_CASE("untouched and stop-gradient leaves read back as exact zeros") {
    Tape t;
    Var p = t.leaf(Tensor::from({2, 2}, {1, 2, 3, 4}));
    Var q = t.leaf(Tensor::from({3}, {5, 6, 7}));
    GradMap g = t.backward(t.sum_all(p));
    CHECK_FALSE(g.has(q));
    Tensor gq = g.grad(q);
    REQUIRE(gq.same_shape(q.value));
    for (std::size_t i = 0; i < gq.numel(); ++i) CHECK(gq[i] == 0.0);

    // A fully constant loss records nothing; every leaf reads back zero.
    Tape t2;
    Var r = t2.leaf(Tensor::scalar(3.0));
    GradMap g2 = t2.backward(Tape::constant(Tensor::scalar(5.0)));
    CHECK_FALSE(g2.has(r));
    CHECK(g2.grad(r).value() == 0.0);

    // stop_gradient cuts the path entirely.
    Tape t3;
    Var s = t3.leaf(Tensor::from({2}, {1.0, 2.0}));
    Var frozen = t3.stop_gradient(s);
    Var mixed = t3.sum_all(t3.mul(t3.constant(Tensor::from({2}, {10.0, 10.0})), frozen));
    GradMap g3 = t3.backward(t3.add(mixed, t3.sum_all(s)));
    Tensor gs = g3.grad(s);
    CHECK(gs[0] == 1.0);
    CHECK(gs[1] == 1.0);
}

namespace {

Tensor randn(Rng& rng, std::vector<int> shape, double scl) {
    Tensor out = Tensor::zeros(std::move(shape));
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = rng.normal() * scl;
    return out;
}

}  // namespace

TEST_CASE("two-layer network gradients match finite differences") {
    constexpr int kSeeds = 24;
    constexpr int B = 4, din = 5, hid = 6, K = 3;
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(mix_seed(1234, static_cast<std::uint64_t>(seed)));
        Tensor x = randn(rng, {B, din}, 1.0);
        std::vector<int> labels(B);
        for (int j = 0; j < B; ++j) labels[j] = rng.uniform_int(K);
        std::vector<Tensor> params = {
            randn(rng, {din, hid}, 0.5),
            randn(rng, {hid}, 0.1),
            randn(rng, {hid, K}, 0.5),
            randn(rng, {K}, 0.1),
        };
        auto build = [&](Tape& t, const std::vector<Var>& p) {
            Var h = t.relu(t.add_rowvec(t.matmul(Tape::constant(x), p[0]), p[1]));
            Var z = t.add_rowvec(t.matmul(h, p[2]), p[3]);
            Var nll = t.select_labels(t.log_softmax(z), labels);
            return t.scale(t.sum_all(nll), -1.0 / B);
        };
        double err = finite_difference_check(build, params);
        CAPTURE(seed);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("tape ops beyond the dense path match finite differences") {
    Rng rng(99);
    Tensor a0 = randn(rng, {3, 4}, 1.0);
    Tensor b0 = randn(rng, {5, 4}, 1.0);

    SUBCASE("pairwise distance") {
        auto build = [](Tape& t, const std::vector<Var>& p) {
            return t.mean_all(t.pairwise_dist(p[0], p[1]));
        };
        CHECK(finite_difference_check(build, {a0, b0}) < 1e-4);
    }
    SUBCASE("column selection and concatenation") {
        auto build = [](Tape& t, const std::vector<Var>& p) {
            Var left = t.select_cols(p[0], {0, 2});
            Var right = t.select_cols(p[0], {3, 1});
            return t.sum_all(t.mul(t.concat_cols({left, right}), t.concat_cols({left, right})));
        };
        CHECK(finite_difference_check(build, {a0}) < 1e-4);
    }
    SUBCASE("transpose and diagonal") {
        auto build = [](Tape& t, const std::vector<Var>& p) {
            Var sq = t.matmul(p[0], t.transpose(p[0]));
            return t.sum_all(t.diag(sq));
        };
        CHECK(finite_difference_check(build, {a0}) < 1e-4);
    }
}

TEST_CASE("finite difference harness on closed forms") {
    auto square = [](Tape& t, const std::vector<Var>& p) { return t.mul(p[0], p[1 - 1]); };
    CHECK(finite_difference_check(square, {Tensor::scalar(3.0)}) < 1e-9);

    // Analytic gradient of p^2 at 3 is 6.
    Tape t;
    Var p = t.leaf(Tensor::scalar(3.0));
    Tensor gp = t.backward(t.mul(p, p)).grad(p);
    CHECK(gp.value() == doctest::Approx(6.0).epsilon(1e-12));

    auto flat = [](Tape&, const std::vector<Var>&) {
        return Tape::constant(Tensor::scalar(5.0));
    };
    CHECK(finite_difference_check(flat, {Tensor::scalar(1.0)}) == 0.0);

    CHECK_THROWS_AS(finite_difference_check(flat, {Tensor::scalar(1.0)}, 0.0), validation_error);
    auto inf = [](Tape&, const std::vector<Var>&) {
        return Tape::constant(Tensor::scalar(1.0 / 0.0));
    };
    CHECK_THROWS_AS(finite_difference_check(inf, {Tensor::scalar(1.0)}), numeric_error);
}

TEST_CASE("rng streams are deterministic and decorrelated") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

    Rng c(mix_seed(42, 1)), d(mix_seed(42, 2));
    int same = 0;
    for (int i = 0; i < 100; ++i) {
        if (c.uniform() == d.uniform()) ++same;
    }
    CHECK(same == 0);

    // Identical tape replays produce bitwise-identical gradients.
    Rng rng(5);
    Tensor w = randn(rng, {4, 4}, 1.0);
    auto run = [&]() {
        Tape t;
        Var p = t.leaf(w);
        Var loss = t.mean_all(t.relu(t.matmul(p, p)));
        return t.backward(loss).grad(p);
    };
    Tensor g1 = run(), g2 = run();
    for (std::size_t i = 0; i < g1.numel(); ++i) CHECK(g1[i] == g2[i]);
}
