#include <doctest.h>

#include <cmath>

#include "dimml/errors.hpp"
#include "dimml/inference.hpp"
#include "dimml/rng.hpp"

using namespace dimml;

namespace {

// A two-modality model whose features equal its inputs and whose heads
// read off the first K feature dims, so predictions are hand-checkable.
ModelState readout_model(int k) {
    ModelState m;
    m.num_modalities = 2;
    m.num_classes = k;
    m.feature_dim = k;
    for (int i = 0; i < 2; ++i) {
        EncoderParams enc;
        enc.layers.push_back({Tensor::identity(k), Tensor::zeros({k})});
        m.encoders.push_back(enc);
        m.uni_heads.push_back({Tensor::identity(k), Tensor::zeros({k})});
    }
    m.shared_head = {Tensor::identity(k), Tensor::zeros({k})};
    Tensor stacked = Tensor::zeros({2 * k, k});
    for (int c = 0; c < k; ++c) {
        stacked.at(c, c) = 1.0;
        stacked.at(k + c, c) = 1.0;
    }
    m.fusion_head = {stacked, Tensor::zeros({k})};
    return m;
}

Dataset onehot_dataset(int n, int k, double gain) {
    Dataset ds;
    ds.inputs = {Tensor::zeros({n, k}), Tensor::zeros({n, k})};
    for (int j = 0; j < n; ++j) {
        int y = j % k;
        ds.labels.push_back(y);
        ds.inputs[0].at(j, y) = gain;
        ds.inputs[1].at(j, y) = gain;
    }
    return ds;
}

}  // namespace

TEST_CASE("certainty matches closed forms and respects its bounds") {
    Tensor uniform = certainty(Tensor::zeros({2, 5}));
    CHECK(uniform[0] == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(uniform[1] == doctest::Approx(0.2).epsilon(1e-14));

    Tensor hot = certainty(Tensor::from({1, 3}, {1000.0, 0.0, 0.0}));
    CHECK(hot[0] == doctest::Approx(1.0).epsilon(1e-15));

    Tensor triple = certainty(Tensor::from({1, 3}, {std::log(3.0), 0.0, 0.0}));
    CHECK(triple[0] == doctest::Approx(0.6).epsilon(1e-12));

    Rng rng(12);
    Tensor z = Tensor::zeros({20, 4});
    for (std::size_t i = 0; i < z.numel(); ++i) z[i] = rng.normal() * 3.0;
    Tensor c = certainty(z);
    for (std::size_t j = 0; j < c.numel(); ++j) {
        CHECK(c[j] >= 0.25);
        CHECK(c[j] <= 1.0);
    }
}

TEST_CASE("weighted logits reduce to means and known softmax weights") {
    // Equal certainties: uniform weights, Z is the plain mean.
    Tensor za = Tensor::from({1, 2}, {2.0, 0.0});
    Tensor zb = Tensor::from({1, 2}, {0.0, 2.0});
    Tensor zc = Tensor::from({1, 2}, {2.0, 0.0});
    auto [z_eq, w_eq] = weighted_logits({za, zb, zc}, 1.0);
    for (const Tensor& w : w_eq) CHECK(w[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(z_eq.at(0, 0) == doctest::Approx((2.0 + 0.0 + 2.0) / 3).epsilon(1e-12));
    CHECK(z_eq.at(0, 1) == doctest::Approx((0.0 + 2.0 + 0.0) / 3).epsilon(1e-12));

    // Certainties (0.9, 0.5, 0.5) at T=1: w1 = e^0.9 / (e^0.9 + 2 e^0.5).
    Tensor s1 = Tensor::from({1, 2}, {std::log(9.0), 0.0});  // softmax (0.9, 0.1)
    Tensor s2 = Tensor::zeros({1, 2});                       // softmax (0.5, 0.5)
    Tensor s3 = Tensor::zeros({1, 2});
    auto [z_mix, w_mix] = weighted_logits({s1, s2, s3}, 1.0);
    CHECK(w_mix[0][0] == doctest::Approx(0.42723356033566029).epsilon(1e-12));
    CHECK(w_mix[1][0] == doctest::Approx((1.0 - 0.42723356033566029) / 2).epsilon(1e-12));

    // Huge temperature flattens the weights no matter the certainties.
    auto [z_flat, w_flat] = weighted_logits({s1, s2, s3}, 1e12);
    for (const Tensor& w : w_flat) CHECK(w[0] == doctest::Approx(1.0 / 3).epsilon(1e-9));

    // One source passes through untouched.
    auto [z_one, w_one] = weighted_logits({za}, 0.5);
    CHECK(w_one[0][0] == 1.0);
    CHECK(z_one.at(0, 0) == za.at(0, 0));
    CHECK(z_one.at(0, 1) == za.at(0, 1));

    CHECK_THROWS_AS(weighted_logits({}, 1.0), validation_error);
    CHECK_THROWS_AS(weighted_logits({za, Tensor::zeros({2, 2})}, 1.0), validation_error);
    CHECK_THROWS_AS(weighted_logits({za}, 0.0), validation_error);
}

TEST_CASE("weighted logits invariances") {
    Rng rng(404);
    const int b = 6, k = 4;
    std::vector<Tensor> sources;
    for (int s = 0; s < 3; ++s) {
        Tensor z = Tensor::zeros({b, k});
        for (std::size_t i = 0; i < z.numel(); ++i) z[i] = rng.normal() * 2.0;
        sources.push_back(std::move(z));
    }
    auto [z0, w0] = weighted_logits(sources, 0.7);

    // Per-sample weights sum to 1, each strictly inside (0, 1).
    for (int j = 0; j < b; ++j) {
        double sum = 0.0;
        for (const Tensor& w : w0) {
            CHECK(w[static_cast<std::size_t>(j)] > 0.0);
            CHECK(w[static_cast<std::size_t>(j)] < 1.0);
            sum += w[static_cast<std::size_t>(j)];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }

    // Permutation equivariance: swapping sources swaps their weights.
    auto [z1, w1] = weighted_logits({sources[1], sources[0], sources[2]}, 0.7);
    for (int j = 0; j < b; ++j) {
        CHECK(w1[0][static_cast<std::size_t>(j)] ==
              doctest::Approx(w0[1][static_cast<std::size_t>(j)]).epsilon(1e-14));
        CHECK(w1[1][static_cast<std::size_t>(j)] ==
              doctest::Approx(w0[0][static_cast<std::size_t>(j)]).epsilon(1e-14));
    }

    // Raising one source's certainty with the others fixed raises its
    // weight strictly.
    Tensor sharper = sources[0];
    for (int j = 0; j < b; ++j) {
        int best = argmax_rows(sharper)[static_cast<std::size_t>(j)];
        sharper.at(j, best) += 2.0;
    }
    auto [z2, w2] = weighted_logits({sharper, sources[1], sources[2]}, 0.7);
    for (int j = 0; j < b; ++j) {
        CHECK(w2[0][static_cast<std::size_t>(j)] > w0[0][static_cast<std::size_t>(j)]);
    }

    // Row-wise constant shifts leave weights and argmax(Z) unchanged.
    std::vector<Tensor> shifted = sources;
    for (Tensor& z : shifted) {
        for (int j = 0; j < b; ++j) {
            for (int c = 0; c < k; ++c) z.at(j, c) += 5.5;
        }
    }
    auto [z3, w3] = weighted_logits(shifted, 0.7);
    CHECK(argmax_rows(z3) == argmax_rows(z0));
    for (int s = 0; s < 3; ++s) {
        for (int j = 0; j < b; ++j) {
            CHECK(w3[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)] ==
                  doctest::Approx(w0[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)])
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("evaluation paths agree on a perfect fixture") {
    ModelState model = readout_model(3);
    Dataset ds = onehot_dataset(9, 3, 10.0);

    CHECK(evaluate(model, ds, EvalMode::uni, 0) == 1.0);
    CHECK(evaluate(model, ds, EvalMode::uni, 1) == 1.0);
    CHECK(evaluate(model, ds, EvalMode::fusion) == 1.0);
    CHECK(evaluate(model, ds, EvalMode::preds_avg) == 1.0);
    CHECK(evaluate(model, ds, EvalMode::weighted) == 1.0);

    auto all = evaluate_all(model, ds, 1.0);
    CHECK(all.at("acc_uni1") == 1.0);
    CHECK(all.at("acc_uni2") == 1.0);
    CHECK(all.at("acc_fusion") == 1.0);
    CHECK(all.at("acc_preds_avg") == 1.0);
    CHECK(all.at("acc_weighted") == 1.0);

    PredictionBundle pb = predict_bundle(model, ds, 1.0);
    REQUIRE(pb.logits.size() == 3);
    REQUIRE(pb.weights.size() == 3);
    CHECK(pb.final_logits.rows() == ds.size());

    CHECK_THROWS_AS(evaluate(model, ds, EvalMode::uni, 7), validation_error);
    CHECK_THROWS_AS(evaluate(model, Dataset{}, EvalMode::uni, 0), validation_error);
}

TEST_CASE("constant predictor is perfect on a single-class dataset") {
    ModelState model = readout_model(3);
    // Bias the unimodal heads toward class 2 and kill the signal path.
    for (auto& head : model.uni_heads) {
        head.weight = Tensor::zeros({3, 3});
        head.bias = Tensor::from({3}, {0.0, 0.0, 4.0});
    }
    model.fusion_head.weight = Tensor::zeros({6, 3});
    model.fusion_head.bias = Tensor::from({3}, {0.0, 0.0, 4.0});

    Dataset ds;
    ds.inputs = {Tensor::zeros({5, 3}), Tensor::zeros({5, 3})};
    ds.labels = {2, 2, 2, 2, 2};
    Rng rng(8);
    for (auto& x : ds.inputs) {
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.normal();
    }
    // Encoded features vary, but zero head weights ignore them.
    CHECK(evaluate(model, ds, EvalMode::uni, 0) == 1.0);
    CHECK(evaluate(model, ds, EvalMode::preds_avg) == 1.0);
    CHECK(evaluate(model, ds, EvalMode::weighted) == 1.0);
}
