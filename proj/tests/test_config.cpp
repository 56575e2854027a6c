#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "dimml/config.hpp"
#include "dimml/errors.hpp"

using namespace dimml;
using nlohmann::json;

TEST_CASE("a seed-only config gets every documented default") {
    json j;
    j["seed"] = 7;
    ExperimentConfig cfg = config_from_json(j);

    SyntheticRecipe want = complementary_recipe();
    CHECK(cfg.recipe.num_classes == want.num_classes);
    CHECK(cfg.recipe.input_dims == want.input_dims);
    CHECK(cfg.recipe.informative_dims == want.informative_dims);
    CHECK(cfg.recipe.noise_std == want.noise_std);
    CHECK(cfg.recipe.seed == 7);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{7});
    CHECK(cfg.modes == std::vector<std::string>{"di_mml"});
    CHECK(cfg.out_dir == "runs");
    CHECK_FALSE(cfg.parallel);
    CHECK(cfg.plan.epochs == 40);
    CHECK(cfg.plan.warmup_epochs == 10);
    CHECK(cfg.plan.batch_size == 16);
    CHECK(cfg.plan.lr == 1e-3);
    CHECK(cfg.plan.momentum == 0.9);
    CHECK(cfg.plan.weights.lambda_s == 1.0);
    CHECK(cfg.plan.weights.lambda_d == 1.0);
    CHECK(cfg.plan.t_kd == 2.0);
    CHECK(cfg.model.hidden_dims == std::vector<int>{64});
    CHECK(cfg.model.feature_dim == 32);
    CHECK(cfg.model.num_classes == cfg.recipe.num_classes);
    CHECK(cfg.model.input_dims == cfg.recipe.input_dims);
}

TEST_CASE("bad values are validation errors naming the key") {
    SUBCASE("negative transfer weight") {
        json j;
        j["train.lambda_D"] = -1.0;
        CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("lambda_D"),
                             validation_error);
    }
    SUBCASE("unknown key") {
        json j;
        j["train.lrr"] = 0.1;
        CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("train.lrr"),
                             validation_error);
    }
    SUBCASE("wrong type") {
        json j;
        j["train.epochs"] = "many";
        CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("train.epochs"),
                             validation_error);
    }
    SUBCASE("unknown mode in the mode list") {
        json j;
        j["modes"] = {"di_mml", "adamw"};
        CHECK_THROWS_AS(config_from_json(j), validation_error);
    }
    SUBCASE("unimodal index beyond the modality count") {
        json j;
        j["train.unimodal_index"] = 2;
        CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("unimodal_index"),
                             validation_error);
    }
    SUBCASE("recipe inconsistency surfaces through recipe validation") {
        json j;
        j["recipe.num_modalities"] = 3;  // complementary recipe lists only 2 of everything
        CHECK_THROWS_AS(config_from_json(j), validation_error);
    }
    SUBCASE("top level must be an object") {
        CHECK_THROWS_AS(config_from_json(json::array()), validation_error);
    }
}

TEST_CASE("train.mode sets the mode list when none is given") {
    json j;
    j["train.mode"] = "joint";
    CHECK(config_from_json(j).modes == std::vector<std::string>{"joint"});
    j["modes"] = {"di_mml", "mm_clf"};
    CHECK(config_from_json(j).modes == std::vector<std::string>{"di_mml", "mm_clf"});
}

TEST_CASE("a preset applies before individual recipe overrides") {
    json j;
    j["recipe.preset"] = "reliability_skewed";
    j["recipe.noise_std"] = 0.2;  // sorts before "recipe.preset" alphabetically
    ExperimentConfig cfg = config_from_json(j);
    SyntheticRecipe skewed = reliability_skewed_recipe();
    CHECK(cfg.recipe.corrupt_prob == skewed.corrupt_prob);
    CHECK(cfg.recipe.noise_std == 0.2);
    CHECK_THROWS_AS(([] {
                        json bad;
                        bad["recipe.preset"] = "easy";
                        config_from_json(bad);
                    }()),
                    validation_error);
}

TEST_CASE("config echo round-trips exactly") {
    json j;
    j["seed"] = 3;
    j["seeds"] = {3, 4, 5};
    j["modes"] = {"di_mml", "joint", "cm_dist"};
    j["out_dir"] = "results/exp1";
    j["recipe.preset"] = "reliability_skewed";
    j["recipe.train_samples"] = 96;
    j["model.feature_dim"] = 16;
    j["model.hidden_dims"] = {32, 32};
    j["train.mode"] = "joint";
    j["train.epochs"] = 12;
    j["train.lambda_S"] = 0.5;
    j["train.T_lw"] = 2.0;
    j["train.recompute_partition"] = true;

    ExperimentConfig cfg = config_from_json(j);
    json echo = config_to_json(cfg);
    ExperimentConfig cfg2 = config_from_json(echo);
    CHECK(config_to_json(cfg2).dump() == echo.dump());
    CHECK(cfg2.plan.epochs == 12);
    CHECK(cfg2.plan.mode == BaselineMode::joint);
    CHECK(cfg2.seeds == std::vector<std::uint64_t>{3, 4, 5});
    CHECK(cfg2.model.hidden_dims == std::vector<int>{32, 32});
    CHECK(cfg2.recipe.train_samples == 96);
}

TEST_CASE("config files parse with io failures distinguished from bad content") {
    CHECK_THROWS_AS(parse_config("no_such_config.json"), io_error);

    const char* path = "tmp_test_config.json";
    {
        std::ofstream os(path);
        os << "{ not json";
    }
    CHECK_THROWS_AS(parse_config(path), validation_error);
    {
        std::ofstream os(path);
        json j;
        j["seed"] = 11;
        j["train.epochs"] = 3;
        j["train.warmup_epochs"] = 1;
        os << j.dump(2);
    }
    ExperimentConfig cfg = parse_config(path);
    CHECK(cfg.recipe.seed == 11);
    CHECK(cfg.plan.epochs == 3);
    CHECK(cfg.plan.warmup_epochs == 1);
    std::remove(path);
}
