#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dimml/models.hpp"
#include "dimml/synthdata.hpp"
#include "dimml/trainer.hpp"

namespace dimml {

// Everything a run needs, bundled. Model topology that must agree with
// the recipe (class count, modality count, input dims) is kept in sync
// automatically; configs only choose hidden dims and the feature dim.
struct ExperimentConfig {
    SyntheticRecipe recipe;
    ModelConfig model;
    TrainPlan plan;
    std::vector<std::string> modes = {"di_mml"};
    std::vector<std::uint64_t> seeds = {0};
    std::string out_dir = "runs";
    bool parallel = false;
};

ExperimentConfig default_config();

// Cross-field checks on top of the per-part validators.
void validate_config(const ExperimentConfig& cfg);

// Flat JSON object with dotted keys ("train.lr", "recipe.noise_std", ...).
// Unknown keys and type mismatches are validation errors naming the key.
ExperimentConfig config_from_json(const nlohmann::json& flat);

// Full echo: every documented key with its effective value. Feeding the
// echo back through config_from_json reproduces the config exactly.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Reads and parses a config file. Missing file is an io_error.
ExperimentConfig parse_config(const std::string& path);

// One line per documented key, for --help output.
std::string config_help();

// Mode strings in mode lists may carry a 0-based modality suffix
// ("unimodal1"); bare "unimodal" falls back to default_index.
std::pair<BaselineMode, int> resolve_mode(const std::string& mode, int default_index);

}  // namespace dimml
