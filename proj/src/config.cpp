#include "dimml/config.hpp"

#include <fstream>
#include <sstream>

#include "dimml/errors.hpp"

namespace dimml {

namespace {

void sync_model_dims(ExperimentConfig& cfg) {
    cfg.model.num_classes = cfg.recipe.num_classes;
    cfg.model.num_modalities = cfg.recipe.num_modalities;
    cfg.model.input_dims = cfg.recipe.input_dims;
}

SyntheticRecipe preset_by_name(const std::string& name) {
    if (name == "complementary") return complementary_recipe();
    if (name == "reliability_skewed") return reliability_skewed_recipe();
    throw validation_error("config: recipe.preset must be \"complementary\" or "
                           "\"reliability_skewed\", got \"" + name + "\"");
}

template <typename T>
T get_as(const nlohmann::json& value, const std::string& key) {
    try {
        return value.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw validation_error("config: wrong type for key \"" + key + "\"");
    }
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.recipe = complementary_recipe();
    sync_model_dims(cfg);
    return cfg;
}

std::pair<BaselineMode, int> resolve_mode(const std::string& mode, int default_index) {
    BaselineMode m = baseline_mode_from_string(mode);
    if (m != BaselineMode::unimodal || mode == "unimodal") return {m, default_index};
    std::string suffix = mode.substr(8);
    for (char c : suffix) {
        if (c < '0' || c > '9') {
            throw validation_error("config: bad modality suffix in mode \"" + mode + "\"");
        }
    }
    return {m, std::stoi(suffix)};
}

void validate_config(const ExperimentConfig& cfg) {
    validate_recipe(cfg.recipe);
    validate_plan(cfg.plan);
    if (cfg.model.num_classes != cfg.recipe.num_classes ||
        cfg.model.num_modalities != cfg.recipe.num_modalities ||
        cfg.model.input_dims != cfg.recipe.input_dims) {
        throw validation_error("config: model dims out of sync with the recipe");
    }
    if (cfg.model.feature_dim < 1) throw validation_error("config: model.feature_dim must be >= 1");
    for (int h : cfg.model.hidden_dims) {
        if (h < 1) throw validation_error("config: model.hidden_dims entries must be >= 1");
    }
    if (cfg.seeds.empty()) throw validation_error("config: seeds must not be empty");
    if (cfg.modes.empty()) throw validation_error("config: modes must not be empty");
    for (const std::string& m : cfg.modes) {
        auto [mode, index] = resolve_mode(m, cfg.plan.unimodal_index);
        if (mode == BaselineMode::unimodal && index >= cfg.recipe.num_modalities) {
            throw validation_error("config: modality index out of range in mode \"" + m + "\"");
        }
    }
    if (cfg.plan.unimodal_index >= cfg.recipe.num_modalities) {
        throw validation_error("config: train.unimodal_index out of range");
    }
    if (cfg.out_dir.empty()) throw validation_error("config: out_dir must not be empty");
}

ExperimentConfig config_from_json(const nlohmann::json& flat) {
    if (!flat.is_object()) throw validation_error("config: top level must be a JSON object");
    ExperimentConfig cfg = default_config();

    // The preset replaces the whole recipe, so it applies before any
    // individual recipe.* override regardless of key order.
    if (flat.contains("recipe.preset")) {
        cfg.recipe = preset_by_name(get_as<std::string>(flat.at("recipe.preset"), "recipe.preset"));
    }

    bool saw_seeds = false;
    bool saw_modes = false;
    for (const auto& [key, value] : flat.items()) {
        if (key == "recipe.preset") {
            continue;
        } else if (key == "seed") {
            cfg.recipe.seed = get_as<std::uint64_t>(value, key);
        } else if (key == "seeds") {
            cfg.seeds = get_as<std::vector<std::uint64_t>>(value, key);
            saw_seeds = true;
        } else if (key == "modes") {
            cfg.modes = get_as<std::vector<std::string>>(value, key);
            saw_modes = true;
        } else if (key == "out_dir") {
            cfg.out_dir = get_as<std::string>(value, key);
        } else if (key == "parallel") {
            cfg.parallel = get_as<bool>(value, key);
        } else if (key == "recipe.num_classes") {
            cfg.recipe.num_classes = get_as<int>(value, key);
        } else if (key == "recipe.num_modalities") {
            cfg.recipe.num_modalities = get_as<int>(value, key);
        } else if (key == "recipe.input_dims") {
            cfg.recipe.input_dims = get_as<std::vector<int>>(value, key);
        } else if (key == "recipe.informative_dims") {
            cfg.recipe.informative_dims = get_as<std::vector<std::vector<int>>>(value, key);
        } else if (key == "recipe.shared_dims") {
            cfg.recipe.shared_dims = get_as<std::vector<int>>(value, key);
        } else if (key == "recipe.carried_classes") {
            cfg.recipe.carried_classes = get_as<std::vector<std::vector<int>>>(value, key);
        } else if (key == "recipe.prototype_scale") {
            cfg.recipe.prototype_scale = get_as<double>(value, key);
        } else if (key == "recipe.shared_scale") {
            cfg.recipe.shared_scale = get_as<double>(value, key);
        } else if (key == "recipe.noise_std") {
            cfg.recipe.noise_std = get_as<double>(value, key);
        } else if (key == "recipe.corrupt_prob") {
            cfg.recipe.corrupt_prob = get_as<std::vector<double>>(value, key);
        } else if (key == "recipe.train_samples") {
            cfg.recipe.train_samples = get_as<int>(value, key);
        } else if (key == "recipe.test_samples") {
            cfg.recipe.test_samples = get_as<int>(value, key);
        } else if (key == "model.hidden_dims") {
            cfg.model.hidden_dims = get_as<std::vector<int>>(value, key);
        } else if (key == "model.feature_dim") {
            cfg.model.feature_dim = get_as<int>(value, key);
        } else if (key == "train.mode") {
            cfg.plan.mode = baseline_mode_from_string(get_as<std::string>(value, key));
        } else if (key == "train.epochs") {
            cfg.plan.epochs = get_as<int>(value, key);
        } else if (key == "train.warmup_epochs") {
            cfg.plan.warmup_epochs = get_as<int>(value, key);
        } else if (key == "train.fusion_epochs") {
            cfg.plan.fusion_epochs = get_as<int>(value, key);
        } else if (key == "train.batch_size") {
            cfg.plan.batch_size = get_as<int>(value, key);
        } else if (key == "train.lr") {
            cfg.plan.lr = get_as<double>(value, key);
        } else if (key == "train.lr_decayed") {
            cfg.plan.lr_decayed = get_as<double>(value, key);
        } else if (key == "train.lr_decay_epoch") {
            cfg.plan.lr_decay_epoch = get_as<int>(value, key);
        } else if (key == "train.fusion_lr") {
            cfg.plan.fusion_lr = get_as<double>(value, key);
        } else if (key == "train.fusion_lr_decayed") {
            cfg.plan.fusion_lr_decayed = get_as<double>(value, key);
        } else if (key == "train.fusion_lr_decay_epoch") {
            cfg.plan.fusion_lr_decay_epoch = get_as<int>(value, key);
        } else if (key == "train.momentum") {
            cfg.plan.momentum = get_as<double>(value, key);
        } else if (key == "train.weight_decay") {
            cfg.plan.weight_decay = get_as<double>(value, key);
        } else if (key == "train.lambda_S") {
            cfg.plan.weights.lambda_s = get_as<double>(value, key);
        } else if (key == "train.lambda_D") {
            cfg.plan.weights.lambda_d = get_as<double>(value, key);
        } else if (key == "train.T_duc") {
            cfg.plan.weights.t_duc = get_as<double>(value, key);
        } else if (key == "train.T_kd") {
            cfg.plan.t_kd = get_as<double>(value, key);
        } else if (key == "train.T_lw") {
            cfg.plan.t_lw = get_as<double>(value, key);
        } else if (key == "train.unimodal_index") {
            cfg.plan.unimodal_index = get_as<int>(value, key);
        } else if (key == "train.recompute_partition") {
            cfg.plan.recompute_partition = get_as<bool>(value, key);
        } else {
            throw validation_error("config: unknown key \"" + key + "\"");
        }
    }

    if (!saw_seeds) cfg.seeds = {cfg.recipe.seed};
    if (!saw_modes) cfg.modes = {to_string(cfg.plan.mode)};
    sync_model_dims(cfg);
    validate_config(cfg);
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.recipe.seed;
    j["seeds"] = cfg.seeds;
    j["modes"] = cfg.modes;
    j["out_dir"] = cfg.out_dir;
    j["parallel"] = cfg.parallel;
    j["recipe.num_classes"] = cfg.recipe.num_classes;
    j["recipe.num_modalities"] = cfg.recipe.num_modalities;
    j["recipe.input_dims"] = cfg.recipe.input_dims;
    j["recipe.informative_dims"] = cfg.recipe.informative_dims;
    j["recipe.shared_dims"] = cfg.recipe.shared_dims;
    j["recipe.carried_classes"] = cfg.recipe.carried_classes;
    j["recipe.prototype_scale"] = cfg.recipe.prototype_scale;
    j["recipe.shared_scale"] = cfg.recipe.shared_scale;
    j["recipe.noise_std"] = cfg.recipe.noise_std;
    j["recipe.corrupt_prob"] = cfg.recipe.corrupt_prob;
    j["recipe.train_samples"] = cfg.recipe.train_samples;
    j["recipe.test_samples"] = cfg.recipe.test_samples;
    j["model.hidden_dims"] = cfg.model.hidden_dims;
    j["model.feature_dim"] = cfg.model.feature_dim;
    j["train.mode"] = to_string(cfg.plan.mode);
    j["train.epochs"] = cfg.plan.epochs;
    j["train.warmup_epochs"] = cfg.plan.warmup_epochs;
    j["train.fusion_epochs"] = cfg.plan.fusion_epochs;
    j["train.batch_size"] = cfg.plan.batch_size;
    j["train.lr"] = cfg.plan.lr;
    j["train.lr_decayed"] = cfg.plan.lr_decayed;
    j["train.lr_decay_epoch"] = cfg.plan.lr_decay_epoch;
    j["train.fusion_lr"] = cfg.plan.fusion_lr;
    j["train.fusion_lr_decayed"] = cfg.plan.fusion_lr_decayed;
    j["train.fusion_lr_decay_epoch"] = cfg.plan.fusion_lr_decay_epoch;
    j["train.momentum"] = cfg.plan.momentum;
    j["train.weight_decay"] = cfg.plan.weight_decay;
    j["train.lambda_S"] = cfg.plan.weights.lambda_s;
    j["train.lambda_D"] = cfg.plan.weights.lambda_d;
    j["train.T_duc"] = cfg.plan.weights.t_duc;
    j["train.T_kd"] = cfg.plan.t_kd;
    j["train.T_lw"] = cfg.plan.t_lw;
    j["train.unimodal_index"] = cfg.plan.unimodal_index;
    j["train.recompute_partition"] = cfg.plan.recompute_partition;
    return j;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw validation_error("config: " + path + " is not valid JSON");
    return config_from_json(j);
}

std::string config_help() {
    return
        "Config keys (flat JSON object, dotted keys, all optional):\n"
        "  seed                        base RNG seed (default 0); also the default seed list\n"
        "  seeds                       list of seeds for multi-seed runs (default [seed])\n"
        "  modes                       training modes to run (default [\"di_mml\"]).\n"
        "                              Known: di_mml, joint, mm_clf, preds_avg, cm_dist,\n"
        "                              ours_c, ours_dbc, unimodal. unimodal takes an\n"
        "                              optional 0-based modality suffix (unimodal1)\n"
        "  out_dir                     results directory (default \"runs\")\n"
        "  parallel                    run seeds in parallel child processes (default false)\n"
        "  recipe.preset               \"complementary\" or \"reliability_skewed\"; applied\n"
        "                              before any other recipe.* key\n"
        "  recipe.num_classes          classes K (default 6)\n"
        "  recipe.num_modalities       modalities M (default 2)\n"
        "  recipe.input_dims           per-modality input dims\n"
        "  recipe.informative_dims     per-modality lists of prototype-carrying dims\n"
        "  recipe.shared_dims          dims carrying the weak shared prototype\n"
        "  recipe.carried_classes      per-modality class lists the modality separates\n"
        "  recipe.prototype_scale      informative prototype magnitude (default 1.0)\n"
        "  recipe.shared_scale         shared prototype magnitude (default 0.25)\n"
        "  recipe.noise_std            additive noise sigma (default 0.4)\n"
        "  recipe.corrupt_prob         per-modality chance of dropping the signal\n"
        "  recipe.train_samples        training rows (default 240)\n"
        "  recipe.test_samples         test rows (default 120)\n"
        "  model.hidden_dims           encoder hidden layer widths (default [64])\n"
        "  model.feature_dim           encoder output dim d (default 32)\n"
        "  train.mode                  mode for single-mode commands (default di_mml)\n"
        "  train.epochs                encoder-stage epochs E (default 40)\n"
        "  train.warmup_epochs         epochs before separation/transfer E_w (default 10)\n"
        "  train.fusion_epochs         fusion/probe-stage epochs (default 10)\n"
        "  train.batch_size            minibatch size (default 16)\n"
        "  train.lr                    encoder-stage LR (default 1e-3)\n"
        "  train.lr_decayed            LR after the decay epoch (default 1e-4)\n"
        "  train.lr_decay_epoch        step-decay epoch (default 20)\n"
        "  train.fusion_lr             fusion-stage LR (default 1e-2)\n"
        "  train.fusion_lr_decayed     fusion LR after decay (default 1e-3)\n"
        "  train.fusion_lr_decay_epoch fusion step-decay epoch (default 5)\n"
        "  train.momentum              SGD momentum (default 0.9)\n"
        "  train.weight_decay          L2 weight decay (default 1e-4)\n"
        "  train.lambda_S              shared-classifier CE weight (default 1.0)\n"
        "  train.lambda_D              transfer-loss weight (default 1.0)\n"
        "  train.T_duc                 contrastive temperature (default 1.0)\n"
        "  train.T_kd                  distillation temperature (default 2.0)\n"
        "  train.T_lw                  logit-weighting temperature (default 1.0)\n"
        "  train.unimodal_index        modality for unimodal mode (default 0)\n"
        "  train.recompute_partition   redo separation each main epoch (default false)\n";
}

}  // namespace dimml
