#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dimml/checkpoint.hpp"
#include "dimml/config.hpp"
#include "dimml/dimsep.hpp"
#include "dimml/errors.hpp"
#include "dimml/experiment.hpp"
#include "dimml/inference.hpp"
#include "dimml/synthdata.hpp"
#include "dimml/trainer.hpp"

using namespace dimml;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
};

void add_config_opts(CLI::App* sub, CommonOpts& opts) {
    sub->add_option("--config", opts.config_path, "JSON config file (flat dotted keys)");
    sub->add_option("--seed", opts.seed, "override the config seed (and seed list)")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
}

ExperimentConfig load_config(const CommonOpts& opts) {
    ExperimentConfig cfg =
        opts.config_path.empty() ? default_config() : parse_config(opts.config_path);
    if (const char* env = std::getenv("DIMML_OUT_DIR")) cfg.out_dir = env;
    if (!opts.out.empty()) cfg.out_dir = opts.out;
    if (opts.seed_set) {
        cfg.recipe.seed = opts.seed;
        cfg.seeds = {opts.seed};
    }
    validate_config(cfg);
    return cfg;
}

const Dataset& pick_split(const StoredDataset& sd, const std::string& split) {
    return split == "train" ? sd.train : sd.test;
}

void check_compatible(const ModelState& model, const Dataset& ds) {
    if (model.num_modalities != ds.num_modalities()) {
        throw validation_error("checkpoint expects " + std::to_string(model.num_modalities) +
                               " modalities, dataset has " + std::to_string(ds.num_modalities()));
    }
    for (int i = 0; i < model.num_modalities; ++i) {
        int want = model.encoders[static_cast<std::size_t>(i)].in_dim();
        int got = ds.inputs[static_cast<std::size_t>(i)].cols();
        if (want != got) {
            throw validation_error("modality " + std::to_string(i + 1) + ": checkpoint expects " +
                                   std::to_string(want) + " input dims, dataset has " +
                                   std::to_string(got));
        }
    }
}

// Plan for checkpoint-based commands: the echo stored in the checkpoint
// unless the user supplies a config file.
ExperimentConfig config_for_checkpoint(const Checkpoint& ck, const CommonOpts& opts) {
    if (!opts.config_path.empty()) return parse_config(opts.config_path);
    if (ck.config_echo.empty()) return default_config();
    return config_from_json(ck.config_echo);
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(out_path);
    if (!os) throw io_error("cannot open " + out_path);
    os << text;
}

int run_gen_data(const CommonOpts& opts, const std::string& out_file) {
    ExperimentConfig cfg = load_config(opts);
    auto [train, test] = generate(cfg.recipe);
    save_dataset(out_file, cfg.recipe, train, test);
    std::cout << "wrote " << out_file << " (train " << train.size() << ", test " << test.size()
              << ", modalities " << train.num_modalities() << ")\n";
    return 0;
}

int run_export_csv(const std::string& data_path, const std::string& split,
                   const std::string& prefix) {
    StoredDataset sd = load_dataset(data_path);
    export_csv(pick_split(sd, split), prefix);
    std::cout << "wrote " << prefix << "modality_*.csv (" << split << " split)\n";
    return 0;
}

int run_train(const CommonOpts& opts, const std::vector<std::string>& mode_flags) {
    ExperimentConfig cfg = load_config(opts);
    if (!mode_flags.empty()) {
        cfg.modes = mode_flags;
        validate_config(cfg);
    }
    std::string dir = run_experiment(cfg);
    std::cout << "results in " << dir << "\n";
    std::ifstream summary(dir + "/summary.csv");
    std::cout << summary.rdbuf();
    return 0;
}

int run_fuse(const CommonOpts& opts, const std::string& ckpt_path, const std::string& data_path,
             const std::string& out_ckpt) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    ExperimentConfig cfg = config_for_checkpoint(ck, opts);
    if (opts.seed_set) cfg.plan.seed = opts.seed;
    StoredDataset sd = load_dataset(data_path);
    check_compatible(ck.model, sd.train);

    TrainResult scratch;
    train_fusion(cfg.plan, sd.train, ck.model, scratch);
    save_checkpoint(out_ckpt, ck.model, config_to_json(cfg));
    std::cout << "wrote " << out_ckpt << " (test fusion accuracy "
              << evaluate(ck.model, sd.test, EvalMode::fusion) << ")\n";
    return 0;
}

int run_dims(const std::string& ckpt_path, const std::string& data_path,
             const std::string& prefix) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    StoredDataset sd = load_dataset(data_path);
    check_compatible(ck.model, sd.train);

    nlohmann::json j;
    j["modalities"] = nlohmann::json::array();
    std::ostringstream csv;
    csv << "modality,dim,score,effective\n";
    for (int m = 0; m < ck.model.num_modalities; ++m) {
        Tensor h = encode(ck.model.encoders[static_cast<std::size_t>(m)], sd.train.inputs[static_cast<std::size_t>(m)]);
        CentroidTable ct = class_centroids(h, sd.train.labels, ck.model.num_classes);
        DimScores scores = dimension_scores(h, sd.train.labels, ct);
        ModalityPartition mp = separate_dimensions(scores);

        nlohmann::json entry;
        entry["feature_dim"] = mp.feature_dim;
        entry["effective"] = mp.effective;
        entry["ineffective"] = mp.ineffective;
        entry["scores"] = scores.r.data();
        entry["mean_score"] = scores.mean;
        j["modalities"].push_back(std::move(entry));

        std::vector<int> flag(static_cast<std::size_t>(mp.feature_dim), 0);
        for (int e : mp.effective) flag[static_cast<std::size_t>(e)] = 1;
        for (int d = 0; d < mp.feature_dim; ++d) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", scores.r[static_cast<std::size_t>(d)]);
            csv << (m + 1) << "," << d << "," << buf << "," << flag[static_cast<std::size_t>(d)]
                << "\n";
        }
    }
    emit(prefix + "dims.json", j.dump(2) + "\n");
    emit(prefix + "dims.csv", csv.str());
    std::cout << "wrote " << prefix << "dims.json and " << prefix << "dims.csv\n";
    return 0;
}

int run_evaluate(const CommonOpts& opts, const std::string& ckpt_path,
                 const std::string& data_path, const std::string& split,
                 const std::string& out_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    ExperimentConfig cfg = config_for_checkpoint(ck, opts);
    StoredDataset sd = load_dataset(data_path);
    const Dataset& ds = pick_split(sd, split);
    check_compatible(ck.model, ds);

    nlohmann::json metrics = mode_metrics(ck.model, ds, cfg.plan.mode, cfg.plan.unimodal_index,
                                          cfg.plan.t_lw, {});
    metrics["split"] = split;
    emit(out_path, metrics.dump(2) + "\n");
    return 0;
}

int run_export_features(const std::string& ckpt_path, const std::string& data_path,
                        const std::string& split, const std::string& prefix) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    StoredDataset sd = load_dataset(data_path);
    export_features(ck.model, pick_split(sd, split), prefix);
    std::cout << "wrote " << prefix << "modality_*.csv (" << split << " split)\n";
    return 0;
}

int run_compare(const std::vector<std::string>& dirs, const std::string& out_path) {
    emit(out_path, compare_table(dirs));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Competition-free multimodal training: detached encoders with "
                 "dimension-decoupled knowledge transfer and certainty-weighted inference"};
    app.require_subcommand(1);
    app.footer(config_help());

    CommonOpts gen_opts, train_opts, fuse_opts, eval_opts;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset container");
    std::string gen_out = "dataset.dml";
    add_config_opts(gen, gen_opts);
    gen->add_option("--out", gen_out, "output .dml path")->capture_default_str();

    auto* csv = app.add_subcommand("export-csv", "dump a dataset split to per-modality CSVs");
    std::string csv_data, csv_split = "test", csv_prefix;
    csv->add_option("--data", csv_data, "dataset .dml")->required();
    csv->add_option("--split", csv_split, "train or test")
        ->check(CLI::IsMember({"train", "test"}));
    csv->add_option("--out", csv_prefix, "output prefix")->required();

    auto* train = app.add_subcommand("train", "run the configured experiment end to end");
    std::vector<std::string> train_modes;
    add_config_opts(train, train_opts);
    train->add_option("--out", train_opts.out, "results directory (overrides config/env)");
    train->add_option("--mode", train_modes, "override the mode list (repeatable)");

    auto* fuse = app.add_subcommand("fuse", "train the fusion head on a frozen checkpoint");
    std::string fuse_ckpt, fuse_data, fuse_out;
    add_config_opts(fuse, fuse_opts);
    fuse->add_option("--checkpoint", fuse_ckpt, "input checkpoint")->required();
    fuse->add_option("--data", fuse_data, "dataset .dml")->required();
    fuse->add_option("--out", fuse_out, "output checkpoint")->required();

    auto* dims = app.add_subcommand("dims", "score and separate feature dimensions");
    std::string dims_ckpt, dims_data, dims_prefix;
    dims->add_option("--checkpoint", dims_ckpt, "checkpoint")->required();
    dims->add_option("--data", dims_data, "dataset .dml")->required();
    dims->add_option("--out", dims_prefix, "output prefix for dims.json/dims.csv")->required();

    auto* eval = app.add_subcommand("evaluate", "metrics for a checkpoint on a dataset split");
    std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
    add_config_opts(eval, eval_opts);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint")->required();
    eval->add_option("--data", eval_data, "dataset .dml")->required();
    eval->add_option("--split", eval_split, "train or test")
        ->check(CLI::IsMember({"train", "test"}));
    eval->add_option("--out", eval_out, "write metrics JSON here instead of stdout");

    auto* feats = app.add_subcommand("export-features", "encode a split and dump feature CSVs");
    std::string feat_ckpt, feat_data, feat_split = "test", feat_prefix;
    feats->add_option("--checkpoint", feat_ckpt, "checkpoint")->required();
    feats->add_option("--data", feat_data, "dataset .dml")->required();
    feats->add_option("--split", feat_split, "train or test")
        ->check(CLI::IsMember({"train", "test"}));
    feats->add_option("--out", feat_prefix, "output prefix")->required();

    auto* cmp = app.add_subcommand("compare", "merge summaries of finished runs into one table");
    std::vector<std::string> cmp_dirs;
    std::string cmp_out;
    cmp->add_option("dirs", cmp_dirs, "results directories")->required()->expected(-1);
    cmp->add_option("--out", cmp_out, "write the table here instead of stdout");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return run_gen_data(gen_opts, gen_out);
        if (csv->parsed()) return run_export_csv(csv_data, csv_split, csv_prefix);
        if (train->parsed()) return run_train(train_opts, train_modes);
        if (fuse->parsed()) return run_fuse(fuse_opts, fuse_ckpt, fuse_data, fuse_out);
        if (dims->parsed()) return run_dims(dims_ckpt, dims_data, dims_prefix);
        if (eval->parsed()) return run_evaluate(eval_opts, eval_ckpt, eval_data, eval_split, eval_out);
        if (feats->parsed()) return run_export_features(feat_ckpt, feat_data, feat_split, feat_prefix);
        if (cmp->parsed()) return run_compare(cmp_dirs, cmp_out);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
