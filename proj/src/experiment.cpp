#include "dimml/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dimml/checkpoint.hpp"
#include "dimml/errors.hpp"
#include "dimml/inference.hpp"

namespace fs = std::filesystem;

namespace dimml {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open " + path);
    os << text;
    if (!os) throw io_error("write failed for " + path);
}

void write_failure_marker(const std::string& dir, const std::string& message) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream os(dir + "/FAILED");
    os << message << "\n";
}

void write_train_log(const std::string& path, const TrainLog& log) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open " + path);
    for (const EpochRecord& rec : log) {
        nlohmann::json j;
        j["epoch"] = rec.epoch;
        j["stage"] = rec.stage;
        j["lr"] = rec.lr;
        for (const auto& [key, val] : rec.metrics) j[key] = val;
        os << j.dump() << "\n";
    }
    if (!os) throw io_error("write failed for " + path);
}

void write_partition(const std::string& dir, const DimensionPartition& partition) {
    nlohmann::json j;
    j["modalities"] = nlohmann::json::array();
    for (const ModalityPartition& mp : partition.modalities) {
        nlohmann::json entry;
        entry["feature_dim"] = mp.feature_dim;
        entry["effective"] = mp.effective;
        entry["ineffective"] = mp.ineffective;
        j["modalities"].push_back(std::move(entry));
    }
    write_text(dir + "/dims.json", j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "modality,dim,effective\n";
    for (std::size_t m = 0; m < partition.modalities.size(); ++m) {
        const ModalityPartition& mp = partition.modalities[m];
        std::vector<int> flag(static_cast<std::size_t>(mp.feature_dim), 0);
        for (int e : mp.effective) flag[static_cast<std::size_t>(e)] = 1;
        for (int d = 0; d < mp.feature_dim; ++d) {
            csv << (m + 1) << "," << d << "," << flag[static_cast<std::size_t>(d)] << "\n";
        }
    }
    write_text(dir + "/dims.csv", csv.str());
}

}  // namespace

std::string primary_metric_name(BaselineMode mode, int unimodal_index) {
    switch (mode) {
        case BaselineMode::di_mml:
        case BaselineMode::ours_c:
        case BaselineMode::ours_dbc:
            return "acc_weighted";
        case BaselineMode::joint:
        case BaselineMode::mm_clf:
        case BaselineMode::cm_dist:
            return "acc_fusion";
        case BaselineMode::preds_avg:
            return "acc_preds_avg";
        case BaselineMode::unimodal:
            return "acc_uni" + std::to_string(unimodal_index + 1);
    }
    return "acc_fusion";
}

nlohmann::json mode_metrics(const ModelState& model, const Dataset& test, BaselineMode mode,
                            int unimodal_index, double t_lw,
                            const std::vector<std::string>& warnings) {
    nlohmann::json j;
    for (const auto& [key, val] : evaluate_all(model, test, t_lw)) j[key] = val;
    std::string primary = primary_metric_name(mode, unimodal_index);
    j["primary_metric"] = primary;
    j["primary"] = j.at(primary);
    j["mode"] = to_string(mode);
    j["warnings"] = warnings;
    return j;
}

void run_single(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& seed_dir) {
    fs::create_directories(seed_dir);
    SyntheticRecipe recipe = cfg.recipe;
    recipe.seed = seed;
    auto [train, test] = generate(recipe);
    save_dataset(seed_dir + "/dataset.dml", recipe, train, test);

    for (const std::string& mode_name : cfg.modes) {
        auto [mode, uni_index] = resolve_mode(mode_name, cfg.plan.unimodal_index);
        std::string mode_dir = seed_dir + "/" + mode_name;
        fs::create_directories(mode_dir);

        TrainPlan plan = cfg.plan;
        plan.mode = mode;
        plan.unimodal_index = uni_index;
        plan.seed = seed;

        ExperimentConfig echo_cfg = cfg;
        echo_cfg.plan = plan;
        echo_cfg.recipe = recipe;
        nlohmann::json echo = config_to_json(echo_cfg);

        TrainResult result = train_model(
            plan, cfg.model, train, [&](const std::string& stage, const ModelState& m) {
                save_checkpoint(mode_dir + "/checkpoint_" + stage + ".bin", m, echo);
            });
        save_checkpoint(mode_dir + "/checkpoint_final.bin", result.model, echo);
        write_train_log(mode_dir + "/train_log.jsonl", result.log);
        if (result.partition_computed) write_partition(mode_dir, result.partition);

        nlohmann::json metrics =
            mode_metrics(result.model, test, mode, uni_index, plan.t_lw, result.warnings);
        metrics["seed"] = seed;
        write_text(mode_dir + "/metrics.json", metrics.dump(2) + "\n");
    }
}

namespace {

void run_single_guarded(const ExperimentConfig& cfg, std::uint64_t seed,
                        const std::string& seed_dir) {
    try {
        run_single(cfg, seed, seed_dir);
    } catch (const std::exception& e) {
        write_failure_marker(seed_dir, e.what());
        throw;
    }
}

void run_seeds_forked(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::vector<std::pair<pid_t, std::uint64_t>> children;
    for (std::uint64_t seed : cfg.seeds) {
        pid_t pid = fork();
        if (pid < 0) throw io_error("run_experiment: fork failed");
        if (pid == 0) {
            int code = 0;
            try {
                run_single(cfg, seed, out_dir + "/seed_" + std::to_string(seed));
            } catch (const std::exception& e) {
                write_failure_marker(out_dir + "/seed_" + std::to_string(seed), e.what());
                code = dynamic_cast<const validation_error*>(&e) ? 1 : 2;
            }
            std::_Exit(code);
        }
        children.emplace_back(pid, seed);
    }
    std::vector<std::uint64_t> failed;
    for (auto [pid, seed] : children) {
        int status = 0;
        waitpid(pid, &status, 0);
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed.push_back(seed);
    }
    if (!failed.empty()) {
        throw numeric_error("run_experiment: seed " + std::to_string(failed.front()) +
                            " failed; see its FAILED marker");
    }
}

void write_summary(const ExperimentConfig& cfg, const std::string& out_dir) {
    // metric -> per-seed values, ordered per mode for a stable table.
    std::vector<std::pair<std::string, std::map<std::string, std::vector<double>>>> by_mode;
    for (const std::string& mode_name : cfg.modes) {
        std::map<std::string, std::vector<double>> values;
        for (std::uint64_t seed : cfg.seeds) {
            std::string path =
                out_dir + "/seed_" + std::to_string(seed) + "/" + mode_name + "/metrics.json";
            std::ifstream is(path);
            if (!is) throw io_error("run_experiment: missing " + path);
            nlohmann::json metrics = nlohmann::json::parse(is, nullptr, false);
            if (metrics.is_discarded()) throw io_error("run_experiment: corrupt " + path);
            for (const auto& [key, val] : metrics.items()) {
                if (val.is_number() && key != "seed") {
                    values[key].push_back(val.get<double>());
                }
            }
        }
        by_mode.emplace_back(mode_name, std::move(values));
    }

    std::ostringstream csv;
    csv << "mode,metric,mean,stddev\n";
    for (const auto& [mode_name, values] : by_mode) {
        for (const auto& [metric, vals] : values) {
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            if (vals.size() > 1) {
                for (double v : vals) var += (v - mean) * (v - mean);
                var /= static_cast<double>(vals.size() - 1);
            }
            csv << mode_name << "," << metric << "," << fmt_double(mean) << ","
                << fmt_double(std::sqrt(var)) << "\n";
        }
    }
    write_text(out_dir + "/summary.csv", csv.str());
}

}  // namespace

std::string run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/config_echo.json", config_to_json(cfg).dump(2) + "\n");

    if (cfg.parallel && cfg.seeds.size() > 1) {
        run_seeds_forked(cfg, cfg.out_dir);
    } else {
        for (std::uint64_t seed : cfg.seeds) {
            run_single_guarded(cfg, seed, cfg.out_dir + "/seed_" + std::to_string(seed));
        }
    }
    write_summary(cfg, cfg.out_dir);
    return cfg.out_dir;
}

void export_features(const ModelState& model, const Dataset& ds, const std::string& prefix) {
    if (ds.num_modalities() != model.num_modalities) {
        throw validation_error("export_features: dataset and model modality counts differ");
    }
    for (int m = 0; m < model.num_modalities; ++m) {
        const Tensor& x = ds.inputs[static_cast<std::size_t>(m)];
        const EncoderParams& enc = model.encoders[static_cast<std::size_t>(m)];
        if (x.cols() != enc.in_dim()) {
            throw validation_error("export_features: modality " + std::to_string(m + 1) +
                                   " input dim " + std::to_string(x.cols()) +
                                   " does not match encoder dim " + std::to_string(enc.in_dim()));
        }
        Tensor h = encode(enc, x);
        std::string path = prefix + "modality_" + std::to_string(m + 1) + ".csv";
        std::ofstream os(path);
        if (!os) throw io_error("export_features: cannot open " + path);
        for (int c = 0; c < h.cols(); ++c) os << "feat_" << c << ",";
        os << "label\n";
        for (int r = 0; r < h.rows(); ++r) {
            for (int c = 0; c < h.cols(); ++c) os << fmt_double(h.at(r, c)) << ",";
            os << ds.labels[static_cast<std::size_t>(r)] << "\n";
        }
        if (!os) throw io_error("export_features: write failed for " + path);
    }
}

std::vector<SummaryEntry> read_summary(const std::string& run_dir) {
    std::ifstream is(run_dir + "/summary.csv");
    if (!is) throw io_error("no summary.csv in " + run_dir);
    std::string line;
    std::getline(is, line);
    if (line != "mode,metric,mean,stddev") {
        throw io_error("unexpected summary header in " + run_dir);
    }
    std::vector<SummaryEntry> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        SummaryEntry e;
        std::string mean_s, std_s;
        if (!std::getline(row, e.mode, ',') || !std::getline(row, e.metric, ',') ||
            !std::getline(row, mean_s, ',') || !std::getline(row, std_s)) {
            throw io_error("malformed summary row in " + run_dir + ": " + line);
        }
        e.mean = std::stod(mean_s);
        e.stddev = std::stod(std_s);
        out.push_back(std::move(e));
    }
    return out;
}

std::string compare_table(const std::vector<std::string>& run_dirs) {
    std::ostringstream csv;
    csv << "run,mode,metric,mean,stddev\n";
    for (const std::string& dir : run_dirs) {
        std::string label = fs::path(dir).filename().string();
        if (label.empty()) label = fs::path(dir).parent_path().filename().string();
        for (const SummaryEntry& e : read_summary(dir)) {
            csv << label << "," << e.mode << "," << e.metric << "," << fmt_double(e.mean) << ","
                << fmt_double(e.stddev) << "\n";
        }
    }
    return csv.str();
}

}  // namespace dimml
