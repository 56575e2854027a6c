#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dimml/config.hpp"
#include "dimml/synthdata.hpp"
#include "dimml/trainer.hpp"

namespace dimml {

// The per-mode headline number: weighted inference for the transfer
// variants, fusion for the jointly-trained baselines, prediction
// averaging and single-modality accuracy for their namesakes.
std::string primary_metric_name(BaselineMode mode, int unimodal_index);

// Test-split metrics for one trained mode. Deterministic content only
// (no paths, no timestamps), so identical runs serialize identically.
nlohmann::json mode_metrics(const ModelState& model, const Dataset& test, BaselineMode mode,
                            int unimodal_index, double t_lw,
                            const std::vector<std::string>& warnings);

// Trains every configured mode for one seed under seed_dir: dataset
// container, per-stage checkpoints, epoch log, partition export when the
// mode computes one, and metrics.json.
void run_single(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& seed_dir);

// Full experiment: config echo, one subdirectory per seed (sequential or
// forked child processes), and summary.csv with mean/stddev per metric.
// Returns the results directory. A failing seed leaves a FAILED marker
// beside its partial artifacts.
std::string run_experiment(const ExperimentConfig& cfg);

// One CSV per modality named <prefix>modality_<m>.csv with columns
// feat_0..feat_{d-1},label, rows aligned with the dataset.
void export_features(const ModelState& model, const Dataset& ds, const std::string& prefix);

struct SummaryEntry {
    std::string mode;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;
};

std::vector<SummaryEntry> read_summary(const std::string& run_dir);

// Merges the summaries of several results directories into one table
// keyed by directory basename.
std::string compare_table(const std::vector<std::string>& run_dirs);

}  // namespace dimml
