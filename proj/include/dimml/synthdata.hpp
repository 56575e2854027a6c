#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dimml/tensor.hpp"

namespace dimml {

// Recipe for paired multimodal classification data. Dimensions of each
// modality split three ways: informative dims carry a per-class prototype
// (only for that modality's carried classes), shared dims carry a weaker
// prototype common to all modalities, and the remaining dims are pure
// noise. corrupt_prob lets a modality drop its signal on random samples,
// which skews instance-level reliability between modalities.
struct SyntheticRecipe {
    int num_classes = 6;
    int num_modalities = 2;
    std::vector<int> input_dims;
    std::vector<std::vector<int>> informative_dims;
    std::vector<int> shared_dims;  // same index list in every modality
    std::vector<std::vector<int>> carried_classes;
    double prototype_scale = 1.0;
    double shared_scale = 0.25;
    double noise_std = 0.1;
    std::vector<double> corrupt_prob;
    int train_samples = 240;
    int test_samples = 120;
    std::uint64_t seed = 0;
};

// K=6 two-modality default: modality 1's informative dims separate classes
// 0..3, modality 2's separate 2..5, shared dims weakly separate all six.
SyntheticRecipe complementary_recipe();

// Complementary recipe with modality 1 signal dropped on a fraction of
// samples, so per-sample reliability differs across modalities.
SyntheticRecipe reliability_skewed_recipe();

// Throws validation_error describing the first violated constraint.
void validate_recipe(const SyntheticRecipe& r);

nlohmann::json recipe_to_json(const SyntheticRecipe& r);
SyntheticRecipe recipe_from_json(const nlohmann::json& j);

struct Dataset {
    std::vector<Tensor> inputs;  // one [N x d_m] tensor per modality
    std::vector<int> labels;

    int size() const { return static_cast<int>(labels.size()); }
    int num_modalities() const { return static_cast<int>(inputs.size()); }
};

struct MultimodalBatch {
    std::vector<Tensor> inputs;
    std::vector<int> labels;

    int size() const { return static_cast<int>(labels.size()); }
    int num_modalities() const { return static_cast<int>(inputs.size()); }
};

// Deterministic generation: (train, test), bytes a pure function of the
// recipe. Labels are assigned round-robin so class counts balance to ±1.
std::pair<Dataset, Dataset> generate(const SyntheticRecipe& r);

// Splits the dataset into batches of batch_size (final partial batch
// retained) in an order fully determined by shuffle_seed.
std::vector<MultimodalBatch> iterate_batches(const Dataset& ds, int batch_size,
                                             std::uint64_t shuffle_seed);

struct StoredDataset {
    SyntheticRecipe recipe;
    Dataset train;
    Dataset test;
};

// .dml container: magic "DMLDATA1", u64 header length, JSON header, then
// per split the modality float64 blobs followed by an int32 label blob.
// All integers and floats little-endian.
void save_dataset(const std::string& path, const SyntheticRecipe& recipe, const Dataset& train,
                  const Dataset& test);
StoredDataset load_dataset(const std::string& path);

// One CSV per modality named <prefix>modality_<m>.csv (m starting at 1)
// with header dim_0..dim_{d-1},label.
void export_csv(const Dataset& ds, const std::string& prefix);

}  // namespace dimml
