#pragma once

#include <vector>

#include "dimml/models.hpp"
#include "dimml/synthdata.hpp"
#include "dimml/tensor.hpp"

namespace dimml {

struct CentroidTable {
    Tensor centroids;              // [K x d]
    std::vector<int> class_counts;
    int total = 0;
};

struct DimScores {
    Tensor r;          // [d], each entry in [0, 1]
    double mean = 0.0;
};

// Effective/ineffective split of one modality's feature dimensions.
// Both lists are sorted and together cover {0..feature_dim-1}.
struct ModalityPartition {
    int feature_dim = 0;
    std::vector<int> effective;
    std::vector<int> ineffective;
};

struct DimensionPartition {
    std::vector<ModalityPartition> modalities;
};

// Cross sets for an ordered modality pair: the first set drives the
// pair's direction-1 transfer (learner 1), the second direction 2.
struct CrossSets {
    std::vector<int> ne1_e2;  // d_ne of modality 1 ∩ d_e of modality 2
    std::vector<int> e1_ne2;  // d_e of modality 1 ∩ d_ne of modality 2
};

// Per-class feature means. Throws validation_error naming the first
// class with no samples.
CentroidTable class_centroids(const Tensor& features, const std::vector<int>& labels,
                              int num_classes);

// r_m = fraction of samples whose label wins the 1-D nearest-centroid
// contest on dimension m; argmin ties break toward the lowest class.
DimScores dimension_scores(const Tensor& features, const std::vector<int>& labels,
                           const CentroidTable& centroids);

// d_e = {m : r_m > mean(r)}; ties land in d_ne.
ModalityPartition separate_dimensions(const DimScores& scores);

CrossSets cross_sets(const ModalityPartition& p1, const ModalityPartition& p2);

// Per-dimension root-mean-square feature magnitude; a drop-in
// alternative score for separate_dimensions.
DimScores l2norm_scores(const Tensor& features);

// Rebuilds partitions from the effective sets a ModelState carries.
DimensionPartition partition_from_effective(const std::vector<std::vector<int>>& effective,
                                            int feature_dim);

enum class HeadKind { uni, shared };

// Top-1 accuracy of one modality's head after zeroing every feature
// dimension outside keep_dims.
double masked_accuracy(const ModelState& model, const Dataset& ds, int modality,
                       const std::vector<int>& keep_dims, HeadKind head);

}  // namespace dimml
