#include "dimml/dimsep.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dimml/errors.hpp"

namespace dimml {

CentroidTable class_centroids(const Tensor& features, const std::vector<int>& labels,
                              int num_classes) {
    if (features.rows() != static_cast<int>(labels.size())) {
        throw validation_error("class_centroids: feature rows do not match label count");
    }
    if (num_classes < 1) throw validation_error("class_centroids: num_classes must be >= 1");
    int d = features.cols();
    CentroidTable ct;
    ct.centroids = Tensor::zeros({num_classes, d});
    ct.class_counts.assign(static_cast<std::size_t>(num_classes), 0);
    ct.total = features.rows();
    for (int j = 0; j < features.rows(); ++j) {
        int y = labels[static_cast<std::size_t>(j)];
        if (y < 0 || y >= num_classes) {
            throw validation_error("class_centroids: label out of range");
        }
        ct.class_counts[static_cast<std::size_t>(y)] += 1;
        for (int m = 0; m < d; ++m) ct.centroids.at(y, m) += features.at(j, m);
    }
    for (int k = 0; k < num_classes; ++k) {
        int n_k = ct.class_counts[static_cast<std::size_t>(k)];
        if (n_k == 0) {
            throw validation_error("class_centroids: class " + std::to_string(k) +
                                   " has no samples");
        }
        for (int m = 0; m < d; ++m) ct.centroids.at(k, m) /= n_k;
    }
    return ct;
}

DimScores dimension_scores(const Tensor& features, const std::vector<int>& labels,
                           const CentroidTable& centroids) {
    if (features.rows() != static_cast<int>(labels.size())) {
        throw validation_error("dimension_scores: feature rows do not match label count");
    }
    if (features.cols() != centroids.centroids.cols()) {
        throw validation_error("dimension_scores: feature width does not match centroids");
    }
    int n = features.rows();
    int d = features.cols();
    int k_count = centroids.centroids.rows();
    DimScores s;
    s.r = Tensor::zeros({d});
    for (int m = 0; m < d; ++m) {
        int correct = 0;
        for (int j = 0; j < n; ++j) {
            double v = features.at(j, m);
            int best = 0;
            double best_dist = std::abs(v - centroids.centroids.at(0, m));
            for (int k = 1; k < k_count; ++k) {
                double dist = std::abs(v - centroids.centroids.at(k, m));
                if (dist < best_dist) {
                    best_dist = dist;
                    best = k;
                }
            }
            if (best == labels[static_cast<std::size_t>(j)]) ++correct;
        }
        s.r[static_cast<std::size_t>(m)] = static_cast<double>(correct) / n;
    }
    double acc = 0.0;
    for (int m = 0; m < d; ++m) acc += s.r[static_cast<std::size_t>(m)];
    s.mean = acc / d;
    return s;
}

ModalityPartition separate_dimensions(const DimScores& scores) {
    ModalityPartition p;
    p.feature_dim = static_cast<int>(scores.r.numel());
    for (int m = 0; m < p.feature_dim; ++m) {
        if (scores.r[static_cast<std::size_t>(m)] > scores.mean) {
            p.effective.push_back(m);
        } else {
            p.ineffective.push_back(m);
        }
    }
    return p;
}

CrossSets cross_sets(const ModalityPartition& p1, const ModalityPartition& p2) {
    if (p1.feature_dim != p2.feature_dim) {
        throw validation_error("cross_sets: partitions cover different dimensions");
    }
    std::set<int> e2(p2.effective.begin(), p2.effective.end());
    std::set<int> ne2(p2.ineffective.begin(), p2.ineffective.end());
    CrossSets cs;
    for (int m : p1.ineffective) {
        if (e2.count(m)) cs.ne1_e2.push_back(m);
    }
    for (int m : p1.effective) {
        if (ne2.count(m)) cs.e1_ne2.push_back(m);
    }
    return cs;
}

DimScores l2norm_scores(const Tensor& features) {
    if (features.rows() < 1) throw validation_error("l2norm_scores: need at least one sample");
    int n = features.rows();
    int d = features.cols();
    DimScores s;
    s.r = Tensor::zeros({d});
    for (int m = 0; m < d; ++m) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += features.at(j, m) * features.at(j, m);
        s.r[static_cast<std::size_t>(m)] = std::sqrt(acc / n);
    }
    double acc = 0.0;
    for (int m = 0; m < d; ++m) acc += s.r[static_cast<std::size_t>(m)];
    s.mean = acc / d;
    return s;
}

DimensionPartition partition_from_effective(const std::vector<std::vector<int>>& effective,
                                            int feature_dim) {
    DimensionPartition p;
    for (const auto& eff : effective) {
        ModalityPartition mp;
        mp.feature_dim = feature_dim;
        std::set<int> e(eff.begin(), eff.end());
        for (int m : e) {
            if (m < 0 || m >= feature_dim) {
                throw validation_error("partition_from_effective: dimension index out of range");
            }
        }
        for (int m = 0; m < feature_dim; ++m) {
            if (e.count(m)) {
                mp.effective.push_back(m);
            } else {
                mp.ineffective.push_back(m);
            }
        }
        p.modalities.push_back(std::move(mp));
    }
    return p;
}

double masked_accuracy(const ModelState& model, const Dataset& ds, int modality,
                       const std::vector<int>& keep_dims, HeadKind head) {
    if (modality < 0 || modality >= model.num_modalities) {
        throw validation_error("masked_accuracy: modality index out of range");
    }
    Tensor h = encode(model.encoders[static_cast<std::size_t>(modality)],
                      ds.inputs[static_cast<std::size_t>(modality)]);
    std::vector<char> keep(static_cast<std::size_t>(h.cols()), 0);
    for (int m : keep_dims) {
        if (m < 0 || m >= h.cols()) {
            throw validation_error("masked_accuracy: keep_dims index out of range");
        }
        keep[static_cast<std::size_t>(m)] = 1;
    }
    for (int r = 0; r < h.rows(); ++r) {
        for (int c = 0; c < h.cols(); ++c) {
            if (!keep[static_cast<std::size_t>(c)]) h.at(r, c) = 0.0;
        }
    }
    const LinearHead& lh = head == HeadKind::uni
                               ? model.uni_heads[static_cast<std::size_t>(modality)]
                               : model.shared_head;
    std::vector<int> pred = argmax_rows(head_logits(lh, h));
    int correct = 0;
    for (std::size_t j = 0; j < pred.size(); ++j) {
        if (pred[j] == ds.labels[j]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace dimml
