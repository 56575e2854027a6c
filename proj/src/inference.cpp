#include "dimml/inference.hpp"

#include <cmath>

#include "dimml/errors.hpp"

namespace dimml {

Tensor certainty(const Tensor& logits) {
    Tensor p = softmax(logits);
    int b = p.rank() == 2 ? p.rows() : 1;
    int k = p.rank() == 2 ? p.cols() : static_cast<int>(p.numel());
    Tensor c = Tensor::zeros({b});
    for (int r = 0; r < b; ++r) {
        double best = 0.0;
        for (int m = 0; m < k; ++m) {
            double v = p.rank() == 2 ? p.at(r, m) : p[static_cast<std::size_t>(m)];
            if (v > best) best = v;
        }
        c[static_cast<std::size_t>(r)] = best;
    }
    return c;
}

std::pair<Tensor, std::vector<Tensor>> weighted_logits(const std::vector<Tensor>& logits,
                                                       double t_lw) {
    if (logits.empty()) throw validation_error("weighted_logits: no sources");
    if (!(t_lw > 0.0) || !std::isfinite(t_lw)) {
        throw validation_error("weighted_logits: T_lw must be finite and > 0");
    }
    int b = logits.front().rows();
    int k = logits.front().cols();
    int s_count = static_cast<int>(logits.size());
    for (const Tensor& z : logits) {
        if (z.rank() != 2 || z.rows() != b || z.cols() != k) {
            throw validation_error("weighted_logits: sources must share shape, got " +
                                   z.shape_str());
        }
    }

    Tensor scores = Tensor::zeros({b, s_count});
    for (int s = 0; s < s_count; ++s) {
        Tensor c = certainty(logits[static_cast<std::size_t>(s)]);
        for (int r = 0; r < b; ++r) {
            scores.at(r, s) = c[static_cast<std::size_t>(r)] / t_lw;
        }
    }
    Tensor w = softmax(scores);

    Tensor z_final = Tensor::zeros({b, k});
    std::vector<Tensor> weights;
    for (int s = 0; s < s_count; ++s) {
        Tensor ws = Tensor::zeros({b});
        for (int r = 0; r < b; ++r) {
            double wv = w.at(r, s);
            ws[static_cast<std::size_t>(r)] = wv;
            for (int c = 0; c < k; ++c) {
                z_final.at(r, c) += wv * logits[static_cast<std::size_t>(s)].at(r, c);
            }
        }
        weights.push_back(std::move(ws));
    }
    return {std::move(z_final), std::move(weights)};
}

PredictionBundle predict_bundle(const ModelState& model, const Dataset& ds, double t_lw) {
    if (ds.num_modalities() != model.num_modalities) {
        throw validation_error("predict_bundle: dataset modality count does not match model");
    }
    PredictionBundle pb;
    std::vector<Tensor> features;
    for (int i = 0; i < model.num_modalities; ++i) {
        std::size_t si = static_cast<std::size_t>(i);
        features.push_back(encode(model.encoders[si], ds.inputs[si]));
        pb.logits.push_back(head_logits(model.uni_heads[si], features.back()));
    }
    pb.logits.push_back(head_logits(model.fusion_head, fuse_concat(features)));
    for (const Tensor& z : pb.logits) pb.certainties.push_back(certainty(z));
    auto [z_final, weights] = weighted_logits(pb.logits, t_lw);
    pb.final_logits = std::move(z_final);
    pb.weights = std::move(weights);
    return pb;
}

namespace {

double accuracy_of(const Tensor& logits, const std::vector<int>& labels) {
    std::vector<int> pred = argmax_rows(logits);
    int correct = 0;
    for (std::size_t j = 0; j < pred.size(); ++j) {
        if (pred[j] == labels[j]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace

double evaluate(const ModelState& model, const Dataset& ds, EvalMode mode, int modality,
                double t_lw) {
    if (ds.size() == 0) throw validation_error("evaluate: empty dataset");
    switch (mode) {
        case EvalMode::uni: {
            if (modality < 0 || modality >= model.num_modalities) {
                throw validation_error("evaluate: modality index out of range");
            }
            std::size_t si = static_cast<std::size_t>(modality);
            Tensor h = encode(model.encoders[si], ds.inputs[si]);
            return accuracy_of(head_logits(model.uni_heads[si], h), ds.labels);
        }
        case EvalMode::fusion: {
            std::vector<Tensor> features;
            for (int i = 0; i < model.num_modalities; ++i) {
                std::size_t si = static_cast<std::size_t>(i);
                features.push_back(encode(model.encoders[si], ds.inputs[si]));
            }
            return accuracy_of(head_logits(model.fusion_head, fuse_concat(features)), ds.labels);
        }
        case EvalMode::preds_avg: {
            Tensor mean_p;
            for (int i = 0; i < model.num_modalities; ++i) {
                std::size_t si = static_cast<std::size_t>(i);
                Tensor h = encode(model.encoders[si], ds.inputs[si]);
                Tensor p = softmax(head_logits(model.uni_heads[si], h));
                if (i == 0) {
                    mean_p = std::move(p);
                } else {
                    for (std::size_t n = 0; n < mean_p.numel(); ++n) mean_p[n] += p[n];
                }
            }
            for (std::size_t n = 0; n < mean_p.numel(); ++n) mean_p[n] /= model.num_modalities;
            return accuracy_of(mean_p, ds.labels);
        }
        case EvalMode::weighted: {
            PredictionBundle pb = predict_bundle(model, ds, t_lw);
            return accuracy_of(pb.final_logits, ds.labels);
        }
    }
    throw validation_error("evaluate: unknown mode");
}

std::map<std::string, double> evaluate_all(const ModelState& model, const Dataset& ds,
                                           double t_lw) {
    std::map<std::string, double> out;
    for (int i = 0; i < model.num_modalities; ++i) {
        out["acc_uni" + std::to_string(i + 1)] = evaluate(model, ds, EvalMode::uni, i, t_lw);
    }
    out["acc_fusion"] = evaluate(model, ds, EvalMode::fusion, 0, t_lw);
    out["acc_preds_avg"] = evaluate(model, ds, EvalMode::preds_avg, 0, t_lw);
    out["acc_weighted"] = evaluate(model, ds, EvalMode::weighted, 0, t_lw);
    return out;
}

}  // namespace dimml
