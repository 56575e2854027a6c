#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dimml/models.hpp"
#include "dimml/synthdata.hpp"
#include "dimml/tensor.hpp"

namespace dimml {

// Per-sample absolute certainty: the winning softmax probability.
// Always lies in [1/K, 1].
Tensor certainty(const Tensor& logits);

// Certainty-weighted logit combination over any number of sources.
// Weight of source s for sample j is softmax over sources of c_j^s / T;
// the result is the weighted sum of the source logits.
std::pair<Tensor, std::vector<Tensor>> weighted_logits(const std::vector<Tensor>& logits,
                                                       double t_lw);

// Everything inference produces for one dataset pass. Sources are
// ordered unimodal heads first (modality order), fusion head last.
struct PredictionBundle {
    std::vector<Tensor> logits;       // M+1 tensors [B x K]
    std::vector<Tensor> certainties;  // M+1 tensors [B]
    std::vector<Tensor> weights;      // M+1 tensors [B]
    Tensor final_logits;              // [B x K]
};

PredictionBundle predict_bundle(const ModelState& model, const Dataset& ds, double t_lw);

enum class EvalMode { uni, fusion, preds_avg, weighted };

// Top-1 accuracy under the chosen prediction path. The modality index
// applies to EvalMode::uni only. preds_avg averages the unimodal
// softmax outputs; weighted uses the certainty-weighted combination.
double evaluate(const ModelState& model, const Dataset& ds, EvalMode mode, int modality = 0,
                double t_lw = 1.0);

// All standard metrics in one pass: acc_uni<i>, acc_fusion,
// acc_preds_avg, acc_weighted.
std::map<std::string, double> evaluate_all(const ModelState& model, const Dataset& ds,
                                           double t_lw);

}  // namespace dimml
