#pragma once

#include <vector>

#include "dimml/dimsep.hpp"
#include "dimml/models.hpp"
#include "dimml/synthdata.hpp"
#include "dimml/tape.hpp"

namespace dimml {

struct LossWeights {
    double lambda_s = 1.0;  // shared-classifier CE weight
    double lambda_d = 1.0;  // transfer-term weight
    double t_duc = 1.0;     // transfer temperature
};

void validate_weights(const LossWeights& w);

enum class Phase { warmup, main };

// Which knowledge-transfer term the per-modality objective carries.
enum class TransferKind { none, duc, contrastive_full, dbc, cm_dist };

// Mean over the batch of -log softmax(logits)[label].
Var cross_entropy(Tape& tape, const Var& logits, const std::vector<int>& labels);

// A transfer loss plus a flag for the degenerate empty-cross-set case,
// where the loss is exactly zero and training should warn, not abort.
struct TransferResult {
    Var loss;
    bool empty_cross = false;
};

// Unidirectional contrastive transfer (InfoNCE over negative Euclidean
// distances). Direction 1 teaches modality 1 on d_ne1 ∩ d_e2 with the
// modality-2 sub-features detached; direction 2 is the mirror image on
// d_e1 ∩ d_ne2. Anchors are learner rows, negatives run over the
// teacher's batch, and the denominator includes the positive pair.
TransferResult duc_loss(Tape& tape, const Var& h1, const Var& h2, const CrossSets& cross,
                        double temperature, int direction);

// Symmetric InfoNCE over all feature dimensions, both in-batch
// directions averaged, gradients flowing to both sides.
Var contrastive_loss_full(Tape& tape, const Var& h1, const Var& h2, double temperature);

// Same forward value as duc_loss(dir 1) + duc_loss(dir 2), but with no
// stop-gradient anywhere.
TransferResult dbc_loss(Tape& tape, const Var& h1, const Var& h2, const CrossSets& cross,
                        double temperature);

// T_kd^2 * KL(softmax(z_other/T_kd) || softmax(z_self/T_kd)), batch
// mean; z_other is treated as a detached teacher.
Var cm_dist_loss(Tape& tape, const Var& z_self, const Var& z_other, double t_kd);

struct ObjectiveResult {
    Var loss;
    double ce = 0.0;         // own-head CE value, for logging
    double shared_ce = 0.0;  // shared-head CE value
    double transfer = 0.0;   // transfer-term value
    bool empty_cross = false;
};

// The per-modality objective: CE through the modality's own head plus
// lambda_s times CE through the shared head, plus (main phase only) the
// requested transfer term weighted by lambda_d. Gradients reach only
// modality i's encoder and head and the shared head, except for the
// deliberately bidirectional contrastive_full/dbc transfer terms.
ObjectiveResult modality_objective(Tape& tape, const VarModel& vm, const MultimodalBatch& batch,
                                   int modality, const DimensionPartition* partition,
                                   const LossWeights& weights, Phase phase, TransferKind kind,
                                   double t_kd = 2.0);

}  // namespace dimml
