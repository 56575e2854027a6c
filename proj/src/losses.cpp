#include "dimml/losses.hpp"

#include <cmath>
#include <string>

#include "dimml/errors.hpp"

namespace dimml {

void validate_weights(const LossWeights& w) {
    if (!(w.lambda_s >= 0.0) || !std::isfinite(w.lambda_s)) {
        throw validation_error("loss weights: lambda_s must be finite and >= 0");
    }
    if (!(w.lambda_d >= 0.0) || !std::isfinite(w.lambda_d)) {
        throw validation_error("loss weights: lambda_D must be finite and >= 0");
    }
    if (!(w.t_duc > 0.0) || !std::isfinite(w.t_duc)) {
        throw validation_error("loss weights: T_duc must be finite and > 0");
    }
}

Var cross_entropy(Tape& tape, const Var& logits, const std::vector<int>& labels) {
    int b = logits.value.rows();
    if (b != static_cast<int>(labels.size())) {
        throw validation_error("cross_entropy: batch size does not match label count");
    }
    Var nll = tape.select_labels(tape.log_softmax(logits), labels);
    return tape.scale(tape.sum_all(nll), -1.0 / b);
}

namespace {

// One transfer direction: anchor each learner row, contrast against all
// teacher rows on the given dimension subset. detach_teacher implements
// the stop-gradient side of the unidirectional loss.
Var contrast_pair(Tape& tape, const Var& learner, const Var& teacher,
                  const std::vector<int>& dims, double temperature, bool detach_teacher,
                  bool subset) {
    int b = learner.value.rows();
    Var t_side = detach_teacher ? tape.stop_gradient(teacher) : teacher;
    Var sub_l = subset ? tape.select_cols(learner, dims) : learner;
    Var sub_t = subset ? tape.select_cols(t_side, dims) : t_side;
    Var sims = tape.scale(tape.pairwise_dist(sub_l, sub_t), -1.0 / temperature);
    Var log_p = tape.diag(tape.log_softmax(sims));
    return tape.scale(tape.sum_all(log_p), -1.0 / b);
}

void check_transfer_inputs(const Var& h1, const Var& h2, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw validation_error("transfer loss: temperature must be finite and > 0");
    }
    if (h1.value.rank() != 2 || h2.value.rank() != 2 ||
        h1.value.rows() != h2.value.rows() || h1.value.cols() != h2.value.cols()) {
        throw validation_error("transfer loss: feature shapes must match, got " +
                               h1.value.shape_str() + " vs " + h2.value.shape_str());
    }
}

}  // namespace

TransferResult duc_loss(Tape& tape, const Var& h1, const Var& h2, const CrossSets& cross,
                        double temperature, int direction) {
    check_transfer_inputs(h1, h2, temperature);
    if (direction != 1 && direction != 2) {
        throw validation_error("duc_loss: direction must be 1 or 2");
    }
    const std::vector<int>& dims = direction == 1 ? cross.ne1_e2 : cross.e1_ne2;
    if (dims.empty()) {
        return TransferResult{Tape::constant(Tensor::scalar(0.0)), true};
    }
    Var loss = direction == 1 ? contrast_pair(tape, h1, h2, dims, temperature, true, true)
                              : contrast_pair(tape, h2, h1, dims, temperature, true, true);
    return TransferResult{loss, false};
}

Var contrastive_loss_full(Tape& tape, const Var& h1, const Var& h2, double temperature) {
    check_transfer_inputs(h1, h2, temperature);
    Var fwd = contrast_pair(tape, h1, h2, {}, temperature, false, false);
    Var bwd = contrast_pair(tape, h2, h1, {}, temperature, false, false);
    return tape.scale(tape.add(fwd, bwd), 0.5);
}

TransferResult dbc_loss(Tape& tape, const Var& h1, const Var& h2, const CrossSets& cross,
                        double temperature) {
    check_transfer_inputs(h1, h2, temperature);
    TransferResult out;
    out.empty_cross = cross.ne1_e2.empty() && cross.e1_ne2.empty();
    Var acc = Tape::constant(Tensor::scalar(0.0));
    if (!cross.ne1_e2.empty()) {
        acc = tape.add(acc, contrast_pair(tape, h1, h2, cross.ne1_e2, temperature, false, true));
    }
    if (!cross.e1_ne2.empty()) {
        acc = tape.add(acc, contrast_pair(tape, h2, h1, cross.e1_ne2, temperature, false, true));
    }
    out.loss = acc;
    return out;
}

Var cm_dist_loss(Tape& tape, const Var& z_self, const Var& z_other, double t_kd) {
    if (!(t_kd > 0.0) || !std::isfinite(t_kd)) {
        throw validation_error("cm_dist_loss: T_kd must be finite and > 0");
    }
    if (!z_self.value.same_shape(z_other.value)) {
        throw validation_error("cm_dist_loss: logit shapes must match");
    }
    int b = z_self.value.rows();

    // Teacher distribution is a constant: softmax and its log computed
    // outside the tape.
    Tensor p = softmax([&] {
        Tensor scaled = z_other.value;
        for (std::size_t i = 0; i < scaled.numel(); ++i) scaled[i] /= t_kd;
        return scaled;
    }());
    Tensor p_log_p = p;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        p_log_p[i] = p[i] > 0.0 ? p[i] * std::log(p[i]) : 0.0;
    }
    double teacher_entropy_term = 0.0;
    for (std::size_t i = 0; i < p_log_p.numel(); ++i) teacher_entropy_term += p_log_p[i];

    Var log_q = tape.log_softmax(tape.scale(z_self, 1.0 / t_kd));
    Var cross_term = tape.sum_all(tape.mul(Tape::constant(p), log_q));
    Var kl = tape.add(Tape::constant(Tensor::scalar(teacher_entropy_term)),
                      tape.scale(cross_term, -1.0));
    return tape.scale(kl, t_kd * t_kd / b);
}

ObjectiveResult modality_objective(Tape& tape, const VarModel& vm, const MultimodalBatch& batch,
                                   int modality, const DimensionPartition* partition,
                                   const LossWeights& weights, Phase phase, TransferKind kind,
                                   double t_kd) {
    validate_weights(weights);
    int m_count = static_cast<int>(vm.encoders.size());
    if (modality < 0 || modality >= m_count) {
        throw validation_error("modality_objective: modality index out of range");
    }
    if (batch.num_modalities() != m_count) {
        throw validation_error("modality_objective: batch modality count mismatch");
    }
    bool needs_partition =
        phase == Phase::main && (kind == TransferKind::duc || kind == TransferKind::dbc);
    if (needs_partition &&
        (partition == nullptr || static_cast<int>(partition->modalities.size()) != m_count)) {
        throw validation_error("modality_objective: dimension partition required in main phase");
    }

    std::size_t mi = static_cast<std::size_t>(modality);
    Var x = Tape::constant(batch.inputs[mi]);
    Var h = encode_var(tape, vm.encoders[mi], x);
    Var z = head_logits_var(tape, vm.uni_heads[mi], h);
    Var sz = head_logits_var(tape, vm.shared_head, h);

    ObjectiveResult out;
    Var ce = cross_entropy(tape, z, batch.labels);
    Var shared_ce = cross_entropy(tape, sz, batch.labels);
    out.ce = ce.value.value();
    out.shared_ce = shared_ce.value.value();
    Var loss = tape.add(ce, tape.scale(shared_ce, weights.lambda_s));

    if (phase == Phase::main && kind != TransferKind::none) {
        Var transfer = Tape::constant(Tensor::scalar(0.0));
        int terms = 0;
        for (int other = 0; other < m_count; ++other) {
            if (other == modality) continue;
            std::size_t oi = static_cast<std::size_t>(other);
            Var h_other = encode_var(tape, vm.encoders[oi], Tape::constant(batch.inputs[oi]));
            Var term;
            switch (kind) {
                case TransferKind::duc: {
                    CrossSets cs = cross_sets(partition->modalities[mi],
                                              partition->modalities[oi]);
                    TransferResult tr = duc_loss(tape, h, h_other, cs, weights.t_duc, 1);
                    out.empty_cross = out.empty_cross || tr.empty_cross;
                    term = tr.loss;
                    break;
                }
                case TransferKind::dbc: {
                    CrossSets cs = cross_sets(partition->modalities[mi],
                                              partition->modalities[oi]);
                    TransferResult tr = dbc_loss(tape, h, h_other, cs, weights.t_duc);
                    out.empty_cross = out.empty_cross || tr.empty_cross;
                    term = tr.loss;
                    break;
                }
                case TransferKind::contrastive_full:
                    term = contrastive_loss_full(tape, h, h_other, weights.t_duc);
                    break;
                case TransferKind::cm_dist: {
                    Var z_other =
                        head_logits_var(tape, vm.uni_heads[oi], h_other);
                    term = cm_dist_loss(tape, z, tape.stop_gradient(z_other), t_kd);
                    break;
                }
                case TransferKind::none:
                    break;
            }
            transfer = tape.add(transfer, term);
            ++terms;
        }
        if (terms > 1) transfer = tape.scale(transfer, 1.0 / terms);
        out.transfer = transfer.value.value();
        loss = tape.add(loss, tape.scale(transfer, weights.lambda_d));
    }

    out.loss = loss;
    return out;
}

}  // namespace dimml
