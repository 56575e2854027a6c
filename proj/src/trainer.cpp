#include "dimml/trainer.hpp"

#include <cmath>

#include "dimml/errors.hpp"
#include "dimml/inference.hpp"
#include "dimml/rng.hpp"

namespace dimml {

BaselineMode baseline_mode_from_string(const std::string& s) {
    if (s == "di_mml") return BaselineMode::di_mml;
    if (s == "joint") return BaselineMode::joint;
    if (s == "mm_clf") return BaselineMode::mm_clf;
    if (s == "preds_avg") return BaselineMode::preds_avg;
    if (s == "cm_dist") return BaselineMode::cm_dist;
    if (s == "ours_c") return BaselineMode::ours_c;
    if (s == "ours_dbc") return BaselineMode::ours_dbc;
    if (s.rfind("unimodal", 0) == 0) return BaselineMode::unimodal;
    throw validation_error("unknown training mode: " + s);
}

std::string to_string(BaselineMode mode) {
    switch (mode) {
        case BaselineMode::di_mml: return "di_mml";
        case BaselineMode::joint: return "joint";
        case BaselineMode::mm_clf: return "mm_clf";
        case BaselineMode::preds_avg: return "preds_avg";
        case BaselineMode::cm_dist: return "cm_dist";
        case BaselineMode::ours_c: return "ours_c";
        case BaselineMode::ours_dbc: return "ours_dbc";
        case BaselineMode::unimodal: return "unimodal";
    }
    return "unknown";
}

void validate_plan(const TrainPlan& plan) {
    if (plan.epochs < 0) throw validation_error("plan: epochs must be >= 0");
    if (plan.warmup_epochs < 0 || plan.warmup_epochs > plan.epochs) {
        throw validation_error("plan: warmup_epochs must lie in [0, epochs]");
    }
    if (plan.fusion_epochs < 0) throw validation_error("plan: fusion_epochs must be >= 0");
    if (plan.batch_size < 1) throw validation_error("plan: batch_size must be >= 1");
    for (double v : {plan.lr, plan.lr_decayed, plan.fusion_lr, plan.fusion_lr_decayed}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw validation_error("plan: learning rates must be finite and > 0");
        }
    }
    if (plan.momentum < 0.0 || plan.momentum >= 1.0) {
        throw validation_error("plan: momentum must lie in [0, 1)");
    }
    if (plan.weight_decay < 0.0 || !std::isfinite(plan.weight_decay)) {
        throw validation_error("plan: weight_decay must be finite and >= 0");
    }
    if (!(plan.t_kd > 0.0) || !(plan.t_lw > 0.0)) {
        throw validation_error("plan: temperatures must be > 0");
    }
    if (plan.unimodal_index < 0) throw validation_error("plan: unimodal_index must be >= 0");
    validate_weights(plan.weights);
}

double lr_at(int epoch, double initial, double decayed, int decay_epoch) {
    return epoch < decay_epoch ? initial : decayed;
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double mu,
              double wd, const std::string& name) {
    if (!param.same_shape(grad) || !param.same_shape(velocity)) {
        throw validation_error("sgd_step: shape mismatch for " + name);
    }
    if (!grad.all_finite()) {
        throw numeric_error("sgd_step: non-finite gradient for " + name);
    }
    for (std::size_t i = 0; i < param.numel(); ++i) {
        velocity[i] = mu * velocity[i] + (grad[i] + wd * param[i]);
        param[i] -= lr * velocity[i];
    }
}

void Optimizer::step(ModelState& model, const VarModel& vm, const GradMap& grads, double lr) {
    std::map<std::string, Tensor*> slots;
    for_each_param(model, [&](const std::string& name, Tensor& t) { slots[name] = &t; });
    for_each_param_var(vm, [&](const std::string& name, const Var& v) {
        if (!v.tracked()) return;
        Tensor g = grads.grad(v);
        Tensor& vel = velocity_[name];
        if (!vel.defined()) vel = Tensor::zeros(v.value.shape());
        sgd_step(*slots.at(name), g, vel, lr, momentum_, wd_, name);
    });
}

DimensionPartition compute_partition(ModelState& model, const Dataset& train,
                                     std::vector<DimScores>* scores_out) {
    DimensionPartition p;
    model.effective_dims.clear();
    for (int i = 0; i < model.num_modalities; ++i) {
        std::size_t si = static_cast<std::size_t>(i);
        Tensor h = encode(model.encoders[si], train.inputs[si]);
        CentroidTable ct = class_centroids(h, train.labels, model.num_classes);
        DimScores s = dimension_scores(h, train.labels, ct);
        ModalityPartition mp = separate_dimensions(s);
        model.effective_dims.push_back(mp.effective);
        p.modalities.push_back(std::move(mp));
        if (scores_out) scores_out->push_back(std::move(s));
    }
    model.phase = "separated";
    return p;
}

namespace {

struct ModeTraits {
    TransferKind kind = TransferKind::none;
    bool needs_partition = false;
    bool bind_all_encoders = false;  // bidirectional transfer terms
    bool always_main = false;        // no warmup concept (CM Dist)
    bool use_shared_head = true;
};

ModeTraits traits_for(BaselineMode mode) {
    ModeTraits t;
    switch (mode) {
        case BaselineMode::di_mml:
            t.kind = TransferKind::duc;
            t.needs_partition = true;
            break;
        case BaselineMode::ours_c:
            t.kind = TransferKind::contrastive_full;
            t.bind_all_encoders = true;
            break;
        case BaselineMode::ours_dbc:
            t.kind = TransferKind::dbc;
            t.needs_partition = true;
            t.bind_all_encoders = true;
            break;
        case BaselineMode::cm_dist:
            t.kind = TransferKind::cm_dist;
            t.always_main = true;
            t.use_shared_head = false;
            break;
        case BaselineMode::mm_clf:
        case BaselineMode::preds_avg:
        case BaselineMode::unimodal:
            t.use_shared_head = false;
            break;
        case BaselineMode::joint:
            break;
    }
    return t;
}

void check_finite_loss(const Var& loss, const char* stage) {
    if (!loss.value.all_finite()) {
        throw numeric_error(std::string("training diverged: non-finite loss in ") + stage);
    }
}

std::uint64_t batch_seed(const TrainPlan& plan, int stage_tag, int epoch) {
    return mix_seed(plan.seed, static_cast<std::uint64_t>(5000 + stage_tag * 1000 + epoch));
}

}  // namespace

void train_encoders(const TrainPlan& plan, const Dataset& train, ModelState& model,
                    TrainResult& result) {
    ModeTraits traits = traits_for(plan.mode);
    LossWeights weights = plan.weights;
    if (!traits.use_shared_head) weights.lambda_s = 0.0;
    if (traits.kind == TransferKind::none) weights.lambda_d = 0.0;

    std::vector<int> trained;
    if (plan.mode == BaselineMode::unimodal) {
        if (plan.unimodal_index >= model.num_modalities) {
            throw validation_error("plan: unimodal_index out of range");
        }
        trained.push_back(plan.unimodal_index);
    } else {
        for (int i = 0; i < model.num_modalities; ++i) trained.push_back(i);
    }

    Optimizer opt(plan.momentum, plan.weight_decay);
    bool warned_empty = false;
    model.phase = "warmup";

    for (int epoch = 0; epoch < plan.epochs; ++epoch) {
        bool main_phase = traits.always_main || epoch >= plan.warmup_epochs;
        bool separate_now =
            traits.needs_partition &&
            (epoch == plan.warmup_epochs ||
             (plan.recompute_partition && epoch > plan.warmup_epochs));
        if (separate_now) {
            result.partition = compute_partition(model, train);
            result.partition_computed = true;
        }
        double lr = lr_at(epoch, plan.lr, plan.lr_decayed, plan.lr_decay_epoch);
        Phase phase = main_phase ? Phase::main : Phase::warmup;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = main_phase ? "main" : "warmup";
        rec.lr = lr;
        std::map<std::string, double> loss_sums;
        int sample_total = 0;

        auto batches = iterate_batches(train, plan.batch_size, batch_seed(plan, 0, epoch));
        for (const MultimodalBatch& batch : batches) {
            for (int i : trained) {
                Tape tape;
                ComponentMask mask = ComponentMask::modality(model.num_modalities, i);
                if (!traits.use_shared_head) mask.shared_head = false;
                if (traits.bind_all_encoders && main_phase) {
                    for (std::size_t e = 0; e < mask.encoders.size(); ++e) mask.encoders[e] = true;
                }
                VarModel vm = bind_model(tape, model, mask);
                ObjectiveResult obj =
                    modality_objective(tape, vm, batch, i,
                                       result.partition_computed ? &result.partition : nullptr,
                                       weights, phase, main_phase ? traits.kind
                                                                  : TransferKind::none,
                                       plan.t_kd);
                check_finite_loss(obj.loss, "encoder stage");
                if (obj.empty_cross && !warned_empty) {
                    warned_empty = true;
                    result.warnings.push_back(
                        "empty cross set: transfer term inactive for at least one pair");
                }
                GradMap grads = tape.backward(obj.loss);
                opt.step(model, vm, grads, lr);

                std::string tag = "_m" + std::to_string(i + 1);
                loss_sums["loss" + tag] += obj.loss.value.value() * batch.size();
                loss_sums["shared_ce" + tag] += obj.shared_ce * batch.size();
                loss_sums["transfer" + tag] += obj.transfer * batch.size();
            }
            sample_total += batch.size();
        }

        for (auto& [key, sum] : loss_sums) rec.metrics[key] = sum / sample_total;
        for (int i : trained) {
            rec.metrics["acc_m" + std::to_string(i + 1)] =
                evaluate(model, train, EvalMode::uni, i, plan.t_lw);
        }
        result.log.push_back(std::move(rec));
    }
    if (plan.epochs > 0) model.phase = "encoders_trained";

    if (traits.needs_partition && !result.partition_computed) {
        result.partition = compute_partition(model, train);
        result.partition_computed = true;
        model.phase = "encoders_trained";
        result.warnings.push_back(
            "dimension partition computed after the encoder stage; transfer term never ran");
    }
}

namespace {

// Shared loop for the stages that train heads on frozen encoders.
template <typename LossFn>
void run_head_stage(const TrainPlan& plan, const Dataset& train, ModelState& model,
                    TrainResult& result, const ComponentMask& mask, const char* stage,
                    int stage_tag, const LossFn& make_loss) {
    Optimizer opt(plan.momentum, plan.weight_decay);
    for (int epoch = 0; epoch < plan.fusion_epochs; ++epoch) {
        double lr = lr_at(epoch, plan.fusion_lr, plan.fusion_lr_decayed,
                          plan.fusion_lr_decay_epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = stage;
        rec.lr = lr;
        double loss_sum = 0.0;
        int sample_total = 0;
        auto batches = iterate_batches(train, plan.batch_size, batch_seed(plan, stage_tag, epoch));
        for (const MultimodalBatch& batch : batches) {
            Tape tape;
            VarModel vm = bind_model(tape, model, mask);
            Var loss = make_loss(tape, vm, batch);
            check_finite_loss(loss, stage);
            GradMap grads = tape.backward(loss);
            opt.step(model, vm, grads, lr);
            loss_sum += loss.value.value() * batch.size();
            sample_total += batch.size();
        }
        rec.metrics[std::string("loss_") + stage] = loss_sum / sample_total;
        if (std::string(stage) == "probe") {
            for (int i = 0; i < model.num_modalities; ++i) {
                rec.metrics["acc_m" + std::to_string(i + 1)] =
                    evaluate(model, train, EvalMode::uni, i, plan.t_lw);
            }
        } else {
            rec.metrics["acc_fusion"] = evaluate(model, train, EvalMode::fusion, 0, plan.t_lw);
        }
        result.log.push_back(std::move(rec));
    }
}

Var fused_ce(Tape& tape, const VarModel& vm, const MultimodalBatch& batch) {
    std::vector<Var> features;
    for (std::size_t i = 0; i < vm.encoders.size(); ++i) {
        features.push_back(encode_var(tape, vm.encoders[i], Tape::constant(batch.inputs[i])));
    }
    Var z = head_logits_var(tape, vm.fusion_head, tape.concat_cols(features));
    return cross_entropy(tape, z, batch.labels);
}

}  // namespace

void train_fusion(const TrainPlan& plan, const Dataset& train, ModelState& model,
                  TrainResult& result) {
    ComponentMask mask = ComponentMask::none(model.num_modalities);
    mask.fusion_head = true;
    run_head_stage(plan, train, model, result, mask, "fusion", 1, fused_ce);
    if (plan.fusion_epochs > 0) model.phase = "fused";
}

void train_joint(const TrainPlan& plan, const Dataset& train, ModelState& model,
                 TrainResult& result) {
    ComponentMask mask = ComponentMask::none(model.num_modalities);
    for (std::size_t e = 0; e < mask.encoders.size(); ++e) mask.encoders[e] = true;
    mask.fusion_head = true;

    Optimizer opt(plan.momentum, plan.weight_decay);
    for (int epoch = 0; epoch < plan.epochs; ++epoch) {
        double lr = lr_at(epoch, plan.lr, plan.lr_decayed, plan.lr_decay_epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = "joint";
        rec.lr = lr;
        double loss_sum = 0.0;
        int sample_total = 0;
        auto batches = iterate_batches(train, plan.batch_size, batch_seed(plan, 0, epoch));
        for (const MultimodalBatch& batch : batches) {
            Tape tape;
            VarModel vm = bind_model(tape, model, mask);
            Var loss = fused_ce(tape, vm, batch);
            check_finite_loss(loss, "joint stage");
            GradMap grads = tape.backward(loss);
            opt.step(model, vm, grads, lr);
            loss_sum += loss.value.value() * batch.size();
            sample_total += batch.size();
        }
        rec.metrics["loss_joint"] = loss_sum / sample_total;
        rec.metrics["acc_fusion"] = evaluate(model, train, EvalMode::fusion, 0, plan.t_lw);
        result.log.push_back(std::move(rec));
    }
    if (plan.epochs > 0) model.phase = "fused";
}

void train_probes(const TrainPlan& plan, const Dataset& train, ModelState& model,
                  TrainResult& result) {
    ComponentMask mask = ComponentMask::none(model.num_modalities);
    for (std::size_t i = 0; i < mask.uni_heads.size(); ++i) mask.uni_heads[i] = true;
    run_head_stage(plan, train, model, result, mask, "probe", 2,
                   [](Tape& tape, const VarModel& vm, const MultimodalBatch& batch) {
                       Var total = Tape::constant(Tensor::scalar(0.0));
                       for (std::size_t i = 0; i < vm.encoders.size(); ++i) {
                           Var h = encode_var(tape, vm.encoders[i],
                                              Tape::constant(batch.inputs[i]));
                           Var z = head_logits_var(tape, vm.uni_heads[i], h);
                           total = tape.add(total, cross_entropy(tape, z, batch.labels));
                       }
                       return total;
                   });
}

TrainResult train_model(const TrainPlan& plan, const ModelConfig& cfg, const Dataset& train,
                        const StageCallback& on_stage) {
    validate_plan(plan);
    if (cfg.num_modalities != train.num_modalities()) {
        throw validation_error("train_model: model and dataset modality counts differ");
    }
    ModelConfig seeded = cfg;
    seeded.seed = plan.seed;

    TrainResult result;
    result.model = init_model(seeded);
    auto stage_done = [&](const char* stage) {
        if (on_stage) on_stage(stage, result.model);
    };

    switch (plan.mode) {
        case BaselineMode::joint:
            train_joint(plan, train, result.model, result);
            stage_done("joint");
            train_probes(plan, train, result.model, result);
            stage_done("probe");
            break;
        case BaselineMode::preds_avg:
        case BaselineMode::unimodal:
            train_encoders(plan, train, result.model, result);
            stage_done("encoders");
            break;
        case BaselineMode::di_mml:
        case BaselineMode::mm_clf:
        case BaselineMode::cm_dist:
        case BaselineMode::ours_c:
        case BaselineMode::ours_dbc:
            train_encoders(plan, train, result.model, result);
            stage_done("encoders");
            train_fusion(plan, train, result.model, result);
            stage_done("fusion");
            break;
    }
    return result;
}

}  // namespace dimml
