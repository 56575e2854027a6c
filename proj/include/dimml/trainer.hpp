#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dimml/dimsep.hpp"
#include "dimml/losses.hpp"
#include "dimml/models.hpp"
#include "dimml/synthdata.hpp"

namespace dimml {

enum class BaselineMode { di_mml, joint, mm_clf, preds_avg, cm_dist, ours_c, ours_dbc, unimodal };

BaselineMode baseline_mode_from_string(const std::string& s);
std::string to_string(BaselineMode mode);

struct TrainPlan {
    int epochs = 40;        // E, encoder stage
    int warmup_epochs = 10; // E_w
    int fusion_epochs = 10; // E_f, also the probe-training budget
    int batch_size = 16;
    double lr = 1e-3;
    double lr_decayed = 1e-4;
    int lr_decay_epoch = 20;
    double fusion_lr = 1e-2;  // linear-head stages converge fast at desk scale
    double fusion_lr_decayed = 1e-3;
    int fusion_lr_decay_epoch = 5;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    LossWeights weights;
    double t_kd = 2.0;  // CM Dist distillation temperature
    double t_lw = 1.0;  // logit-weighting temperature
    BaselineMode mode = BaselineMode::di_mml;
    int unimodal_index = 0;
    bool recompute_partition = false;  // redo separation each main epoch
    std::uint64_t seed = 0;
};

void validate_plan(const TrainPlan& plan);

// Step-decay schedule: the initial value strictly before decay_epoch,
// the decayed value at and after it.
double lr_at(int epoch, double initial, double decayed, int decay_epoch);

// One momentum-SGD update: v <- mu*v + (g + wd*p); p <- p - lr*v.
// Throws numeric_error naming the parameter on non-finite gradients.
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double mu,
              double wd, const std::string& name);

// Momentum buffers keyed by canonical parameter name; steps exactly the
// leaves a tape bound as trainable.
class Optimizer {
public:
    Optimizer(double momentum, double weight_decay) : momentum_(momentum), wd_(weight_decay) {}

    void step(ModelState& model, const VarModel& vm, const GradMap& grads, double lr);

private:
    double momentum_;
    double wd_;
    std::map<std::string, Tensor> velocity_;
};

struct EpochRecord {
    int epoch = 0;
    std::string stage;  // warmup | main | fusion | joint | probe
    double lr = 0.0;
    std::map<std::string, double> metrics;
};

using TrainLog = std::vector<EpochRecord>;

struct TrainResult {
    ModelState model;
    DimensionPartition partition;
    bool partition_computed = false;
    TrainLog log;
    std::vector<std::string> warnings;
};

// Computes centroids/scores/partition over the full training set and
// stamps the effective sets into the model.
DimensionPartition compute_partition(ModelState& model, const Dataset& train,
                                     std::vector<DimScores>* scores_out = nullptr);

// Stage 1 for the detached modes (di_mml, ours_c, ours_dbc, cm_dist,
// mm_clf, preds_avg, unimodal): per-batch, each trained modality gets
// its own backward pass and step, in modality order.
void train_encoders(const TrainPlan& plan, const Dataset& train, ModelState& model,
                    TrainResult& result);

// Stage 2: freeze everything, train the fusion head with CE on
// concatenated features.
void train_fusion(const TrainPlan& plan, const Dataset& train, ModelState& model,
                  TrainResult& result);

// Joint baseline: one fused CE objective updating all encoders and the
// fusion head together.
void train_joint(const TrainPlan& plan, const Dataset& train, ModelState& model,
                 TrainResult& result);

// Fits the unimodal heads on frozen encoders so that encoder quality
// can be probed after joint training.
void train_probes(const TrainPlan& plan, const Dataset& train, ModelState& model,
                  TrainResult& result);

// Invoked as each stage finishes, with the stage name (encoders, fusion,
// joint, probe) and the model as of that point.
using StageCallback = std::function<void(const std::string&, const ModelState&)>;

// Full pipeline for any mode: initializes from cfg (seed overridden by
// plan.seed) and runs the stages the mode calls for.
TrainResult train_model(const TrainPlan& plan, const ModelConfig& cfg, const Dataset& train,
                        const StageCallback& on_stage = {});

}  // namespace dimml
