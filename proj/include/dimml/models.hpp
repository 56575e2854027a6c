#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dimml/tape.hpp"
#include "dimml/tensor.hpp"

namespace dimml {

// L-layer MLP with ReLU between layers and a linear final layer. Weights
// are stored input-major ([in x out]) so a forward pass is x·W + b.
struct EncoderParams {
    struct Layer {
        Tensor weight;
        Tensor bias;
    };
    std::vector<Layer> layers;

    int in_dim() const { return layers.front().weight.rows(); }
    int out_dim() const { return layers.back().weight.cols(); }
};

struct LinearHead {
    Tensor weight;  // [d_in x K]
    Tensor bias;    // [K]
};

struct ModelConfig {
    int num_modalities = 2;
    int num_classes = 6;
    std::vector<int> input_dims;
    std::vector<int> hidden_dims = {64};  // shared across modalities
    int feature_dim = 32;
    std::uint64_t seed = 0;
};

// Complete parameter set: per-modality encoders and heads, one shared
// classifier over single-modality features, one fusion classifier over
// the concatenation. effective_dims stays empty until separation runs.
struct ModelState {
    int num_modalities = 0;
    int num_classes = 0;
    int feature_dim = 0;
    std::vector<EncoderParams> encoders;
    std::vector<LinearHead> uni_heads;
    LinearHead shared_head;
    LinearHead fusion_head;
    std::string phase = "init";
    std::vector<std::vector<int>> effective_dims;
};

// Deterministic initialization: uniform(-s, s) weights with
// s = sqrt(6 / (fan_in + fan_out)), zero biases. Each component draws
// from its own seed stream, so modality i's encoder gets identical
// initial values whether or not the other modalities exist.
ModelState init_model(const ModelConfig& cfg);

// Plain forward passes (no gradient recording).
Tensor encode(const EncoderParams& enc, const Tensor& x);
Tensor head_logits(const LinearHead& head, const Tensor& h);
Tensor fuse_concat(const std::vector<Tensor>& features);

std::size_t param_count(const ModelState& model);

// Visits every parameter tensor with its canonical name (enc1.layer0.weight,
// uni2.bias, shared.weight, fusion.bias, ...) in a fixed order.
void for_each_param(ModelState& model,
                    const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_param(const ModelState& model,
                    const std::function<void(const std::string&, const Tensor&)>& fn);

// --- tape-side mirror ---

struct VarEncoder {
    struct Layer {
        Var weight;
        Var bias;
    };
    std::vector<Layer> layers;
};

struct VarHead {
    Var weight;
    Var bias;
};

struct VarModel {
    std::vector<VarEncoder> encoders;
    std::vector<VarHead> uni_heads;
    VarHead shared_head;
    VarHead fusion_head;
};

// Selects which components bind as trainable leaves; everything else
// binds as constants, so gradients cannot reach it by construction.
struct ComponentMask {
    std::vector<bool> encoders;
    std::vector<bool> uni_heads;
    bool shared_head = false;
    bool fusion_head = false;

    static ComponentMask none(int num_modalities);
    static ComponentMask all(int num_modalities);
    // Modality i's training view: its encoder, its head, the shared head.
    static ComponentMask modality(int num_modalities, int i);
};

VarModel bind_model(Tape& tape, const ModelState& model, const ComponentMask& mask);

Var encode_var(Tape& tape, const VarEncoder& enc, const Var& x);
Var head_logits_var(Tape& tape, const VarHead& head, const Var& h);

// Visits the bound Vars in the same order and naming as for_each_param.
void for_each_param_var(const VarModel& model,
                        const std::function<void(const std::string&, const Var&)>& fn);

}  // namespace dimml
