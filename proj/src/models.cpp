#include "dimml/models.hpp"

#include <cmath>

#include "dimml/errors.hpp"
#include "dimml/rng.hpp"

namespace dimml {

namespace {

// Seed stream tags per component; keeping them disjoint makes a model
// with fewer modalities initialize its surviving parts identically.
constexpr std::uint64_t kEncoderStream = 100;
constexpr std::uint64_t kUniHeadStream = 200;
constexpr std::uint64_t kSharedStream = 300;
constexpr std::uint64_t kFusionStream = 301;

Tensor glorot_uniform(Rng& rng, int fan_in, int fan_out) {
    double s = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out});
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = (rng.uniform() * 2.0 - 1.0) * s;
    return w;
}

LinearHead init_head(std::uint64_t seed, int d_in, int k) {
    Rng rng(seed);
    return LinearHead{glorot_uniform(rng, d_in, k), Tensor::zeros({k})};
}

}  // namespace

ModelState init_model(const ModelConfig& cfg) {
    if (cfg.num_modalities < 1) throw validation_error("model: num_modalities must be >= 1");
    if (cfg.num_classes < 2) throw validation_error("model: num_classes must be >= 2");
    if (cfg.feature_dim < 1) throw validation_error("model: feature_dim must be >= 1");
    if (static_cast<int>(cfg.input_dims.size()) != cfg.num_modalities) {
        throw validation_error("model: input_dims must list one entry per modality");
    }
    for (int h : cfg.hidden_dims) {
        if (h < 1) throw validation_error("model: hidden_dims entries must be >= 1");
    }

    ModelState m;
    m.num_modalities = cfg.num_modalities;
    m.num_classes = cfg.num_classes;
    m.feature_dim = cfg.feature_dim;
    for (int i = 0; i < cfg.num_modalities; ++i) {
        Rng rng(mix_seed(cfg.seed, kEncoderStream + static_cast<std::uint64_t>(i)));
        EncoderParams enc;
        int in = cfg.input_dims[static_cast<std::size_t>(i)];
        for (int h : cfg.hidden_dims) {
            enc.layers.push_back({glorot_uniform(rng, in, h), Tensor::zeros({h})});
            in = h;
        }
        enc.layers.push_back({glorot_uniform(rng, in, cfg.feature_dim), Tensor::zeros({cfg.feature_dim})});
        m.encoders.push_back(std::move(enc));
        m.uni_heads.push_back(init_head(mix_seed(cfg.seed, kUniHeadStream + static_cast<std::uint64_t>(i)),
                                        cfg.feature_dim, cfg.num_classes));
    }
    m.shared_head = init_head(mix_seed(cfg.seed, kSharedStream), cfg.feature_dim, cfg.num_classes);
    m.fusion_head = init_head(mix_seed(cfg.seed, kFusionStream),
                              cfg.num_modalities * cfg.feature_dim, cfg.num_classes);
    return m;
}

Tensor encode(const EncoderParams& enc, const Tensor& x) {
    if (enc.layers.empty()) throw validation_error("encode: encoder has no layers");
    if (x.cols() != enc.in_dim()) {
        throw validation_error("encode: input width " + std::to_string(x.cols()) +
                               " does not match encoder input " + std::to_string(enc.in_dim()));
    }
    Tensor h = x;
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        const auto& layer = enc.layers[l];
        Tensor out = Tensor::zeros({h.rows(), layer.weight.cols()});
        for (int r = 0; r < h.rows(); ++r) {
            for (int c = 0; c < layer.weight.cols(); ++c) {
                double acc = layer.bias[static_cast<std::size_t>(c)];
                for (int kk = 0; kk < h.cols(); ++kk) {
                    acc += h.at(r, kk) * layer.weight.at(kk, c);
                }
                out.at(r, c) = acc;
            }
        }
        if (l + 1 < enc.layers.size()) {
            for (std::size_t i = 0; i < out.numel(); ++i) {
                if (out[i] < 0.0) out[i] = 0.0;
            }
        }
        h = std::move(out);
    }
    return h;
}

Tensor head_logits(const LinearHead& head, const Tensor& h) {
    if (h.cols() != head.weight.rows()) {
        throw validation_error("head_logits: feature width " + std::to_string(h.cols()) +
                               " does not match head input " + std::to_string(head.weight.rows()));
    }
    Tensor z = Tensor::zeros({h.rows(), head.weight.cols()});
    for (int r = 0; r < h.rows(); ++r) {
        for (int c = 0; c < head.weight.cols(); ++c) {
            double acc = head.bias[static_cast<std::size_t>(c)];
            for (int kk = 0; kk < h.cols(); ++kk) {
                acc += h.at(r, kk) * head.weight.at(kk, c);
            }
            z.at(r, c) = acc;
        }
    }
    return z;
}

Tensor fuse_concat(const std::vector<Tensor>& features) {
    if (features.empty()) throw validation_error("fuse_concat: no features");
    int b = features.front().rows();
    int total = 0;
    for (const Tensor& f : features) {
        if (f.rows() != b) throw validation_error("fuse_concat: ragged batch dimensions");
        total += f.cols();
    }
    Tensor out = Tensor::zeros({b, total});
    int off = 0;
    for (const Tensor& f : features) {
        for (int r = 0; r < b; ++r) {
            for (int c = 0; c < f.cols(); ++c) out.at(r, off + c) = f.at(r, c);
        }
        off += f.cols();
    }
    return out;
}

std::size_t param_count(const ModelState& model) {
    std::size_t n = 0;
    for_each_param(model, [&n](const std::string&, const Tensor& t) { n += t.numel(); });
    return n;
}

namespace {

template <typename Model, typename Fn>
void visit_params(Model& model, const Fn& fn) {
    for (std::size_t i = 0; i < model.encoders.size(); ++i) {
        std::string prefix = "enc" + std::to_string(i + 1) + ".layer";
        auto& enc = model.encoders[i];
        for (std::size_t l = 0; l < enc.layers.size(); ++l) {
            fn(prefix + std::to_string(l) + ".weight", enc.layers[l].weight);
            fn(prefix + std::to_string(l) + ".bias", enc.layers[l].bias);
        }
    }
    for (std::size_t i = 0; i < model.uni_heads.size(); ++i) {
        std::string prefix = "uni" + std::to_string(i + 1) + ".";
        fn(prefix + "weight", model.uni_heads[i].weight);
        fn(prefix + "bias", model.uni_heads[i].bias);
    }
    fn("shared.weight", model.shared_head.weight);
    fn("shared.bias", model.shared_head.bias);
    fn("fusion.weight", model.fusion_head.weight);
    fn("fusion.bias", model.fusion_head.bias);
}

}  // namespace

void for_each_param(ModelState& model,
                    const std::function<void(const std::string&, Tensor&)>& fn) {
    visit_params(model, fn);
}

void for_each_param(const ModelState& model,
                    const std::function<void(const std::string&, const Tensor&)>& fn) {
    visit_params(model, fn);
}

ComponentMask ComponentMask::none(int num_modalities) {
    ComponentMask m;
    m.encoders.assign(static_cast<std::size_t>(num_modalities), false);
    m.uni_heads.assign(static_cast<std::size_t>(num_modalities), false);
    return m;
}

ComponentMask ComponentMask::all(int num_modalities) {
    ComponentMask m = none(num_modalities);
    m.encoders.assign(static_cast<std::size_t>(num_modalities), true);
    m.uni_heads.assign(static_cast<std::size_t>(num_modalities), true);
    m.shared_head = true;
    m.fusion_head = true;
    return m;
}

ComponentMask ComponentMask::modality(int num_modalities, int i) {
    ComponentMask m = none(num_modalities);
    m.encoders[static_cast<std::size_t>(i)] = true;
    m.uni_heads[static_cast<std::size_t>(i)] = true;
    m.shared_head = true;
    return m;
}

namespace {

Var bind_tensor(Tape& tape, const Tensor& t, bool trainable) {
    return trainable ? tape.leaf(t) : Tape::constant(t);
}

VarHead bind_head(Tape& tape, const LinearHead& head, bool trainable) {
    return VarHead{bind_tensor(tape, head.weight, trainable),
                   bind_tensor(tape, head.bias, trainable)};
}

}  // namespace

VarModel bind_model(Tape& tape, const ModelState& model, const ComponentMask& mask) {
    if (mask.encoders.size() != model.encoders.size() ||
        mask.uni_heads.size() != model.uni_heads.size()) {
        throw validation_error("bind_model: mask does not match modality count");
    }
    VarModel vm;
    for (std::size_t i = 0; i < model.encoders.size(); ++i) {
        VarEncoder enc;
        for (const auto& layer : model.encoders[i].layers) {
            enc.layers.push_back({bind_tensor(tape, layer.weight, mask.encoders[i]),
                                  bind_tensor(tape, layer.bias, mask.encoders[i])});
        }
        vm.encoders.push_back(std::move(enc));
        vm.uni_heads.push_back(bind_head(tape, model.uni_heads[i], mask.uni_heads[i]));
    }
    vm.shared_head = bind_head(tape, model.shared_head, mask.shared_head);
    vm.fusion_head = bind_head(tape, model.fusion_head, mask.fusion_head);
    return vm;
}

Var encode_var(Tape& tape, const VarEncoder& enc, const Var& x) {
    if (enc.layers.empty()) throw validation_error("encode_var: encoder has no layers");
    Var h = x;
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        h = tape.add_rowvec(tape.matmul(h, enc.layers[l].weight), enc.layers[l].bias);
        if (l + 1 < enc.layers.size()) h = tape.relu(h);
    }
    return h;
}

Var head_logits_var(Tape& tape, const VarHead& head, const Var& h) {
    return tape.add_rowvec(tape.matmul(h, head.weight), head.bias);
}

void for_each_param_var(const VarModel& model,
                        const std::function<void(const std::string&, const Var&)>& fn) {
    visit_params(model, fn);
}

}  // namespace dimml
