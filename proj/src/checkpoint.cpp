#include "dimml/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "dimml/errors.hpp"

namespace dimml {

namespace {

constexpr char kCheckpointMagic[9] = "DMLCKPT1";

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t tensor_bytes(const Tensor& t) { return t.numel() * sizeof(double); }

}  // namespace

void save_checkpoint(const std::string& path, const ModelState& model,
                     const nlohmann::json& config_echo) {
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["config"] = config_echo;
    manifest["num_modalities"] = model.num_modalities;
    manifest["num_classes"] = model.num_classes;
    manifest["feature_dim"] = model.feature_dim;
    manifest["phase"] = model.phase;
    manifest["effective_dims"] = model.effective_dims;

    nlohmann::json directory = nlohmann::json::array();
    std::uint64_t offset = 0;
    for_each_param(model, [&](const std::string& name, const Tensor& t) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        entry["offset"] = offset;
        entry["byte_length"] = tensor_bytes(t);
        directory.push_back(std::move(entry));
        offset += tensor_bytes(t);
    });
    manifest["tensors"] = std::move(directory);
    manifest["blob_bytes"] = offset;
    std::string manifest_bytes = manifest.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_checkpoint: cannot open " + path);
    os.write(kCheckpointMagic, 8);
    write_u64(os, manifest_bytes.size());
    os.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
    for_each_param(model, [&](const std::string&, const Tensor& t) {
        os.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(tensor_bytes(t)));
    });
    if (!os) throw io_error("save_checkpoint: write failed for " + path);
}

namespace {

// Pulls one named tensor out of the directory, erroring on absence.
Tensor take(std::map<std::string, Tensor>& tensors, const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw io_error("load_checkpoint: missing tensor " + name);
    Tensor t = std::move(it->second);
    tensors.erase(it);
    return t;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw io_error("load_checkpoint: " + path + " is not a checkpoint container");
    }
    std::uint64_t manifest_len = read_u64(is);
    std::string manifest_bytes(manifest_len, '\0');
    is.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_len));
    if (!is) throw io_error("load_checkpoint: truncated manifest in " + path);
    nlohmann::json manifest = nlohmann::json::parse(manifest_bytes, nullptr, false);
    if (manifest.is_discarded()) {
        throw io_error("load_checkpoint: corrupt manifest in " + path);
    }
    if (manifest.value("format_version", 0) != 1) {
        throw io_error("load_checkpoint: unsupported format version in " + path);
    }

    std::uint64_t blob_bytes = manifest.at("blob_bytes").get<std::uint64_t>();
    std::string blob(blob_bytes, '\0');
    is.read(blob.data(), static_cast<std::streamsize>(blob_bytes));
    if (!is || is.peek() != std::ifstream::traits_type::eof()) {
        throw io_error("load_checkpoint: blob size mismatch in " + path);
    }

    std::map<std::string, Tensor> tensors;
    std::uint64_t expected_offset = 0;
    for (const auto& entry : manifest.at("tensors")) {
        std::string name = entry.at("name").get<std::string>();
        std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        std::uint64_t off = entry.at("offset").get<std::uint64_t>();
        std::uint64_t len = entry.at("byte_length").get<std::uint64_t>();
        Tensor t = Tensor::zeros(shape);
        if (off != expected_offset || len != tensor_bytes(t) || off + len > blob_bytes) {
            throw io_error("load_checkpoint: tensor directory does not tile the blob at " + name);
        }
        std::memcpy(t.data().data(), blob.data() + off, len);
        expected_offset = off + len;
        tensors.emplace(std::move(name), std::move(t));
    }
    if (expected_offset != blob_bytes) {
        throw io_error("load_checkpoint: blob has bytes outside the tensor directory");
    }

    Checkpoint ckpt;
    ckpt.config_echo = manifest.value("config", nlohmann::json::object());
    ModelState& m = ckpt.model;
    m.num_modalities = manifest.at("num_modalities").get<int>();
    m.num_classes = manifest.at("num_classes").get<int>();
    m.feature_dim = manifest.at("feature_dim").get<int>();
    m.phase = manifest.at("phase").get<std::string>();
    m.effective_dims = manifest.at("effective_dims").get<std::vector<std::vector<int>>>();
    if (m.num_modalities < 1) throw io_error("load_checkpoint: bad modality count in " + path);

    for (int i = 1; i <= m.num_modalities; ++i) {
        std::string prefix = "enc" + std::to_string(i) + ".layer";
        EncoderParams enc;
        for (int l = 0; tensors.count(prefix + std::to_string(l) + ".weight"); ++l) {
            EncoderParams::Layer layer;
            layer.weight = take(tensors, prefix + std::to_string(l) + ".weight");
            layer.bias = take(tensors, prefix + std::to_string(l) + ".bias");
            enc.layers.push_back(std::move(layer));
        }
        if (enc.layers.empty()) {
            throw io_error("load_checkpoint: no layers for encoder " + std::to_string(i));
        }
        m.encoders.push_back(std::move(enc));
        std::string uni = "uni" + std::to_string(i);
        m.uni_heads.push_back({take(tensors, uni + ".weight"), take(tensors, uni + ".bias")});
    }
    m.shared_head = {take(tensors, "shared.weight"), take(tensors, "shared.bias")};
    m.fusion_head = {take(tensors, "fusion.weight"), take(tensors, "fusion.bias")};
    if (!tensors.empty()) {
        throw io_error("load_checkpoint: unexpected tensor " + tensors.begin()->first);
    }
    for (const auto& enc : m.encoders) {
        if (enc.out_dim() != m.feature_dim) {
            throw io_error("load_checkpoint: encoder output dim disagrees with feature_dim");
        }
    }
    return ckpt;
}

}  // namespace dimml
