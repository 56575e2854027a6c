#pragma once

#include <string>

#include <json.hpp>

#include "dimml/models.hpp"

namespace dimml {

struct Checkpoint {
    ModelState model;
    nlohmann::json config_echo;
};

// Container layout: 8-byte magic, u64 manifest length, JSON manifest,
// then one blob of concatenated little-endian float64 tensors. The
// manifest's tensor directory (name, shape, offset, byte_length) tiles
// the blob exactly; loading reproduces the model bitwise.
void save_checkpoint(const std::string& path, const ModelState& model,
                     const nlohmann::json& config_echo);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dimml
