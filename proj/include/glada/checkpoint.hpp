#pragma once

// Checkpoint directory: net.json (role, config, array names/shapes) plus
// weights.bin, the arrays concatenated as f32le in declared order.

#include <filesystem>

#include <json.hpp>

#include "glada/nets.hpp"

namespace glada::nets {

struct Checkpoint {
  NetParams params;
  nlohmann::json config;
};

void write_checkpoint(const NetParams& params, const nlohmann::json& config,
                      const std::filesystem::path& dir);
Checkpoint read_checkpoint(const std::filesystem::path& dir);

void save(const Encoder& net, const std::filesystem::path& dir);
void save(const Classifier& net, const std::filesystem::path& dir);
void save(const Discriminator& net, const std::filesystem::path& dir);

Encoder load_encoder(const std::filesystem::path& dir);
Classifier load_classifier(const std::filesystem::path& dir);
Discriminator load_discriminator(const std::filesystem::path& dir);

}  // namespace glada::nets
