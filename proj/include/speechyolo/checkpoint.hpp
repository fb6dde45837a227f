#pragma once

#include <filesystem>

#include <json.hpp>

#include "speechyolo/features.hpp"
#include "speechyolo/lexicon.hpp"
#include "speechyolo/network.hpp"

namespace speechyolo {

inline constexpr int kCheckpointVersion = 1;

// On-disk layout: the 8-byte magic "SPYOLOCK", a little-endian uint64
// header length, a JSON header, then raw little-endian float32 tensor data.
// The header records the format version, backbone spec, head, feature
// config, lexicon, generator state, training progress, and for each tensor
// its name and element count in storage order.
struct Checkpoint {
  Model model;
  Lexicon lexicon;
  FeatureConfig features;
  TrainState state;
  nlohmann::json metadata = nlohmann::json::object();  // free-form run info
};

// Atomic: written to a temp file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace speechyolo
