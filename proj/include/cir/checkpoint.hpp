#pragma once

// Model checkpoints: "CIRC" container holding the model configuration, the
// fusion weight and one named block per parameter tensor.

#include <filesystem>

#include "cir/model.hpp"

namespace cir {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  FusionWeight weight;
};

void save_checkpoint(const Model& model, FusionWeight weight,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cir
