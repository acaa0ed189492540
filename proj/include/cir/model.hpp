#pragma once

// Trainable parameter set (one cross-modal block and one region mask
// generator per level) plus the scoring path that ties them together.

#include <array>
#include <cstdint>
#include <vector>

#include "cir/alignment.hpp"
#include "cir/composer.hpp"
#include "cir/features.hpp"

namespace cir {

struct ModelConfig {
  ModelDims dims{};
  std::size_t k = kDefaultRegionCount;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class Model {
 public:
  static Model initialize(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::span<const CrossModalBlock> blocks() const { return blocks_; }
  std::span<const RegionMaskGenerator> mask_generators() const { return masks_; }
  const CrossModalBlock& block(Level level) const { return blocks_[index_of(level)]; }
  const RegionMaskGenerator& mask_generator(Level level) const {
    return masks_[index_of(level)];
  }

  /// Every trainable tensor, in checkpoint order.
  std::vector<NamedParameter> parameters() const;

  /// Deep copy; the clone shares no parameter storage with this model.
  Model clone() const;

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  ModelConfig config_;
  std::array<CrossModalBlock, kNumLevels> blocks_;
  std::array<RegionMaskGenerator, kNumLevels> masks_;
};

/// The per-level vectors that scoring consumes: aggregated region
/// descriptors (local) and mean-pooled features (global). Computing them
/// once per item makes scoring a pair O(Σ d_i).
struct AlignmentView {
  LevelVariables regional;
  LevelVariables pooled;
};

AlignmentView alignment_view(const Model& model, const LevelVariables& features);

struct ScoreTerms {
  Variable fused;
  Variable local;
  Variable global;
};

ScoreTerms score_views(const AlignmentView& query, const AlignmentView& target,
                       FusionWeight w);

/// Composed query features for a query image and its text.
LevelVariables compose_query(const Model& model, const LevelVariables& image,
                             const Variable& tokens);

}  // namespace cir
