#pragma once

// Joint global–local alignment between a composed query and a target image.
//
// Local: k sigmoid-gated spatial masks per level; each region descriptor is
// the positional mean of the gated map, the k descriptors are averaged and
// compared by cosine, and the per-level cosines are summed.
// Global: per-level cosine of mean-pooled maps, summed.
// Fused: S = β·S_local + (1−β)·S_global.

#include <random>
#include <span>
#include <vector>

#include "cir/features.hpp"
#include "cir/tensor.hpp"

namespace cir {

inline constexpr std::size_t kDefaultRegionCount = 4;
inline constexpr double kDefaultBeta = 0.6;

class FusionWeight {
 public:
  FusionWeight() = default;
  explicit FusionWeight(double beta);

  double beta() const { return beta_; }

 private:
  double beta_ = kDefaultBeta;
};

struct RegionMaskGenerator {
  Level level = Level::low;
  std::size_t k = kDefaultRegionCount;
  Variable weight;  // d×k, one column per mask
  Variable bias;    // k

  static RegionMaskGenerator initialize(Level level, std::size_t channels,
                                        std::size_t k, std::mt19937_64& rng);

  std::vector<NamedParameter> parameters() const;
};

struct RegionDescriptorSet {
  Level level = Level::low;
  Variable descriptors;  // k×d

  std::size_t k() const { return descriptors.value().rows(); }
};

/// (h·w)×k matrix; column j is mask j, sigmoid(x_p·w_j + b_j).
Variable region_masks(Level level, const Variable& x, const RegionMaskGenerator& gen);

/// Row j is mean_p(x_p · mask_j[p]), the positional mean of the gated map.
/// Masks are (h·w)×k and need not come from a generator.
Variable region_descriptors_from_masks(const Variable& x, const Variable& masks);

RegionDescriptorSet region_descriptors(Level level, const Variable& x,
                                       const RegionMaskGenerator& gen);

/// Mean over the k descriptors.
Variable aggregate_regions(const RegionDescriptorSet& set);

/// Σ_levels cos(mean_k q, mean_k t). Both spans are indexed by level.
Variable local_similarity(std::span<const RegionDescriptorSet> query,
                          std::span<const RegionDescriptorSet> target);

/// Σ_levels cos(mean_pool q, mean_pool t).
Variable global_similarity(const LevelVariables& query, const LevelVariables& target);

double fuse(double s_local, double s_global, FusionWeight w);
Variable fuse(const Variable& s_local, const Variable& s_global, FusionWeight w);

}  // namespace cir
