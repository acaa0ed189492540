#pragma once

// Desk-scale stand-ins for real extracted features.

#include <cstdint>

#include "cir/bundle.hpp"

namespace cir {

/// L 8×8×16, M 4×4×32, H 2×2×64, d_T 16.
ModelDims desk_dims();

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t classes = 3;
  std::size_t entries_per_class = 60;
  std::size_t queries_per_class = 15;
  ModelDims dims = desk_dims();
  std::size_t text_tokens = 8;
  double noise = 0.25;
  /// Norm of the class prototype at every spatial position.
  double signal = 0.5;
};

/// Per class and level a prototype grid whose position vectors are random
/// directions of norm `signal`, and a text prototype of unit-norm tokens.
/// Every entry and query image is its class prototype plus N(0, noise²)
/// per value; query texts are the class text prototype plus the same noise.
FeatureBundle generate_synthetic(const SyntheticSpec& spec);

struct LocalCueSpec {
  std::uint64_t seed = 0;
  std::size_t classes = 3;
  std::size_t entries_per_class = 60;
  std::size_t queries_per_class = 15;
  ModelDims dims = desk_dims();
  std::size_t text_tokens = 8;
  double noise = 0.25;
  /// Strength of the class direction inside the cue quadrant.
  double cue = 1.0;
  /// Value of channel 0 inside the cue quadrant (0 elsewhere).
  double marker = 2.0;
};

/// Class identity lives only in the top-left quadrant of every level. The
/// class direction is +cue inside the quadrant and is offset elsewhere so
/// the positional mean carries no class information; channel 0 marks the
/// quadrant. Query texts share one prototype across classes.
FeatureBundle generate_local_cue(const LocalCueSpec& spec);

}  // namespace cir
