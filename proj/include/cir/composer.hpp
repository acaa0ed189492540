#pragma once

// Cross-modal composition: injects text token embeddings into the visual
// feature grid of the query image at one backbone level.
//
// Per level the block computes, over the flattened (h·w)×d positions X and
// tokens Z (n×d_T):
//
//   T  = Z·W_text + b_text                       (n×d)
//   X1 = X + Attn(LN1(X)·W_Q, T·W_K, T·W_V)·W_O
//   Y  = X1 + GELU(LN2(X1)·W_1 + b_1)·W_2 + b_2
//
// Single head, no positional terms, so the output is invariant to the order
// of the tokens.

#include <random>
#include <span>
#include <vector>

#include "cir/features.hpp"
#include "cir/tensor.hpp"

namespace cir {

inline constexpr double kInitStddev = 0.02;
inline constexpr std::size_t kFfnExpansion = 4;

struct CrossModalBlock {
  Level level = Level::low;
  LevelDims dims{};
  std::size_t text_dim = 0;

  Variable text_weight;  // d_T×d
  Variable text_bias;    // d
  Variable norm1_gain;
  Variable norm1_bias;
  Variable w_query;  // d×d
  Variable w_key;
  Variable w_value;
  Variable w_out;
  Variable norm2_gain;
  Variable norm2_bias;
  Variable ffn_in_weight;   // d×4d
  Variable ffn_in_bias;     // 4d
  Variable ffn_out_weight;  // 4d×d
  Variable ffn_out_bias;    // d

  /// Projections ~ N(0, 0.02), norm gains 1, biases 0.
  static CrossModalBlock initialize(Level level, LevelDims dims,
                                    std::size_t text_dim, std::mt19937_64& rng);

  std::vector<NamedParameter> parameters() const;
};

/// Differentiable composition of one level. `visual` is (h·w)×d.
Variable compose(Level level, const Variable& visual, const Variable& tokens,
                 const CrossModalBlock& block);

FeatureMap compose(Level level, const FeatureMap& visual,
                   const TokenEmbeddings& tokens, const CrossModalBlock& block);

/// Composes every level with the block registered for it. `blocks` must
/// hold exactly one block per level.
LevelVariables compose_all(const LevelVariables& visual, const Variable& tokens,
                           std::span<const CrossModalBlock> blocks);

MultiLevelFeatures compose_all(const MultiLevelFeatures& visual,
                               const TokenEmbeddings& tokens,
                               std::span<const CrossModalBlock> blocks);

}  // namespace cir
