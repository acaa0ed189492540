#include "cir/composer.hpp"

#include <string>

#include "cir/error.hpp"

namespace cir {

namespace {

Variable normal_param(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, kInitStddev);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return parameter(std::move(t));
}

Variable filled_param(std::size_t n, double value) {
  return parameter(Tensor(Shape{n}, value));
}

}  // namespace

CrossModalBlock CrossModalBlock::initialize(Level level, LevelDims dims,
                                            std::size_t text_dim,
                                            std::mt19937_64& rng) {
  if (dims.positions() == 0 || dims.d == 0 || text_dim == 0) {
    throw ConfigError("cross-modal block needs nonzero dims, got " +
                      to_string(dims) + " with d_T=" + std::to_string(text_dim));
  }
  const std::size_t d = dims.d;
  const std::size_t hidden = kFfnExpansion * d;
  CrossModalBlock b;
  b.level = level;
  b.dims = dims;
  b.text_dim = text_dim;
  b.text_weight = normal_param({text_dim, d}, rng);
  b.text_bias = filled_param(d, 0.0);
  b.norm1_gain = filled_param(d, 1.0);
  b.norm1_bias = filled_param(d, 0.0);
  b.w_query = normal_param({d, d}, rng);
  b.w_key = normal_param({d, d}, rng);
  b.w_value = normal_param({d, d}, rng);
  b.w_out = normal_param({d, d}, rng);
  b.norm2_gain = filled_param(d, 1.0);
  b.norm2_bias = filled_param(d, 0.0);
  b.ffn_in_weight = normal_param({d, hidden}, rng);
  b.ffn_in_bias = filled_param(hidden, 0.0);
  b.ffn_out_weight = normal_param({hidden, d}, rng);
  b.ffn_out_bias = filled_param(d, 0.0);
  return b;
}

std::vector<NamedParameter> CrossModalBlock::parameters() const {
  const std::string prefix = std::string("composer.") + level_name(level) + ".";
  return {
      {prefix + "text_weight", text_weight},
      {prefix + "text_bias", text_bias},
      {prefix + "norm1_gain", norm1_gain},
      {prefix + "norm1_bias", norm1_bias},
      {prefix + "w_query", w_query},
      {prefix + "w_key", w_key},
      {prefix + "w_value", w_value},
      {prefix + "w_out", w_out},
      {prefix + "norm2_gain", norm2_gain},
      {prefix + "norm2_bias", norm2_bias},
      {prefix + "ffn_in_weight", ffn_in_weight},
      {prefix + "ffn_in_bias", ffn_in_bias},
      {prefix + "ffn_out_weight", ffn_out_weight},
      {prefix + "ffn_out_bias", ffn_out_bias},
  };
}

Variable compose(Level level, const Variable& visual, const Variable& tokens,
                 const CrossModalBlock& block) {
  if (block.level != level) {
    throw ConfigError(std::string("compose: block for level ") +
                      level_name(block.level) + " applied to level " +
                      level_name(level));
  }
  const Tensor& x = visual.value();
  const Tensor& z = tokens.value();
  if (x.rank() != 2 || x.cols() != block.dims.d) {
    throw DimensionError(std::string("compose: level ") + level_name(level) +
                         " expects " + std::to_string(block.dims.d) +
                         " channels, got " + shape_string(x.shape()));
  }
  if (z.rank() != 2 || z.cols() != block.text_dim) {
    throw DimensionError("compose: token width " + shape_string(z.shape()) +
                         " does not match text projection input " +
                         std::to_string(block.text_dim));
  }
  if (z.rows() == 0) throw DimensionError("compose: no text tokens");

  Variable text = add_row_bias(matmul(tokens, block.text_weight), block.text_bias);
  Variable normed = layer_norm_rows(visual, block.norm1_gain, block.norm1_bias);
  Variable attended = scaled_dot_attention(matmul(normed, block.w_query),
                                           matmul(text, block.w_key),
                                           matmul(text, block.w_value));
  Variable mixed = add(visual, matmul(attended, block.w_out));

  Variable normed2 = layer_norm_rows(mixed, block.norm2_gain, block.norm2_bias);
  Variable hidden = gelu(add_row_bias(matmul(normed2, block.ffn_in_weight),
                                      block.ffn_in_bias));
  Variable ffn = add_row_bias(matmul(hidden, block.ffn_out_weight), block.ffn_out_bias);
  return add(mixed, ffn);
}

FeatureMap compose(Level level, const FeatureMap& visual,
                   const TokenEmbeddings& tokens, const CrossModalBlock& block) {
  NoGradGuard no_grad;
  Variable out = compose(level, visual.as_variable(), tokens.as_variable(), block);
  return FeatureMap(visual.dims(), out.value().values());
}

namespace {

std::array<const CrossModalBlock*, kNumLevels> blocks_by_level(
    std::span<const CrossModalBlock> blocks) {
  std::array<const CrossModalBlock*, kNumLevels> found{};
  for (const auto& block : blocks) {
    auto& slot = found[index_of(block.level)];
    if (slot != nullptr) {
      throw ConfigError(std::string("compose_all: duplicate block for level ") +
                        level_name(block.level));
    }
    slot = &block;
  }
  for (Level level : kLevels) {
    if (found[index_of(level)] == nullptr) {
      throw ConfigError(std::string("compose_all: missing block for level ") +
                        level_name(level));
    }
  }
  return found;
}

}  // namespace

LevelVariables compose_all(const LevelVariables& visual, const Variable& tokens,
                           std::span<const CrossModalBlock> blocks) {
  const auto by_level = blocks_by_level(blocks);
  LevelVariables out;
  for (Level level : kLevels) {
    const std::size_t i = index_of(level);
    out[i] = compose(level, visual[i], tokens, *by_level[i]);
  }
  return out;
}

MultiLevelFeatures compose_all(const MultiLevelFeatures& visual,
                               const TokenEmbeddings& tokens,
                               std::span<const CrossModalBlock> blocks) {
  const auto by_level = blocks_by_level(blocks);
  MultiLevelFeatures out;
  for (Level level : kLevels) {
    const std::size_t i = index_of(level);
    out[i] = compose(level, visual[i], tokens, *by_level[i]);
  }
  return out;
}

}  // namespace cir
