#pragma once

// Feature containers shared by every module: one spatial grid per backbone
// level and the token matrix produced by the text encoder.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "cir/tensor.hpp"

namespace cir {

enum class Level : std::uint8_t { low = 0, mid = 1, high = 2 };

inline constexpr std::size_t kNumLevels = 3;
inline constexpr std::array<Level, kNumLevels> kLevels{Level::low, Level::mid,
                                                       Level::high};

inline std::size_t index_of(Level level) { return static_cast<std::size_t>(level); }
const char* level_name(Level level);  // "L", "M", "H"

struct LevelDims {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t d = 0;

  std::size_t positions() const { return h * w; }
  std::size_t size() const { return h * w * d; }
  friend bool operator==(const LevelDims&, const LevelDims&) = default;
};

std::string to_string(const LevelDims& dims);

/// Dimensions of every input the model consumes.
struct ModelDims {
  std::array<LevelDims, kNumLevels> levels{};
  std::size_t text_dim = 0;

  const LevelDims& at(Level level) const { return levels[index_of(level)]; }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// h×w×d grid at one level, row-major over (y, x, channel).
class FeatureMap {
 public:
  FeatureMap() = default;
  explicit FeatureMap(LevelDims dims);
  FeatureMap(LevelDims dims, std::vector<double> values);

  const LevelDims& dims() const { return dims_; }
  const Tensor& tensor() const { return values_; }
  std::span<double> data() { return values_.data(); }
  std::span<const double> data() const { return values_.data(); }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return values_[(y * dims_.w + x) * dims_.d + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return values_[(y * dims_.w + x) * dims_.d + c];
  }

  /// Positions flattened to a (h·w)×d matrix.
  Tensor positions() const;
  Variable as_variable() const { return constant(positions()); }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  LevelDims dims_{};
  Tensor values_{Shape{0, 0, 0}};
};

using MultiLevelFeatures = std::array<FeatureMap, kNumLevels>;

/// Per-level (h·w)×d matrices; the differentiable form of MultiLevelFeatures.
using LevelVariables = std::array<Variable, kNumLevels>;

LevelVariables as_variables(const MultiLevelFeatures& features);
MultiLevelFeatures to_feature_maps(const LevelVariables& vars, const ModelDims& dims);

/// Checks every level against the declared dims.
void check_dims(const MultiLevelFeatures& features, const ModelDims& dims,
                const std::string& owner);

/// n×d_T token matrix.
class TokenEmbeddings {
 public:
  TokenEmbeddings() = default;
  TokenEmbeddings(std::size_t tokens, std::size_t dim, std::vector<double> values);

  std::size_t tokens() const { return values_.rows(); }
  std::size_t dim() const { return values_.cols(); }
  const Tensor& tensor() const { return values_; }
  std::span<double> data() { return values_.data(); }
  std::span<const double> data() const { return values_.data(); }
  Variable as_variable() const { return constant(values_); }

  friend bool operator==(const TokenEmbeddings&, const TokenEmbeddings&) = default;

 private:
  Tensor values_{Shape{0, 0}};
};

}  // namespace cir
