#include "cir/features.hpp"

#include "cir/error.hpp"

namespace cir {

const char* level_name(Level level) {
  switch (level) {
    case Level::low: return "L";
    case Level::mid: return "M";
    case Level::high: return "H";
  }
  return "?";
}

std::string to_string(const LevelDims& dims) {
  return std::to_string(dims.h) + "x" + std::to_string(dims.w) + "x" +
         std::to_string(dims.d);
}

FeatureMap::FeatureMap(LevelDims dims)
    : dims_(dims), values_(Shape{dims.h, dims.w, dims.d}) {}

FeatureMap::FeatureMap(LevelDims dims, std::vector<double> values)
    : dims_(dims), values_(Shape{dims.h, dims.w, dims.d}, std::move(values)) {}

Tensor FeatureMap::positions() const {
  return values_.reshaped(Shape{dims_.positions(), dims_.d});
}

LevelVariables as_variables(const MultiLevelFeatures& features) {
  LevelVariables out;
  for (std::size_t i = 0; i < kNumLevels; ++i) out[i] = features[i].as_variable();
  return out;
}

MultiLevelFeatures to_feature_maps(const LevelVariables& vars, const ModelDims& dims) {
  MultiLevelFeatures out;
  for (Level level : kLevels) {
    const std::size_t i = index_of(level);
    out[i] = FeatureMap(dims.at(level), vars[i].value().values());
  }
  return out;
}

void check_dims(const MultiLevelFeatures& features, const ModelDims& dims,
                const std::string& owner) {
  for (Level level : kLevels) {
    const auto& got = features[index_of(level)].dims();
    if (got != dims.at(level)) {
      throw DimensionError(owner + ": level " + level_name(level) + " is " +
                           to_string(got) + ", expected " +
                           to_string(dims.at(level)));
    }
  }
}

TokenEmbeddings::TokenEmbeddings(std::size_t tokens, std::size_t dim,
                                 std::vector<double> values)
    : values_(Shape{tokens, dim}, std::move(values)) {}

}  // namespace cir
