#include "cir/alignment.hpp"

#include <cmath>
#include <string>

#include "cir/composer.hpp"
#include "cir/error.hpp"

namespace cir {

FusionWeight::FusionWeight(double beta) : beta_(beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ConfigError("fusion weight beta must lie in [0, 1], got " +
                      std::to_string(beta));
  }
}

RegionMaskGenerator RegionMaskGenerator::initialize(Level level, std::size_t channels,
                                                    std::size_t k,
                                                    std::mt19937_64& rng) {
  if (k == 0) throw ConfigError("region mask count k must be positive");
  if (channels == 0) throw ConfigError("region mask generator needs channels > 0");
  std::normal_distribution<double> dist(0.0, kInitStddev);
  Tensor w(Shape{channels, k});
  for (auto& v : w.data()) v = dist(rng);
  RegionMaskGenerator gen;
  gen.level = level;
  gen.k = k;
  gen.weight = parameter(std::move(w));
  gen.bias = parameter(Tensor(Shape{k}));
  return gen;
}

std::vector<NamedParameter> RegionMaskGenerator::parameters() const {
  const std::string prefix = std::string("alignment.") + level_name(level) + ".";
  return {{prefix + "mask_weight", weight}, {prefix + "mask_bias", bias}};
}

Variable region_masks(Level level, const Variable& x, const RegionMaskGenerator& gen) {
  if (gen.level != level) {
    throw ConfigError(std::string("region_masks: generator for level ") +
                      level_name(gen.level) + " applied to level " + level_name(level));
  }
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != gen.weight.value().rows()) {
    throw DimensionError(std::string("region_masks: level ") + level_name(level) +
                         " expects " + std::to_string(gen.weight.value().rows()) +
                         " channels, got " + shape_string(xv.shape()));
  }
  return sigmoid(add_row_bias(matmul(x, gen.weight), gen.bias));
}

Variable region_descriptors_from_masks(const Variable& x, const Variable& masks) {
  const Tensor& xv = x.value();
  const Tensor& mv = masks.value();
  if (xv.rank() != 2 || mv.rank() != 2 || xv.rows() != mv.rows()) {
    throw DimensionError("region descriptors: masks " + shape_string(mv.shape()) +
                         " do not cover feature positions " + shape_string(xv.shape()));
  }
  if (xv.rows() == 0) throw DimensionError("region descriptors: empty feature map");
  // (1/P)·Mᵀ X is row-wise mean_pool(x ⊙ mask_j).
  return scale(matmul(transpose(masks), x), 1.0 / static_cast<double>(xv.rows()));
}

RegionDescriptorSet region_descriptors(Level level, const Variable& x,
                                       const RegionMaskGenerator& gen) {
  return {level, region_descriptors_from_masks(x, region_masks(level, x, gen))};
}

Variable aggregate_regions(const RegionDescriptorSet& set) {
  return mean_rows(set.descriptors);
}

Variable local_similarity(std::span<const RegionDescriptorSet> query,
                          std::span<const RegionDescriptorSet> target) {
  if (query.size() != kNumLevels || target.size() != kNumLevels) {
    throw DimensionError("local_similarity: expected one descriptor set per level");
  }
  Variable total = constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    if (query[i].k() != target[i].k()) {
      throw DimensionError(std::string("local_similarity: level ") +
                           level_name(kLevels[i]) + " has k=" +
                           std::to_string(query[i].k()) + " vs k=" +
                           std::to_string(target[i].k()));
    }
    total = add(total, cosine_similarity(aggregate_regions(query[i]),
                                         aggregate_regions(target[i])));
  }
  return total;
}

Variable global_similarity(const LevelVariables& query, const LevelVariables& target) {
  Variable total = constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    if (query[i].shape() != target[i].shape()) {
      throw DimensionError(std::string("global_similarity: level ") +
                           level_name(kLevels[i]) + " shapes " +
                           shape_string(query[i].shape()) + " vs " +
                           shape_string(target[i].shape()));
    }
    total = add(total, cosine_similarity(mean_rows(query[i]), mean_rows(target[i])));
  }
  return total;
}

double fuse(double s_local, double s_global, FusionWeight w) {
  return w.beta() * s_local + (1.0 - w.beta()) * s_global;
}

Variable fuse(const Variable& s_local, const Variable& s_global, FusionWeight w) {
  return add(scale(s_local, w.beta()), scale(s_global, 1.0 - w.beta()));
}

}  // namespace cir
