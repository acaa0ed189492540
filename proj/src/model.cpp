#include "cir/model.hpp"

#include "cir/error.hpp"

namespace cir {

Model Model::initialize(const ModelConfig& config) {
  if (config.k == 0) throw ConfigError("model: k must be positive");
  Model m;
  m.config_ = config;
  std::mt19937_64 rng(config.seed);
  for (Level level : kLevels) {
    m.blocks_[index_of(level)] =
        CrossModalBlock::initialize(level, config.dims.at(level), config.dims.text_dim, rng);
  }
  for (Level level : kLevels) {
    m.masks_[index_of(level)] =
        RegionMaskGenerator::initialize(level, config.dims.at(level).d, config.k, rng);
  }
  return m;
}

std::vector<NamedParameter> Model::parameters() const {
  std::vector<NamedParameter> out;
  for (const auto& b : blocks_) {
    auto p = b.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  for (const auto& g : masks_) {
    auto p = g.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<Tensor> Model::snapshot() const {
  std::vector<Tensor> out;
  for (const auto& p : parameters()) out.push_back(p.value.value());
  return out;
}

void Model::restore(const std::vector<Tensor>& values) {
  auto params = parameters();
  if (values.size() != params.size()) {
    throw DimensionError("model restore: " + std::to_string(values.size()) +
                         " tensors for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].shape() != params[i].value.shape()) {
      throw DimensionError("model restore: " + params[i].name + " expects " +
                           shape_string(params[i].value.shape()) + ", got " +
                           shape_string(values[i].shape()));
    }
    params[i].value.mutable_value() = values[i];
  }
}

Model Model::clone() const {
  // Fresh parameter nodes with the same layout, then copy values in.
  Model copy = Model::initialize(config_);
  copy.restore(snapshot());
  return copy;
}

AlignmentView alignment_view(const Model& model, const LevelVariables& features) {
  AlignmentView view;
  for (Level level : kLevels) {
    const std::size_t i = index_of(level);
    const auto expected = model.config().dims.at(level);
    const Tensor& x = features[i].value();
    if (x.rank() != 2 || x.rows() != expected.positions() || x.cols() != expected.d) {
      throw ConfigError(std::string("features at level ") + level_name(level) + " are " +
                        shape_string(x.shape()) + ", model expects " + to_string(expected));
    }
    auto set = region_descriptors(level, features[i], model.mask_generator(level));
    view.regional[i] = aggregate_regions(set);
    view.pooled[i] = mean_rows(features[i]);
  }
  return view;
}

ScoreTerms score_views(const AlignmentView& query, const AlignmentView& target,
                       FusionWeight w) {
  Variable local = constant(Tensor::scalar(0.0));
  Variable global = constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    local = add(local, cosine_similarity(query.regional[i], target.regional[i]));
    global = add(global, cosine_similarity(query.pooled[i], target.pooled[i]));
  }
  Variable fused = fuse(local, global, w);
  return {fused, local, global};
}

LevelVariables compose_query(const Model& model, const LevelVariables& image,
                             const Variable& tokens) {
  return compose_all(image, tokens, model.blocks());
}

}  // namespace cir
