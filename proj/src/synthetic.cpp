#include "cir/synthetic.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "cir/error.hpp"

namespace cir {

ModelDims desk_dims() {
  ModelDims dims;
  dims.levels = {LevelDims{8, 8, 16}, LevelDims{4, 4, 32}, LevelDims{2, 2, 64}};
  dims.text_dim = 16;
  return dims;
}

namespace {

void check_common(std::size_t classes, std::size_t entries_per_class,
                  std::size_t queries_per_class, const ModelDims& dims,
                  std::size_t text_tokens, double noise) {
  if (classes < 2) throw ArgumentError("synthetic: need at least 2 classes");
  if (entries_per_class == 0) throw ArgumentError("synthetic: entries_per_class must be > 0");
  if (!(noise >= 0.0)) throw ArgumentError("synthetic: noise must be >= 0");
  if (text_tokens == 0 || dims.text_dim == 0) {
    throw ArgumentError("synthetic: text tokens and width must be positive");
  }
  for (Level level : kLevels) {
    const auto& d = dims.at(level);
    if (d.h == 0 || d.w == 0 || d.d == 0) {
      throw ArgumentError(std::string("synthetic: invalid dims at level ") + level_name(level));
    }
  }
  (void)queries_per_class;
}

std::vector<std::string> class_names_for(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back(fmt::format("class{}", c));
  return names;
}

// Random direction of the given norm written into `out`.
void random_direction(std::span<double> out, double norm, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  double sq = 0.0;
  for (auto& v : out) {
    v = unit(rng);
    sq += v * v;
  }
  const double s = norm / std::sqrt(sq);
  for (auto& v : out) v *= s;
}

template <typename Container>
void add_noise(Container& values, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& v : values) v += dist(rng);
}

FeatureMap noisy_copy(const FeatureMap& proto, double sigma, std::mt19937_64& rng) {
  FeatureMap out = proto;
  auto data = out.data();
  add_noise(data, sigma, rng);
  return out;
}

TokenEmbeddings noisy_copy(const TokenEmbeddings& proto, double sigma, std::mt19937_64& rng) {
  TokenEmbeddings out = proto;
  auto data = out.data();
  add_noise(data, sigma, rng);
  return out;
}

TokenEmbeddings text_prototype(std::size_t tokens, std::size_t dim, std::mt19937_64& rng) {
  TokenEmbeddings t(tokens, dim, std::vector<double>(tokens * dim));
  for (std::size_t i = 0; i < tokens; ++i) {
    random_direction(t.data().subspan(i * dim, dim), 1.0, rng);
  }
  return t;
}

FeatureBundle assemble(const std::vector<MultiLevelFeatures>& image_protos,
                       const std::vector<TokenEmbeddings>& text_protos, std::size_t classes,
                       std::size_t entries_per_class, std::size_t queries_per_class,
                       const ModelDims& dims, double noise, std::mt19937_64& rng) {
  FeatureBundle b;
  b.dims = dims;
  b.class_names = class_names_for(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < entries_per_class; ++i) {
      DatabaseEntry e;
      e.id = fmt::format("{}-e{:03}", b.class_names[c], i);
      e.label = b.class_names[c];
      for (std::size_t l = 0; l < kNumLevels; ++l) {
        e.features[l] = noisy_copy(image_protos[c][l], noise, rng);
      }
      b.entries.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < queries_per_class; ++i) {
      QueryRecord q;
      q.id = fmt::format("{}-q{:03}", b.class_names[c], i);
      q.label = b.class_names[c];
      for (std::size_t l = 0; l < kNumLevels; ++l) {
        q.image_features[l] = noisy_copy(image_protos[c][l], noise, rng);
      }
      q.text = noisy_copy(text_protos[c], noise, rng);
      b.queries.push_back(std::move(q));
    }
  }
  return b;
}

}  // namespace

FeatureBundle generate_synthetic(const SyntheticSpec& spec) {
  check_common(spec.classes, spec.entries_per_class, spec.queries_per_class, spec.dims,
               spec.text_tokens, spec.noise);
  if (!(spec.signal > 0.0)) throw ArgumentError("synthetic: signal must be > 0");
  std::mt19937_64 rng(spec.seed);

  std::vector<MultiLevelFeatures> image_protos(spec.classes);
  std::vector<TokenEmbeddings> text_protos;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (Level level : kLevels) {
      const auto& d = spec.dims.at(level);
      FeatureMap proto(d);
      for (std::size_t p = 0; p < d.positions(); ++p) {
        random_direction(proto.data().subspan(p * d.d, d.d), spec.signal, rng);
      }
      image_protos[c][index_of(level)] = std::move(proto);
    }
    text_protos.push_back(text_prototype(spec.text_tokens, spec.dims.text_dim, rng));
  }

  FeatureBundle b = assemble(image_protos, text_protos, spec.classes, spec.entries_per_class,
                             spec.queries_per_class, spec.dims, spec.noise, rng);
  b.provenance = fmt::format(
      "synthetic seed={} classes={} entries_per_class={} queries_per_class={} tokens={} "
      "noise={} signal={}",
      spec.seed, spec.classes, spec.entries_per_class, spec.queries_per_class,
      spec.text_tokens, spec.noise, spec.signal);
  return b;
}

FeatureBundle generate_local_cue(const LocalCueSpec& spec) {
  check_common(spec.classes, spec.entries_per_class, spec.queries_per_class, spec.dims,
               spec.text_tokens, spec.noise);
  for (Level level : kLevels) {
    const auto& d = spec.dims.at(level);
    if (d.h < 2 || d.w < 2 || d.d < 2) {
      throw ArgumentError("local-cue bundle needs h, w, d >= 2 at every level");
    }
  }
  std::mt19937_64 rng(spec.seed);

  std::vector<MultiLevelFeatures> image_protos(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (Level level : kLevels) {
      const auto& d = spec.dims.at(level);
      std::vector<double> direction(d.d, 0.0);
      random_direction(std::span<double>(direction).subspan(1), 1.0, rng);

      const std::size_t qh = d.h / 2;
      const std::size_t qw = d.w / 2;
      const double inside = static_cast<double>(qh * qw);
      const double outside = static_cast<double>(d.positions()) - inside;
      // Zero positional sum of the class component.
      const double offset = -spec.cue * inside / outside;

      FeatureMap proto(d);
      for (std::size_t y = 0; y < d.h; ++y) {
        for (std::size_t x = 0; x < d.w; ++x) {
          const bool in_cue = y < qh && x < qw;
          const double amount = in_cue ? spec.cue : offset;
          for (std::size_t ch = 1; ch < d.d; ++ch) proto.at(y, x, ch) = amount * direction[ch];
          proto.at(y, x, 0) = in_cue ? spec.marker : 0.0;
        }
      }
      image_protos[c][index_of(level)] = std::move(proto);
    }
  }
  const TokenEmbeddings shared_text = text_prototype(spec.text_tokens, spec.dims.text_dim, rng);
  std::vector<TokenEmbeddings> text_protos(spec.classes, shared_text);

  FeatureBundle b = assemble(image_protos, text_protos, spec.classes, spec.entries_per_class,
                             spec.queries_per_class, spec.dims, spec.noise, rng);
  b.provenance = fmt::format(
      "local-cue seed={} classes={} entries_per_class={} queries_per_class={} tokens={} "
      "noise={} cue={} marker={}",
      spec.seed, spec.classes, spec.entries_per_class, spec.queries_per_class,
      spec.text_tokens, spec.noise, spec.cue, spec.marker);
  return b;
}

}  // namespace cir
