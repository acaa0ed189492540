#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>

#include "cir/bundle.hpp"
#include "cir/checkpoint.hpp"
#include "cir/error.hpp"
#include "cir/synthetic.hpp"

using namespace cir;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "cir_format_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelDims small_dims() {
  ModelDims dims;
  dims.levels = {LevelDims{3, 3, 4}, LevelDims{2, 2, 6}, LevelDims{1, 1, 8}};
  dims.text_dim = 5;
  return dims;
}

FeatureBundle small_bundle(std::uint64_t seed, double noise = 0.3) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.entries_per_class = 4;
  spec.queries_per_class = 2;
  spec.dims = small_dims();
  spec.text_tokens = 3;
  spec.noise = noise;
  return generate_synthetic(spec);
}

std::vector<double> pooled(const FeatureMap& m) {
  const auto& d = m.dims();
  std::vector<double> out(d.d, 0.0);
  for (std::size_t y = 0; y < d.h; ++y) {
    for (std::size_t x = 0; x < d.w; ++x) {
      for (std::size_t c = 0; c < d.d; ++c) out[c] += m.at(y, x, c);
    }
  }
  for (auto& v : out) v /= static_cast<double>(d.positions());
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace

TEST_CASE("bundle round trip is bit-identical") {
  const auto b = small_bundle(1);
  const auto path = temp_path("round.cirb");
  save_bundle(b, path);
  const auto loaded = load_bundle(path);
  CHECK(loaded.dims == b.dims);
  CHECK(loaded.class_names == b.class_names);
  CHECK(loaded.provenance == b.provenance);
  REQUIRE(loaded.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < b.entries.size(); ++i) {
    CHECK(loaded.entries[i].id == b.entries[i].id);
    CHECK(loaded.entries[i].label == b.entries[i].label);
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      const auto x = loaded.entries[i].features[l].data();
      const auto y = b.entries[i].features[l].data();
      CHECK(std::memcmp(x.data(), y.data(), x.size_bytes()) == 0);
    }
  }
  REQUIRE(loaded.queries.size() == b.queries.size());
  for (std::size_t i = 0; i < b.queries.size(); ++i) {
    CHECK(loaded.queries[i].text == b.queries[i].text);
    CHECK(loaded.queries[i].image_features == b.queries[i].image_features);
  }
  const auto again = temp_path("round2.cirb");
  save_bundle(loaded, again);
  CHECK(read_bytes(path) == read_bytes(again));
}

TEST_CASE("bundle rejects a zeroed magic") {
  const auto path = temp_path("magic.cirb");
  save_bundle(small_bundle(2), path);
  auto bytes = read_bytes(path);
  std::fill(bytes.begin(), bytes.begin() + 8, 0);
  write_bytes(path, bytes);
  CHECK_THROWS_AS(load_bundle(path), FormatError);
}

TEST_CASE("bundle truncation names the entry") {
  auto b = small_bundle(3);
  b.dims.levels[0] = LevelDims{8, 8, 32};
  for (auto& e : b.entries) e.features[0] = FeatureMap(b.dims.levels[0]);
  for (auto& q : b.queries) q.image_features[0] = FeatureMap(b.dims.levels[0]);
  const auto path = temp_path("trunc.cirb");
  save_bundle(b, path);
  auto bytes = read_bytes(path);
  // Cut inside the third entry's low-level map.
  const std::size_t per_entry = (8 * 8 * 32 + 2 * 2 * 6 + 8) * 8;
  const std::size_t payload_start = bytes.size() - (b.entries.size() * per_entry +
                                                    b.queries.size() * (per_entry + 15 * 8));
  bytes.resize(payload_start + 2 * per_entry + 100);
  write_bytes(path, bytes);
  try {
    load_bundle(path);
    FAIL("expected a corruption error");
  } catch (const CorruptionError& e) {
    CHECK(std::string(e.what()).find(b.entries[2].id) != std::string::npos);
  }
}

TEST_CASE("bundle version and trailing bytes") {
  const auto path = temp_path("version.cirb");
  save_bundle(small_bundle(4), path);
  auto bytes = read_bytes(path);
  auto bumped = bytes;
  bumped[4] = 2;
  write_bytes(path, bumped);
  CHECK_THROWS_AS(load_bundle(path), VersionError);
  auto longer = bytes;
  longer.insert(longer.end(), 8, 0);
  write_bytes(path, longer);
  CHECK_THROWS_AS(load_bundle(path), CorruptionError);
  CHECK_THROWS_AS(load_bundle(temp_path("missing.cirb")), IoError);
}

TEST_CASE("bundle validation") {
  auto b = small_bundle(5);
  CHECK_NOTHROW(b.validate());
  auto dup = b;
  dup.entries[1].id = dup.entries[0].id;
  CHECK_THROWS_AS(dup.validate(), FormatError);
  auto unknown = b;
  unknown.queries[0].label = "nope";
  CHECK_THROWS_AS(unknown.validate(), FormatError);
  auto wrong = b;
  wrong.queries[0].text = TokenEmbeddings(2, 4, std::vector<double>(8));
  CHECK_THROWS_AS(wrong.validate(), FormatError);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  const Model model = Model::initialize({small_dims(), 3, 17});
  const auto path = temp_path("model.circ");
  save_checkpoint(model, FusionWeight(0.25), path);
  const auto ckpt = load_checkpoint(path);
  CHECK(ckpt.model.config() == model.config());
  CHECK(ckpt.weight.beta() == 0.25);
  CHECK(ckpt.model.snapshot() == model.snapshot());
  const auto again = temp_path("model2.circ");
  save_checkpoint(ckpt.model, ckpt.weight, again);
  CHECK(read_bytes(path) == read_bytes(again));
}

TEST_CASE("checkpoint corruption") {
  const Model model = Model::initialize({small_dims(), 4, 1});
  const auto path = temp_path("bad.circ");
  save_checkpoint(model, FusionWeight(), path);
  const auto bytes = read_bytes(path);

  auto cut = bytes;
  cut.resize(bytes.size() - 20);
  write_bytes(path, cut);
  CHECK_THROWS_AS(load_checkpoint(path), CorruptionError);

  auto magic = bytes;
  magic[0] = 'X';
  write_bytes(path, magic);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  // A bundle is not a checkpoint.
  const auto bundle_path = temp_path("not_a_checkpoint.cirb");
  save_bundle(small_bundle(6), bundle_path);
  CHECK_THROWS_AS(load_checkpoint(bundle_path), FormatError);
}

TEST_CASE("synthetic bundles are deterministic") {
  const auto a = small_bundle(7);
  const auto b = small_bundle(7);
  const auto c = small_bundle(8);
  CHECK(a.entries[3].features == b.entries[3].features);
  CHECK(a.queries[1].text == b.queries[1].text);
  CHECK_FALSE(a.entries[3].features == c.entries[3].features);
  CHECK(a.provenance.find("seed=7") != std::string::npos);
}

TEST_CASE("zero noise gives identical class members") {
  const auto b = small_bundle(9, 0.0);
  for (const auto& e : b.entries) {
    for (const auto& other : b.entries) {
      if (e.label != other.label) continue;
      CHECK(e.features == other.features);
      for (std::size_t l = 0; l < kNumLevels; ++l) {
        CHECK(cosine(pooled(e.features[l]), pooled(other.features[l])) ==
              doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("pooled features are closer within a class") {
  SyntheticSpec spec;
  spec.seed = 10;
  spec.classes = 3;
  spec.noise = 0.1;
  spec.dims.levels[2] = LevelDims{2, 2, 32};
  const auto b = generate_synthetic(spec);
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < b.entries.size(); ++i) {
    for (std::size_t j = i + 1; j < b.entries.size(); ++j) {
      const double c =
          cosine(pooled(b.entries[i].features[2]), pooled(b.entries[j].features[2]));
      if (b.entries[i].label == b.entries[j].label) {
        intra += c;
        ++n_intra;
      } else {
        inter += c;
        ++n_inter;
      }
    }
  }
  CHECK(intra / n_intra > inter / n_inter);
}

TEST_CASE("synthetic argument checks") {
  SyntheticSpec spec;
  spec.classes = 1;
  CHECK_THROWS_AS(generate_synthetic(spec), ArgumentError);
  spec = SyntheticSpec{};
  spec.noise = -0.1;
  CHECK_THROWS_AS(generate_synthetic(spec), ArgumentError);
  spec = SyntheticSpec{};
  spec.dims.levels[1].w = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), ArgumentError);
}

TEST_CASE("local-cue bundles hide the class from pooled statistics") {
  LocalCueSpec spec;
  spec.noise = 0.0;
  spec.entries_per_class = 2;
  spec.queries_per_class = 1;
  const auto b = generate_local_cue(spec);
  std::map<std::string, const DatabaseEntry*> first;
  for (const auto& e : b.entries) first.emplace(e.label, &e);
  REQUIRE(first.size() == 3);
  const auto& a = *first.begin()->second;
  const auto& c = *std::next(first.begin())->second;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    const auto pa = pooled(a.features[l]);
    const auto pc = pooled(c.features[l]);
    for (std::size_t ch = 0; ch < pa.size(); ++ch) CHECK(std::abs(pa[ch] - pc[ch]) < 1e-12);
    CHECK_FALSE(a.features[l] == c.features[l]);
  }
  CHECK(b.queries[0].text == b.queries.back().text);
}
