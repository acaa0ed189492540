#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cir/error.hpp"
#include "cir/retrieval.hpp"

using namespace cir;

namespace {

ModelDims small_dims() {
  ModelDims dims;
  dims.levels = {LevelDims{3, 3, 4}, LevelDims{2, 2, 6}, LevelDims{1, 1, 8}};
  dims.text_dim = 5;
  return dims;
}

MultiLevelFeatures random_features(const ModelDims& dims, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  MultiLevelFeatures f;
  for (Level level : kLevels) {
    const auto& d = dims.at(level);
    std::vector<double> v(d.size());
    for (auto& x : v) x = dist(rng);
    f[index_of(level)] = FeatureMap(d, v);
  }
  return f;
}

QueryRecord random_query(const std::string& id, const std::string& label, const ModelDims& dims,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> t(3 * dims.text_dim);
  for (auto& x : t) x = dist(rng);
  return {id, label, random_features(dims, rng), TokenEmbeddings(3, dims.text_dim, t)};
}

Database random_db(const ModelDims& dims, std::size_t n, std::mt19937_64& rng) {
  Database db;
  const char* labels[] = {"mel", "nevus", "bkl"};
  for (std::size_t i = 0; i < n; ++i) {
    db.add({"e" + std::to_string(i), labels[i % 3], random_features(dims, rng)});
  }
  return db;
}

DatabaseEntry entry(const std::string& id, const std::string& label) {
  return {id, label, {}};
}

}  // namespace

TEST_CASE("label positives") {
  Database db({entry("a", "mel"), entry("b", "nevus"), entry("c", "mel")});
  QueryRecord q{"q", "mel", {}, {}};
  CHECK(label_positives(q, db) == std::set<std::string>{"a", "c"});
  q.label = "bkl";
  CHECK(label_positives(q, db).empty());
  Database same({entry("a", "mel"), entry("c", "mel")});
  q.label = "mel";
  CHECK(label_positives(q, same) == std::set<std::string>{"a", "c"});
}

TEST_CASE("database ids are unique") {
  Database db;
  db.add(entry("a", "mel"));
  CHECK_THROWS_AS(db.add(entry("a", "nevus")), ConfigError);
  CHECK(db.find("a") != nullptr);
  CHECK(db.find("b") == nullptr);
}

TEST_CASE("sort order breaks ties by id") {
  std::vector<RankedEntry> e{{"a", "x", 0.5, 0, 0}, {"b", "x", 0.9, 0, 0}, {"c", "x", 0.5, 0, 0}};
  sort_ranked(e);
  CHECK(e[0].candidate_id == "b");
  CHECK(e[1].candidate_id == "a");
  CHECK(e[2].candidate_id == "c");
}

TEST_CASE("raising a score never lowers its rank") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> s(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RankedEntry> e;
    for (int i = 0; i < 12; ++i) {
      e.push_back({"c" + std::to_string(i), "x", std::round(s(rng) * 4) / 4, 0, 0});
    }
    auto before = e;
    sort_ranked(before);
    const std::size_t pick = static_cast<std::size_t>(trial % 12);
    const std::string id = e[pick].candidate_id;
    auto pos = [&](const std::vector<RankedEntry>& v) {
      return std::find_if(v.begin(), v.end(),
                          [&](const RankedEntry& r) { return r.candidate_id == id; }) -
             v.begin();
    };
    e[pick].score += 0.3;
    auto after = e;
    sort_ranked(after);
    CHECK(pos(after) <= pos(before));
  }
}

TEST_CASE("top_k") {
  RankedList r{"q", "x", {{"b", "x", 0.9, 0, 0}, {"a", "x", 0.5, 0, 0}, {"c", "x", 0.5, 0, 0}}};
  CHECK(top_k(r, 3) == r);
  CHECK(top_k(r, 10) == r);
  CHECK(top_k(r, 1).entries.size() == 1);
  CHECK(top_k(r, 1).entries[0].candidate_id == "b");
  const auto two = top_k(r, 2);
  REQUIRE(two.entries.size() == 2);
  CHECK(two.entries[1].candidate_id == "a");
  CHECK_THROWS_AS(top_k(r, 0), ArgumentError);
}

TEST_CASE("hand-built views give the hand-computed score") {
  auto v = [](std::vector<double> x) { return constant(Tensor::vector(std::move(x))); };
  AlignmentView q{{v({1, 0}), v({1, 2, 3}), v({0.5, -1})}, {v({1, 2, 2}), v({4, 4}), v({1, 0, 1})}};
  AlignmentView t{{v({1, 1}), v({1, 2, 3}), v({0.5, -1})}, {v({2, 1, 2}), v({4, 4}), v({1, 0, 1})}};
  const double local = 2.0 + 1.0 / std::sqrt(2.0);
  const double global = 2.0 + 8.0 / 9.0;
  for (double beta : {0.0, 0.3, 0.6, 1.0}) {
    const auto terms = score_views(q, t, FusionWeight(beta));
    CHECK(std::abs(terms.local.item() - local) < 1e-9);
    CHECK(std::abs(terms.global.item() - global) < 1e-9);
    CHECK(std::abs(terms.fused.item() - (beta * local + (1 - beta) * global)) < 1e-9);
  }
}

TEST_CASE("an entry equal to the composed query scores 3 for any beta") {
  std::mt19937_64 rng(2);
  const auto dims = small_dims();
  const Model model = Model::initialize({dims, 4, 7});
  const auto q = random_query("q", "mel", dims, rng);
  const auto composed =
      to_feature_maps(compose_query(model, as_variables(q.image_features), q.text.as_variable()),
                      dims);
  const DatabaseEntry e{"e", "mel", composed};
  for (double beta : {0.0, 0.6, 1.0}) {
    // Each cosine falls short of 1 only by the denominator epsilon.
    CHECK(std::abs(score(q, e, model, FusionWeight(beta)).score - 3.0) < 1e-9);
  }
}

TEST_CASE("beta endpoints select the components") {
  std::mt19937_64 rng(3);
  const auto dims = small_dims();
  const Model model = Model::initialize({dims, 4, 8});
  const auto q = random_query("q", "mel", dims, rng);
  const DatabaseEntry e{"e", "nevus", random_features(dims, rng)};
  const auto one = score(q, e, model, FusionWeight(1.0));
  const auto zero = score(q, e, model, FusionWeight(0.0));
  CHECK(one.score == one.local);
  CHECK(zero.score == zero.global);
  CHECK(one.local == zero.local);
  CHECK(one.global == zero.global);
}

TEST_CASE("score rejects features that do not match the model") {
  std::mt19937_64 rng(4);
  const auto dims = small_dims();
  const Model model = Model::initialize({dims, 4, 9});
  auto other = dims;
  other.levels[0].d = 5;
  const auto q = random_query("q", "mel", dims, rng);
  const DatabaseEntry e{"e", "mel", random_features(other, rng)};
  CHECK_THROWS_AS(score(q, e, model, FusionWeight()), ConfigError);
}

TEST_CASE("ranking excludes self and ignores database order") {
  std::mt19937_64 rng(5);
  const auto dims = small_dims();
  const Model model = Model::initialize({dims, 4, 10});
  Database db = random_db(dims, 15, rng);
  auto q = random_query("e4", "nevus", dims, rng);

  const auto with_self = rank(q, db, model, FusionWeight(), false);
  const auto without = rank(q, db, model, FusionWeight(), true);
  CHECK(with_self.entries.size() == 15);
  CHECK(without.entries.size() == 14);
  for (const auto& e : without.entries) CHECK(e.candidate_id != "e4");

  auto shuffled_entries = db.entries();
  std::shuffle(shuffled_entries.begin(), shuffled_entries.end(), rng);
  const Database shuffled(shuffled_entries);
  CHECK(rank(q, shuffled, model, FusionWeight(), true) == without);

  const CandidateIndex index(db, model);
  CHECK(rank(q, index, model, FusionWeight(), true) == without);

  for (std::size_t i = 1; i < without.entries.size(); ++i) {
    CHECK(without.entries[i - 1].score >= without.entries[i].score);
  }
}

TEST_CASE("the query's own image ranks first without self exclusion") {
  std::mt19937_64 rng(6);
  const auto dims = small_dims();
  const Model model = Model::initialize({dims, 4, 11});
  Database db = random_db(dims, 20, rng);
  const auto q = random_query("self", "mel", dims, rng);
  db.add({"self", "mel", q.image_features});
  const auto r = rank(q, db, model, FusionWeight(), false);
  CHECK(r.entries.front().candidate_id == "self");
}

TEST_CASE("empty database") {
  std::mt19937_64 rng(7);
  const auto dims = small_dims();
  const Model model = Model::initialize({dims, 4, 12});
  const auto q = random_query("q", "mel", dims, rng);
  CHECK_THROWS_AS(rank(q, Database{}, model, FusionWeight()), EmptyDatabaseError);
  Database only_self;
  only_self.add({"q", "mel", q.image_features});
  CHECK(rank(q, only_self, model, FusionWeight(), true).entries.empty());
}
