#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cir/error.hpp"
#include "cir/experiment.hpp"
#include "cir/ranked_io.hpp"
#include "cir/synthetic.hpp"
#include "oracles.hpp"

using namespace cir;

namespace {

FeatureBundle tiny_bundle(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.entries_per_class = 10;
  spec.queries_per_class = 5;
  spec.dims.levels = {LevelDims{3, 3, 4}, LevelDims{2, 2, 6}, LevelDims{1, 1, 8}};
  spec.dims.text_dim = 5;
  spec.text_tokens = 3;
  return generate_synthetic(spec);
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.folds = 3;
  cfg.k = 2;
  cfg.seed = 11;
  cfg.train.max_epochs = 3;
  cfg.train.learning_rate = 3e-3;
  return cfg;
}

RankedList sample_list() {
  return {"q1", "mel",
          {{"a", "mel", 0.1 + 0.2, 0.3, 1.0 / 3.0},
           {"b", "nevus", -0.25, 1e-300, -2.0},
           {"c", "mel", -0.5, 0.0, 5e-17}}};
}

}  // namespace

TEST_CASE("aggregate uses the sample standard deviation") {
  const std::vector<double> v{83.8, 84.5, 82.4, 78.6, 79.3};
  const auto s = aggregate(v);
  CHECK(std::abs(s.mean - 81.72) < 1e-9);
  CHECK(std::abs(s.std - oracle::sample_std(v)) < 1e-9);
  CHECK(std::abs(s.std - 2.66) < 0.01);
  const std::vector<double> one{0.5};
  CHECK(aggregate(one).std == 0.0);
  CHECK_THROWS_AS(aggregate(std::vector<double>{}), ArgumentError);
}

TEST_CASE("ranked TSV round trip") {
  const std::vector<RankedList> lists{sample_list(), {"q2", "bkl", {{"a", "mel", 0.0, 0, 0}}}};
  std::stringstream ss;
  write_ranked_tsv(ss, lists);
  std::string first;
  std::getline(ss, first);
  CHECK(first == kRankedHeader);
  ss.seekg(0);
  const auto read = read_ranked_tsv(ss, "mem");
  REQUIRE(read.size() == 2);
  CHECK(read[0].query_id == "q1");
  CHECK(read[0].relevance.rel == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(read[0].relevance.relevant_total == 2);
  CHECK(read[1].relevance.rel == std::vector<std::uint8_t>{0});

  std::stringstream text;
  write_ranked_tsv(text, lists);
  std::string line;
  std::getline(text, line);
  std::getline(text, line);
  std::istringstream row(line);
  std::string field;
  for (int i = 0; i < 4; ++i) std::getline(row, field, '\t');
  CHECK(std::stod(field) == 0.1 + 0.2);
}

TEST_CASE("ranked TSV reader errors") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_ranked_tsv(in, "mem");
  };
  const std::string h = std::string(kRankedHeader) + "\n";
  CHECK_THROWS_AS(parse("bad header\n"), FormatError);
  CHECK_THROWS_AS(parse(h + "q\t1\ta\t0\t0\t0\tmel\n"), FormatError);
  CHECK_THROWS_AS(parse(h + "q\tx\ta\t0\t0\t0\tmel\t1\n"), FormatError);
  CHECK_THROWS_AS(parse(h + "q\t2\ta\t0\t0\t0\tmel\t1\n"), FormatError);
  CHECK_THROWS_AS(parse(h + "q\t1\ta\t0\t0\t0\tmel\t1\nq\t3\tb\t0\t0\t0\tmel\t0\n"),
                  FormatError);
  CHECK(parse(h).empty());
}

TEST_CASE("experiments are deterministic") {
  const auto bundle = tiny_bundle(3);
  const auto cfg = tiny_config();
  const auto a = run_experiment(cfg, bundle);
  const auto b = run_experiment(cfg, bundle);
  CHECK(format_report_records(a) == format_report_records(b));
  CHECK(format_report_table(a) == format_report_table(b));
  REQUIRE(a.folds.size() == 3);

  std::size_t queries = 0;
  for (const auto& f : a.folds) queries += f.test_queries;
  CHECK(queries == bundle.queries.size());

  auto other = cfg;
  other.seed = 12;
  CHECK(format_report_records(run_experiment(other, bundle)) != format_report_records(a));
}

TEST_CASE("report columns match the ranked lists") {
  const auto bundle = tiny_bundle(4);
  const auto report = run_experiment(tiny_config(), bundle);
  std::vector<double> maps;
  for (const auto& f : report.folds) {
    std::vector<RelevanceVector> rel;
    for (const auto& list : f.ranked) rel.push_back(relevance_of(list));
    const auto s = summarize(rel, report.cutoffs);
    CHECK(s.map == f.trained.map);
    CHECK(s.accuracy == f.trained.accuracy);
    maps.push_back(f.trained.map);
    CHECK(f.best_epoch <= f.epochs_run);
  }
  CHECK(report.map.mean == aggregate(maps).mean);
  CHECK(report.map.std == aggregate(maps).std);

  std::istringstream records(format_report_records(report));
  std::string line;
  std::size_t n = 0;
  while (std::getline(records, line)) {
    CHECK(nlohmann::json::parse(line).is_object());
    ++n;
  }
  CHECK(n == report.folds.size() + 1);
}

TEST_CASE("experiment outputs") {
  const auto dir = std::filesystem::temp_directory_path() / "cir_experiment_test";
  std::filesystem::remove_all(dir);
  auto cfg = tiny_config();
  cfg.folds = 2;
  cfg.output_dir = dir;
  const auto report = run_experiment(cfg, tiny_bundle(5));
  CHECK(std::filesystem::exists(dir / "report.txt"));
  CHECK(std::filesystem::exists(dir / "report.jsonl"));
  for (const char* fold : {"fold_1", "fold_2"}) {
    CHECK(std::filesystem::exists(dir / fold / "train_log.jsonl"));
    CHECK(std::filesystem::exists(dir / fold / "ranked.tsv"));
    CHECK(std::filesystem::exists(dir / fold / "checkpoint.circ"));
  }
  std::ifstream in(dir / "fold_1" / "ranked.tsv");
  const auto lists = read_ranked_tsv(in, "fold_1");
  CHECK(lists.size() == report.folds[0].test_queries);
}

TEST_CASE("experiment config validation") {
  auto cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate(false));
  CHECK_THROWS_AS(cfg.validate(true), ConfigError);
  auto bad = cfg;
  bad.folds = 1;
  CHECK_THROWS_AS(bad.validate(false), ConfigError);
  bad = cfg;
  bad.cutoffs = {1, 1};
  CHECK_THROWS_AS(bad.validate(false), ConfigError);
  bad = cfg;
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(false), ConfigError);
  bad = cfg;
  bad.train.temperature = 0.0;
  CHECK_THROWS_AS(bad.validate(false), ConfigError);
}

TEST_CASE("fold seeds differ per fold and repeat per seed") {
  CHECK(fold_seeds(1, 0).model == fold_seeds(1, 0).model);
  CHECK(fold_seeds(1, 0).model != fold_seeds(1, 1).model);
  CHECK(fold_seeds(1, 0).model != fold_seeds(2, 0).model);
  CHECK(fold_seeds(1, 0).model != fold_seeds(1, 0).train);
}

TEST_CASE("manifest records the config hash") {
  const auto m = nlohmann::json::parse(make_manifest("cv", "abc", 9, "prov"));
  CHECK(m["config_sha256"] == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(m["seed"] == 9);
  CHECK(m["bundle_format_version"] == kBundleVersion);
  CHECK(m["bundle_provenance"] == "prov");
}

TEST_CASE("train log writes NaN as null") {
  EpochRecord r;
  r.epoch = 0;
  r.train_loss = std::nan("");
  r.validation_map = 0.5;
  const auto line = format_train_log(std::vector<EpochRecord>{r});
  CHECK(nlohmann::json::parse(line)["train_loss"].is_null());
}
