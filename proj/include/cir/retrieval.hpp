#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cir/features.hpp"
#include "cir/model.hpp"

namespace cir {

struct DatabaseEntry {
  std::string id;
  std::string label;
  MultiLevelFeatures features;
};

struct QueryRecord {
  std::string id;
  std::string label;
  MultiLevelFeatures image_features;
  TokenEmbeddings text;
};

/// Image database with unique ids. Insertion order carries no meaning.
class Database {
 public:
  Database() = default;
  explicit Database(std::vector<DatabaseEntry> entries);

  void add(DatabaseEntry entry);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<DatabaseEntry>& entries() const { return entries_; }
  const DatabaseEntry* find(const std::string& id) const;

 private:
  std::vector<DatabaseEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct RankedEntry {
  std::string candidate_id;
  std::string candidate_label;
  double score = 0.0;
  double local = 0.0;
  double global = 0.0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Candidates by descending fused score; ties by ascending id.
struct RankedList {
  std::string query_id;
  std::string query_label;
  std::vector<RankedEntry> entries;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

struct ScoreResult {
  double score = 0.0;
  double local = 0.0;
  double global = 0.0;
};

/// Ids of the database entries sharing the query's label.
std::set<std::string> label_positives(const QueryRecord& q, const Database& db);

ScoreResult score(const QueryRecord& q, const DatabaseEntry& e, const Model& model,
                  FusionWeight w);

/// Target-side alignment views precomputed for one model, so that ranking
/// many queries scores each database image once.
class CandidateIndex {
 public:
  CandidateIndex(const Database& db, const Model& model);

  const Database& database() const { return *db_; }
  const AlignmentView& view(std::size_t i) const { return views_[i]; }

 private:
  const Database* db_;
  std::vector<AlignmentView> views_;
};

/// The query is composed exactly once.
RankedList rank(const QueryRecord& q, const CandidateIndex& index, const Model& model,
                FusionWeight w, bool exclude_self = true);

RankedList rank(const QueryRecord& q, const Database& db, const Model& model,
                FusionWeight w, bool exclude_self = true);

/// Sorts by descending score with ascending-id tie-break.
void sort_ranked(std::vector<RankedEntry>& entries);

RankedList top_k(const RankedList& r, std::size_t k);

}  // namespace cir
