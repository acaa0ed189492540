#pragma once

// Ranking metrics: precision at rank, average precision, mAP and
// Accuracy@K. Ranks are 1-based throughout.

#include <cstdint>
#include <span>
#include <vector>

#include "cir/retrieval.hpp"

namespace cir {

/// Binary relevance over a ranked list plus the number of relevant items
/// for the query (which exceeds Σ rel when the list is truncated).
struct RelevanceVector {
  std::vector<std::uint8_t> rel;
  std::size_t relevant_total = 0;

  /// Relevance of a full ranking: relevant_total = Σ rel.
  static RelevanceVector from_full_ranking(std::vector<std::uint8_t> rel);

  std::size_t size() const { return rel.size(); }
};

/// Marks every entry whose label equals the query label.
RelevanceVector relevance_of(const RankedList& list);

double precision_at(std::size_t i, const RelevanceVector& rel);
double average_precision(const RelevanceVector& rel);
/// Queries with no relevant items are skipped with a warning.
double mean_ap(std::span<const RelevanceVector> queries);

int acc_at_k(const RelevanceVector& rel, std::size_t k);
double accuracy_at_k(std::span<const RelevanceVector> queries, std::size_t k);

struct MetricSummary {
  double map = 0.0;
  std::vector<std::size_t> cutoffs;
  std::vector<double> accuracy;  // parallel to cutoffs
  std::size_t queries_used = 0;
  std::size_t queries_skipped = 0;

  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

inline const std::vector<std::size_t> kDefaultCutoffs{1, 2, 4};

MetricSummary summarize(std::span<const RelevanceVector> queries,
                        std::span<const std::size_t> cutoffs);

}  // namespace cir
