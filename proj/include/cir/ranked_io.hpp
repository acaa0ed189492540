#pragma once

// Tab-separated ranked lists, one row per (query, candidate):
//   query_id rank candidate_id S S_local S_global candidate_label is_relevant
// Scores are printed with 17 significant digits so a round trip is exact.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cir/metrics.hpp"
#include "cir/retrieval.hpp"

namespace cir {

inline constexpr const char* kRankedHeader =
    "query_id\trank\tcandidate_id\tS\tS_local\tS_global\tcandidate_label\tis_relevant";

void write_ranked_tsv(std::ostream& out, std::span<const RankedList> lists);

struct RankedFileQuery {
  std::string query_id;
  RelevanceVector relevance;
};

/// Queries in file order. Throws FormatError on a bad header, malformed
/// rows or ranks that do not run 1, 2, ... within a query.
std::vector<RankedFileQuery> read_ranked_tsv(std::istream& in, const std::string& source);

}  // namespace cir
