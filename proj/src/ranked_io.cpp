#include "cir/ranked_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "cir/error.hpp"

namespace cir {

void write_ranked_tsv(std::ostream& out, std::span<const RankedList> lists) {
  out << kRankedHeader << '\n';
  for (const auto& list : lists) {
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
      const auto& e = list.entries[i];
      out << fmt::format("{}\t{}\t{}\t{:.17g}\t{:.17g}\t{:.17g}\t{}\t{}\n", list.query_id, i + 1,
                         e.candidate_id, e.score, e.local, e.global, e.candidate_label,
                         e.candidate_label == list.query_label ? 1 : 0);
    }
  }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::size_t parse_rank(const std::string& s, const std::string& where) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value == 0) {
    throw FormatError(where + ": invalid rank '" + s + "'");
  }
  return value;
}

}  // namespace

std::vector<RankedFileQuery> read_ranked_tsv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != kRankedHeader) {
    throw FormatError(source + ": missing or unexpected header");
  }
  std::vector<RankedFileQuery> queries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = fmt::format("{}:{}", source, line_no);
    const auto fields = split_tabs(line);
    if (fields.size() != 8) {
      throw FormatError(fmt::format("{}: expected 8 fields, got {}", where, fields.size()));
    }
    const std::size_t rank = parse_rank(fields[1], where);
    if (fields[7] != "0" && fields[7] != "1") {
      throw FormatError(where + ": is_relevant must be 0 or 1");
    }
    if (rank == 1) {
      queries.push_back({fields[0], {}});
    } else if (queries.empty() || queries.back().query_id != fields[0] ||
               queries.back().relevance.rel.size() + 1 != rank) {
      throw FormatError(fmt::format("{}: rank {} out of sequence for query '{}'", where, rank,
                                    fields[0]));
    }
    queries.back().relevance.rel.push_back(fields[7] == "1" ? 1 : 0);
  }
  for (auto& q : queries) {
    q.relevance = RelevanceVector::from_full_ranking(std::move(q.relevance.rel));
  }
  return queries;
}

}  // namespace cir
