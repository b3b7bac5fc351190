#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "wvt/common.hpp"

namespace wvt {

// One web video's textual metadata plus the attributes used to filter and subset it.
// Missing description/tags are empty, never absent.
struct MetadataRecord {
  std::string id;
  std::string query;
  std::int64_t rank = 1;
  std::string title;
  std::string description;
  std::vector<std::string> tags;
  std::string channel;
  double duration_s = 0.0;
  std::int64_t age_days = 0;
  std::optional<std::int64_t> label;

  bool operator==(const MetadataRecord&) const = default;
};

// Evaluation-set ids to exclude. Membership is exact string equality.
struct Denylist {
  std::unordered_set<std::string> ids;

  bool contains(std::string_view id) const { return ids.contains(std::string(id)); }
  static Denylist load(const std::filesystem::path& path);
};

// Parses one corpus line. line_no is only used in error messages.
MetadataRecord parse_record(std::string_view line, std::size_t line_no);

// Serializes a record as one line (no trailing newline). Keys are always emitted in
// the fixed order id, query, rank, title, description, tags, channel, duration_s,
// age_days, label.
std::string format_record(const MetadataRecord& r);

// Streams records from a line-delimited corpus file, enforcing id and (query, rank)
// uniqueness across the file.
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path);

  std::optional<MetadataRecord> next();
  std::size_t line_number() const { return line_no_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t line_no_ = 0;
  std::unordered_set<std::string> seen_ids_;
  std::unordered_set<std::string> seen_query_rank_;
};

std::vector<MetadataRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const MetadataRecord> records);

struct FilterRules {
  double min_duration_s = 10.0;    // kept iff duration_s >= this
  std::int64_t max_recent_days = 90;  // kept iff age_days > this
};

// Keep/discard predicate over a record's duration, upload age and denylist membership.
bool filter_record(const MetadataRecord& r, std::int64_t age_days, const Denylist& denylist,
                   const FilterRules& rules = {});
inline bool filter_record(const MetadataRecord& r, const Denylist& denylist,
                          const FilterRules& rules = {}) {
  return filter_record(r, r.age_days, denylist, rules);
}

// Records with rank <= n_per_query. Queries appear in first-seen order, records
// within a query in ascending rank.
std::vector<MetadataRecord> take_top_per_query(std::span<const MetadataRecord> records,
                                               std::int64_t n_per_query);

inline constexpr char kTagSeparator = '\x1f';

// Whitespace-trimmed tags joined with the ASCII unit separator.
std::string canonical_tag_string(std::span<const std::string> tags);

}  // namespace wvt
