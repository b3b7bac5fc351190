#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wvt/common.hpp"
#include "wvt/corpus.hpp"

namespace wvt {

// Number of maximal runs of non-whitespace characters.
std::size_t word_count(std::string_view text);

struct LengthQuartiles {
  std::size_t min = 0;
  std::size_t q25 = 0;
  std::size_t q50 = 0;
  std::size_t q75 = 0;
  std::size_t max = 0;
  bool operator==(const LengthQuartiles&) const = default;
};

struct SourceStats {
  double mean_words = 0.0;
  std::optional<double> missing_rate;  // description and tags only
  std::size_t unique_count = 0;
  double unique_pct = 0.0;
  LengthQuartiles length_quartiles;
  std::vector<std::pair<std::string, std::size_t>> top_repeated;
  bool operator==(const SourceStats&) const = default;
};

struct CorpusStats {
  std::size_t record_count = 0;
  std::array<SourceStats, kSourceCount> sources;
  double mean_tag_count = 0.0;
  double videos_per_channel = 0.0;

  const SourceStats& operator[](Source s) const { return sources[index_of(s)]; }
  bool operator==(const CorpusStats&) const = default;
};

struct StatsOptions {
  // Average word counts over non-empty entries only.
  bool nonmissing_only = false;
  std::size_t top_k = 10;
};

// Text of a record for one source; tags use canonical_tag_string.
std::string source_value(const MetadataRecord& r, Source s);
std::size_t source_words(const MetadataRecord& r, Source s);

// Mergeable partial aggregate. Counts and word sums are integers, so merge order
// never changes the finalized result.
class StatsAccumulator {
 public:
  void add(const MetadataRecord& r);
  void merge(const StatsAccumulator& other);
  std::size_t record_count() const { return records_; }

  // Throws DataError when no records were added.
  CorpusStats finalize(const StatsOptions& opts = {}) const;

 private:
  struct PerSource {
    std::uint64_t word_sum = 0;
    std::uint64_t missing = 0;
    std::unordered_map<std::string, std::uint64_t> values;
    std::map<std::size_t, std::uint64_t> lengths;
  };
  std::size_t records_ = 0;
  std::uint64_t tag_total_ = 0;
  std::array<PerSource, kSourceCount> per_source_;
  // individual tags, for the most-repeated list
  std::unordered_map<std::string, std::uint64_t> single_tags_;
};

CorpusStats compute_stats(std::span<const MetadataRecord> records, const StatsOptions& opts = {});

struct SubsetStats {
  std::size_t requested_size = 0;
  std::int64_t per_query = 0;
  std::optional<std::string> warning;
  CorpusStats stats;
};

// Stats over take_top_per_query(ceil(size / query_count)) for each size.
std::vector<SubsetStats> stats_by_subset(std::span<const MetadataRecord> records,
                                         std::span<const std::size_t> sizes,
                                         const StatsOptions& opts = {});

// Key-value report block and (size, indicator, value) plot rows.
std::string format_stats_block(const SubsetStats& s);
std::string format_plot_table(std::span<const SubsetStats> rows);

}  // namespace wvt
