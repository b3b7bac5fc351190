#include "wvt/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

namespace wvt {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

// Order statistic at 1-based index ceil(num/den * n), clamped to [1, n].
std::size_t nearest_rank(const std::map<std::size_t, std::uint64_t>& hist, std::uint64_t n,
                         std::uint64_t num, std::uint64_t den) {
  std::uint64_t idx = (num * n + den - 1) / den;
  idx = std::clamp<std::uint64_t>(idx, 1, n);
  std::uint64_t seen = 0;
  for (const auto& [len, count] : hist) {
    seen += count;
    if (seen >= idx) return len;
  }
  return hist.empty() ? 0 : hist.rbegin()->first;
}

std::vector<std::pair<std::string, std::size_t>> top_k(
    const std::unordered_map<std::string, std::uint64_t>& freq, std::size_t k) {
  std::vector<std::pair<std::string, std::size_t>> all;
  all.reserve(freq.size());
  for (const auto& [v, c] : freq) {
    if (!v.empty()) all.emplace_back(v, static_cast<std::size_t>(c));
  }
  auto cmp = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), cmp);
  all.resize(keep);
  return all;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string escape_value(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case kTagSeparator: out += "\\u001f"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::string source_value(const MetadataRecord& r, Source s) {
  switch (s) {
    case Source::Title: return r.title;
    case Source::Description: return r.description;
    case Source::Tags: return canonical_tag_string(r.tags);
    case Source::Channel: return r.channel;
  }
  return {};
}

std::size_t source_words(const MetadataRecord& r, Source s) {
  if (s == Source::Tags) {
    std::size_t n = 0;
    for (const auto& t : r.tags) n += word_count(t);
    return n;
  }
  return word_count(source_value(r, s));
}

void StatsAccumulator::add(const MetadataRecord& r) {
  ++records_;
  tag_total_ += r.tags.size();
  for (Source s : kAllSources) {
    auto& p = per_source_[index_of(s)];
    const std::size_t words = source_words(r, s);
    p.word_sum += words;
    ++p.lengths[words];
    const bool missing = s == Source::Tags ? r.tags.empty() : source_value(r, s).empty();
    if (missing) ++p.missing;
    ++p.values[source_value(r, s)];
  }
  for (const auto& t : r.tags) ++single_tags_[canonical_tag_string(std::span(&t, 1))];
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  records_ += other.records_;
  tag_total_ += other.tag_total_;
  for (std::size_t i = 0; i < kSourceCount; ++i) {
    auto& p = per_source_[i];
    const auto& q = other.per_source_[i];
    p.word_sum += q.word_sum;
    p.missing += q.missing;
    for (const auto& [v, c] : q.values) p.values[v] += c;
    for (const auto& [l, c] : q.lengths) p.lengths[l] += c;
  }
  for (const auto& [t, c] : other.single_tags_) single_tags_[t] += c;
}

CorpusStats StatsAccumulator::finalize(const StatsOptions& opts) const {
  if (records_ == 0) throw DataError("cannot compute stats over an empty corpus");
  CorpusStats out;
  out.record_count = records_;
  const double n = static_cast<double>(records_);
  for (Source s : kAllSources) {
    const auto& p = per_source_[index_of(s)];
    auto& st = out.sources[index_of(s)];
    if (opts.nonmissing_only) {
      const std::uint64_t present = records_ - p.missing;
      st.mean_words = present ? static_cast<double>(p.word_sum) / static_cast<double>(present) : 0.0;
    } else {
      st.mean_words = static_cast<double>(p.word_sum) / n;
    }
    if (s == Source::Description || s == Source::Tags)
      st.missing_rate = static_cast<double>(p.missing) / n;
    st.unique_count = p.values.size();
    st.unique_pct = static_cast<double>(st.unique_count) / n;
    st.length_quartiles = {nearest_rank(p.lengths, records_, 0, 4),
                           nearest_rank(p.lengths, records_, 1, 4),
                           nearest_rank(p.lengths, records_, 2, 4),
                           nearest_rank(p.lengths, records_, 3, 4),
                           p.lengths.rbegin()->first};
    st.top_repeated = top_k(s == Source::Tags ? single_tags_ : p.values, opts.top_k);
  }
  out.mean_tag_count = static_cast<double>(tag_total_) / n;
  out.videos_per_channel = n / static_cast<double>(out[Source::Channel].unique_count);
  return out;
}

CorpusStats compute_stats(std::span<const MetadataRecord> records, const StatsOptions& opts) {
  StatsAccumulator acc;
  for (const auto& r : records) acc.add(r);
  return acc.finalize(opts);
}

std::vector<SubsetStats> stats_by_subset(std::span<const MetadataRecord> records,
                                         std::span<const std::size_t> sizes,
                                         const StatsOptions& opts) {
  if (!std::is_sorted(sizes.begin(), sizes.end()))
    throw ConfigError("subset sizes must be sorted ascending");
  if (records.empty()) throw DataError("cannot compute stats over an empty corpus");
  std::unordered_set<std::string> queries;
  std::int64_t max_rank = 0;
  for (const auto& r : records) {
    queries.insert(r.query);
    max_rank = std::max(max_rank, r.rank);
  }
  const std::size_t q = queries.size();

  std::vector<SubsetStats> out;
  for (std::size_t size : sizes) {
    if (size == 0) throw ConfigError("subset sizes must be >= 1");
    SubsetStats row;
    row.requested_size = size;
    if (size > records.size()) {
      row.warning = "requested size " + std::to_string(size) + " exceeds corpus size " +
                    std::to_string(records.size()) + "; using the full corpus";
      row.per_query = max_rank;
      row.stats = compute_stats(records, opts);
    } else {
      row.per_query = static_cast<std::int64_t>((size + q - 1) / q);
      const auto slice = take_top_per_query(records, row.per_query);
      row.stats = compute_stats(slice, opts);
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string format_stats_block(const SubsetStats& row) {
  const auto& st = row.stats;
  std::string out = "[subset]\n";
  auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("requested_size", std::to_string(row.requested_size));
  kv("per_query", std::to_string(row.per_query));
  kv("record_count", std::to_string(st.record_count));
  if (row.warning) kv("warning", *row.warning);
  kv("mean_tag_count", fmt_double(st.mean_tag_count));
  kv("videos_per_channel", fmt_double(st.videos_per_channel));
  for (Source s : kAllSources) {
    const auto& ss = st[s];
    const std::string p(source_name(s));
    kv(p + ".mean_words", fmt_double(ss.mean_words));
    if (ss.missing_rate) kv(p + ".missing_rate", fmt_double(*ss.missing_rate));
    kv(p + ".unique_count", std::to_string(ss.unique_count));
    kv(p + ".unique_pct", fmt_double(ss.unique_pct));
    const auto& qt = ss.length_quartiles;
    kv(p + ".length_quartiles", std::to_string(qt.min) + "," + std::to_string(qt.q25) + "," +
                                    std::to_string(qt.q50) + "," + std::to_string(qt.q75) + "," +
                                    std::to_string(qt.max));
    for (std::size_t i = 0; i < ss.top_repeated.size(); ++i) {
      kv(p + ".top." + std::to_string(i + 1),
         std::to_string(ss.top_repeated[i].second) + "\t" + escape_value(ss.top_repeated[i].first));
    }
  }
  return out;
}

std::string format_plot_table(std::span<const SubsetStats> rows) {
  std::string out = "size\tindicator\tvalue\n";
  for (const auto& row : rows) {
    const auto& st = row.stats;
    const std::string size = std::to_string(st.record_count);
    auto line = [&](const std::string& ind, double v) { out += size + "\t" + ind + "\t" + fmt_double(v) + "\n"; };
    for (Source s : kAllSources) line(std::string(source_name(s)) + ".mean_words", st[s].mean_words);
    line("description.missing_rate", *st[Source::Description].missing_rate);
    line("tags.missing_rate", *st[Source::Tags].missing_rate);
    line("mean_tag_count", st.mean_tag_count);
  }
  return out;
}

}  // namespace wvt
