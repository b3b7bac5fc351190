#pragma once

#include <string>
#include <vector>

#include "wvt/corpus.hpp"
#include "wvt/random.hpp"
#include "wvt/textpool.hpp"

namespace fixtures {

inline std::string words_of(wvt::Rng& rng, std::size_t n, std::size_t vocab) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += rng.bernoulli(0.2) ? "  " : " ";
    s += "w" + std::to_string(rng.uniform_index(vocab));
  }
  return s;
}

// Small-vocabulary corpus with many repeats, empty fields and padded tags.
inline std::vector<wvt::MetadataRecord> random_corpus(wvt::Rng& rng, std::size_t n, std::size_t queries = 5) {
  std::vector<wvt::MetadataRecord> out;
  std::vector<std::int64_t> next_rank(queries, 1);
  for (std::size_t i = 0; i < n; ++i) {
    wvt::MetadataRecord r;
    r.id = "r" + std::to_string(i);
    const auto q = rng.uniform_index(queries);
    r.query = "q" + std::to_string(q);
    r.rank = next_rank[q]++;
    r.title = words_of(rng, rng.uniform_index(4), 6);
    r.description = rng.bernoulli(0.3) ? "" : words_of(rng, rng.uniform_index(12), 20);
    if (!rng.bernoulli(0.25))
      for (std::uint64_t t = 1 + rng.uniform_index(4); t > 0; --t)
        r.tags.push_back((rng.bernoulli(0.2) ? " " : "") + words_of(rng, 1 + rng.uniform_index(2), 5));
    r.channel = "c" + std::to_string(rng.uniform_index(n / 3 + 1));
    r.duration_s = 30;
    r.age_days = 365;
    out.push_back(std::move(r));
  }
  return out;
}

// Ranked corpus where deeper search results have shorter descriptions and longer titles.
inline std::vector<wvt::MetadataRecord> ranked_corpus(std::size_t queries, std::size_t per_query,
                                                      std::uint64_t seed) {
  wvt::Rng rng(seed);
  std::vector<wvt::MetadataRecord> out;
  for (std::size_t k = 1; k <= per_query; ++k) {
    for (std::size_t q = 0; q < queries; ++q) {
      wvt::MetadataRecord r;
      r.id = "q" + std::to_string(q) + "-" + std::to_string(k);
      r.query = "query " + std::to_string(q);
      r.rank = static_cast<std::int64_t>(k);
      const double depth = static_cast<double>(k - 1) / static_cast<double>(per_query);
      r.title = words_of(rng, 2 + static_cast<std::size_t>(8 * depth) + rng.uniform_index(3), 50);
      const auto desc_len = static_cast<std::size_t>(30 * (1 - depth)) + rng.uniform_index(4);
      r.description = rng.bernoulli(0.1 + 0.4 * depth) ? "" : words_of(rng, desc_len, 200);
      for (std::uint64_t t = rng.uniform_index(5); t > 0; --t) r.tags.push_back(words_of(rng, 1, 40));
      r.channel = "ch" + std::to_string(rng.uniform_index(3000));
      r.duration_s = 30;
      r.age_days = 365;
      out.push_back(std::move(r));
    }
  }
  return out;
}


// Values rounded through f32 so files hold them exactly.
inline wvt::Vec f32_vec(wvt::Rng& rng, std::size_t width) {
  wvt::Vec v(width);
  for (auto& x : v) x = static_cast<double>(static_cast<float>(rng.normal()));
  return v;
}

inline std::vector<wvt::Vec> f32_tokens(wvt::Rng& rng, std::size_t width, std::size_t max_count) {
  std::vector<wvt::Vec> out(rng.uniform_index(max_count + 1));
  for (auto& t : out) t = f32_vec(rng, width);
  return out;
}

inline wvt::TokenFile random_token_file(wvt::Rng& rng, std::size_t records, std::uint32_t width) {
  wvt::TokenFile f;
  f.width = width;
  if (rng.bernoulli(0.5)) f.empty_embedding = f32_vec(rng, width);
  for (std::size_t i = 0; i < records; ++i) {
    wvt::TokenEmbeddingSet t;
    t.record_id = "rec-" + std::to_string(i) + (rng.bernoulli(0.2) ? "\xc3\xa9" : "");
    t.title = f32_tokens(rng, width, 4);
    t.description = f32_tokens(rng, width, 6);
    t.tags.resize(rng.uniform_index(4));
    for (auto& tag : t.tags) tag = f32_tokens(rng, width, 3);
    t.channel = f32_tokens(rng, width, 2);
    f.records.push_back(std::move(t));
  }
  return f;
}

inline wvt::VideoFeatureFile random_video_file(wvt::Rng& rng, std::size_t records, std::size_t width) {
  wvt::VideoFeatureFile f;
  f.features = wvt::Matrix(records, width);
  for (std::size_t i = 0; i < records; ++i) {
    f.ids.push_back("vid-" + std::to_string(i));
    const auto v = f32_vec(rng, width);
    std::copy(v.begin(), v.end(), f.features.row(i).begin());
  }
  return f;
}

}  // namespace fixtures
