#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wvt/common.hpp"

namespace wvt {

inline constexpr std::size_t kDefaultTextWidth = 768;

// Precomputed token-level text embeddings for one record.
struct TokenEmbeddingSet {
  std::string record_id;
  std::vector<Vec> title;
  std::vector<Vec> description;
  std::vector<std::vector<Vec>> tags;  // one token list per tag
  std::vector<Vec> channel;

  bool operator==(const TokenEmbeddingSet&) const = default;
};

// Pooled f_t per source, indexed by Source.
struct MetadataEmbedding {
  std::array<Vec, kSourceCount> by_source;

  const Vec& operator[](Source s) const { return by_source[index_of(s)]; }
  Vec& operator[](Source s) { return by_source[index_of(s)]; }
};

// Componentwise mean; zero vector of `width` for an empty list.
Vec pool_tokens(std::span<const Vec> tokens, std::size_t width);

// Mean over per-tag pooled vectors. No tags yields `empty_embedding` when given,
// else the zero vector.
Vec pool_tags(std::span<const std::vector<Vec>> tag_tokens, std::size_t width,
              const std::optional<Vec>& empty_embedding);

MetadataEmbedding embed_record(const TokenEmbeddingSet& tokens, std::size_t width,
                               const std::optional<Vec>& empty_embedding);

// "WVTE" token embedding file. Values are stored as f32.
struct TokenFile {
  std::uint32_t width = kDefaultTextWidth;
  std::optional<Vec> empty_embedding;
  std::vector<TokenEmbeddingSet> records;
};

// "WVTV" raw video feature file. Values are stored as f32.
struct VideoFeatureFile {
  std::vector<std::string> ids;
  Matrix features;  // ids.size() x width
};

std::string encode_token_file(const TokenFile& f);
TokenFile decode_token_file(std::string bytes, const std::string& what = "token file");
TokenFile read_token_file(const std::filesystem::path& path);
void write_token_file(const std::filesystem::path& path, const TokenFile& f);

std::string encode_video_file(const VideoFeatureFile& f);
VideoFeatureFile decode_video_file(std::string bytes, const std::string& what = "video file");
VideoFeatureFile read_video_file(const std::filesystem::path& path);
void write_video_file(const std::filesystem::path& path, const VideoFeatureFile& f);

}  // namespace wvt
