#include "wvt/textpool.hpp"

#include <cmath>
#include <limits>

#include "wvt/binary_io.hpp"

namespace wvt {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void check_width(const Vec& v, std::size_t width) {
  if (v.size() != width)
    throw DataError("embedding width mismatch: expected " + std::to_string(width) + ", got " +
                    std::to_string(v.size()));
}

Vec pool_or_empty(std::span<const Vec> tokens, std::size_t width, const std::optional<Vec>& empty) {
  if (tokens.empty() && empty) {
    check_width(*empty, width);
    return *empty;
  }
  return pool_tokens(tokens, width);
}

void put_id(io::ByteWriter& w, const std::string& id) {
  if (id.size() > std::numeric_limits<std::uint16_t>::max()) throw DataError("id too long: " + id);
  w.u16(static_cast<std::uint16_t>(id.size()));
  w.raw(id);
}

std::string get_id(io::ByteReader& r) { return r.raw(r.u16()); }

std::uint16_t checked_u16(std::size_t n, const char* what) {
  if (n > std::numeric_limits<std::uint16_t>::max())
    throw DataError(std::string("too many ") + what + " for u16 count");
  return static_cast<std::uint16_t>(n);
}

void put_vec(io::ByteWriter& w, const Vec& v, std::size_t width) {
  check_width(v, width);
  for (double x : v) w.f32(static_cast<float>(x));
}

Vec get_vec(io::ByteReader& r, std::size_t width) {
  Vec v(width);
  for (auto& x : v) {
    x = r.f32();
    if (!std::isfinite(x)) r.fail("non-finite embedding value");
  }
  return v;
}

void put_tokens(io::ByteWriter& w, const std::vector<Vec>& tokens, std::size_t width) {
  w.u16(checked_u16(tokens.size(), "tokens"));
  for (const auto& t : tokens) put_vec(w, t, width);
}

std::vector<Vec> get_tokens(io::ByteReader& r, std::size_t width) {
  std::vector<Vec> out(r.u16());
  for (auto& t : out) t = get_vec(r, width);
  return out;
}

void check_version(io::ByteReader& r) {
  const auto v = r.u32();
  if (v != kFormatVersion) r.fail("unsupported version " + std::to_string(v));
}

}  // namespace

Vec pool_tokens(std::span<const Vec> tokens, std::size_t width) {
  Vec out(width, 0.0);
  if (tokens.empty()) return out;
  for (const auto& t : tokens) {
    check_width(t, width);
    for (std::size_t i = 0; i < width; ++i) out[i] += t[i];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (auto& x : out) x *= inv;
  return out;
}

Vec pool_tags(std::span<const std::vector<Vec>> tag_tokens, std::size_t width,
              const std::optional<Vec>& empty_embedding) {
  if (tag_tokens.empty()) {
    if (empty_embedding) {
      check_width(*empty_embedding, width);
      return *empty_embedding;
    }
    return Vec(width, 0.0);
  }
  Vec out(width, 0.0);
  for (const auto& tag : tag_tokens) {
    const Vec pooled = pool_tokens(tag, width);
    for (std::size_t i = 0; i < width; ++i) out[i] += pooled[i];
  }
  const double inv = 1.0 / static_cast<double>(tag_tokens.size());
  for (auto& x : out) x *= inv;
  return out;
}

MetadataEmbedding embed_record(const TokenEmbeddingSet& tokens, std::size_t width,
                               const std::optional<Vec>& empty_embedding) {
  MetadataEmbedding e;
  e[Source::Title] = pool_or_empty(tokens.title, width, empty_embedding);
  e[Source::Description] = pool_or_empty(tokens.description, width, empty_embedding);
  e[Source::Tags] = pool_tags(tokens.tags, width, empty_embedding);
  e[Source::Channel] = pool_or_empty(tokens.channel, width, empty_embedding);
  return e;
}

std::string encode_token_file(const TokenFile& f) {
  io::ByteWriter w;
  w.raw("WVTE");
  w.u32(kFormatVersion);
  w.u32(f.width);
  w.u8(f.empty_embedding ? 1 : 0);
  if (f.empty_embedding) put_vec(w, *f.empty_embedding, f.width);
  w.u64(f.records.size());
  for (const auto& rec : f.records) {
    put_id(w, rec.record_id);
    put_tokens(w, rec.title, f.width);
    put_tokens(w, rec.description, f.width);
    w.u16(checked_u16(rec.tags.size(), "tags"));
    for (const auto& tag : rec.tags) put_tokens(w, tag, f.width);
    put_tokens(w, rec.channel, f.width);
  }
  return w.bytes();
}

TokenFile decode_token_file(std::string bytes, const std::string& what) {
  io::ByteReader r(std::move(bytes), what);
  r.expect_magic("WVTE");
  check_version(r);
  TokenFile f;
  f.width = r.u32();
  if (f.width == 0) r.fail("width must be >= 1");
  const auto flag = r.u8();
  if (flag > 1) r.fail("bad empty-embedding flag");
  if (flag) f.empty_embedding = get_vec(r, f.width);
  const auto count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    TokenEmbeddingSet rec;
    rec.record_id = get_id(r);
    rec.title = get_tokens(r, f.width);
    rec.description = get_tokens(r, f.width);
    rec.tags.resize(r.u16());
    for (auto& tag : rec.tags) tag = get_tokens(r, f.width);
    rec.channel = get_tokens(r, f.width);
    f.records.push_back(std::move(rec));
  }
  r.expect_end();
  return f;
}

TokenFile read_token_file(const std::filesystem::path& path) {
  return decode_token_file(io::read_file(path), path.string());
}

void write_token_file(const std::filesystem::path& path, const TokenFile& f) {
  io::write_file(path, encode_token_file(f));
}

std::string encode_video_file(const VideoFeatureFile& f) {
  if (f.ids.size() != f.features.rows) throw DataError("video file: id count != feature rows");
  io::ByteWriter w;
  w.raw("WVTV");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(f.features.cols));
  w.u64(f.ids.size());
  for (std::size_t i = 0; i < f.ids.size(); ++i) {
    put_id(w, f.ids[i]);
    for (double x : f.features.row(i)) w.f32(static_cast<float>(x));
  }
  return w.bytes();
}

VideoFeatureFile decode_video_file(std::string bytes, const std::string& what) {
  io::ByteReader r(std::move(bytes), what);
  r.expect_magic("WVTV");
  check_version(r);
  const auto width = r.u32();
  if (width == 0) r.fail("width must be >= 1");
  const auto count = r.u64();
  // Each record needs at least 2 + 4*width bytes.
  if (count > (r.size() - r.position()) / (2 + 4 * std::uint64_t{width}))
    r.fail("record count " + std::to_string(count) + " exceeds file length");
  VideoFeatureFile f;
  f.features = Matrix(count, width);
  f.ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    f.ids.push_back(get_id(r));
    auto row = f.features.row(i);
    for (auto& x : row) {
      x = r.f32();
      if (!std::isfinite(x)) r.fail("non-finite feature value");
    }
  }
  r.expect_end();
  return f;
}

VideoFeatureFile read_video_file(const std::filesystem::path& path) {
  return decode_video_file(io::read_file(path), path.string());
}

void write_video_file(const std::filesystem::path& path, const VideoFeatureFile& f) {
  io::write_file(path, encode_video_file(f));
}

}  // namespace wvt
