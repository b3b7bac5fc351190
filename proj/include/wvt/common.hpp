#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wvt {

using Vec = std::vector<double>;

// Bad or inconsistent input data (malformed files, width mismatches, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode { Train, Eval };

// The four metadata sources, in the fixed on-disk order.
enum class Source : std::uint8_t { Title = 0, Description = 1, Tags = 2, Channel = 3 };

inline constexpr std::size_t kSourceCount = 4;
inline constexpr std::array<Source, kSourceCount> kAllSources{Source::Title, Source::Description,
                                                               Source::Tags, Source::Channel};

constexpr std::size_t index_of(Source s) { return static_cast<std::size_t>(s); }

std::string_view source_name(Source s);
std::optional<Source> parse_source(std::string_view name);

// Parses "title,description" or "all". Throws ConfigError on unknown names or duplicates.
std::vector<Source> parse_source_list(std::string_view csv);
std::string format_source_list(std::span<const Source> sources);

// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

}  // namespace wvt
