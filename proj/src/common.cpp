#include "wvt/common.hpp"

#include <algorithm>

namespace wvt {

std::string_view source_name(Source s) {
  switch (s) {
    case Source::Title: return "title";
    case Source::Description: return "description";
    case Source::Tags: return "tags";
    case Source::Channel: return "channel";
  }
  return "?";
}

std::optional<Source> parse_source(std::string_view name) {
  for (Source s : kAllSources) {
    if (source_name(s) == name) return s;
  }
  return std::nullopt;
}

std::vector<Source> parse_source_list(std::string_view csv) {
  if (csv == "all") return {kAllSources.begin(), kAllSources.end()};
  std::vector<Source> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    auto comma = csv.find(',', pos);
    if (comma == std::string_view::npos) comma = csv.size();
    auto name = csv.substr(pos, comma - pos);
    auto s = parse_source(name);
    if (!s) throw ConfigError("unknown metadata source '" + std::string(name) + "'");
    if (std::find(out.begin(), out.end(), *s) != out.end())
      throw ConfigError("duplicate metadata source '" + std::string(name) + "'");
    out.push_back(*s);
    pos = comma + 1;
  }
  return out;
}

std::string format_source_list(std::span<const Source> sources) {
  std::string out;
  for (Source s : sources) {
    if (!out.empty()) out += ',';
    out += source_name(s);
  }
  return out;
}

}  // namespace wvt
