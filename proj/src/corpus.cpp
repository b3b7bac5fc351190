#include "wvt/corpus.hpp"

#include <algorithm>
#include <unordered_map>

#include <json.hpp>

namespace wvt {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void schema_error(std::size_t line_no, const std::string& msg) {
  throw DataError("line " + std::to_string(line_no) + ": " + msg);
}

const nlohmann::json* find_key(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string get_string(const nlohmann::json& obj, const char* key, std::size_t line_no,
                       bool required) {
  const auto* v = find_key(obj, key);
  if (!v) {
    if (required) schema_error(line_no, std::string("missing required key '") + key + "'");
    return {};
  }
  if (!v->is_string()) schema_error(line_no, std::string("'") + key + "' must be a string");
  return v->get<std::string>();
}

std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\v\f\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Denylist Denylist::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open denylist " + path.string());
  Denylist d;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) d.ids.insert(line);
  }
  return d;
}

MetadataRecord parse_record(std::string_view line, std::size_t line_no) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    schema_error(line_no, std::string("malformed record: ") + e.what());
  }
  if (!obj.is_object()) schema_error(line_no, "record must be an object");

  MetadataRecord r;
  r.id = get_string(obj, "id", line_no, true);
  if (r.id.empty()) schema_error(line_no, "'id' must be nonempty");
  r.query = get_string(obj, "query", line_no, true);

  const auto* rank = find_key(obj, "rank");
  if (!rank) schema_error(line_no, "missing required key 'rank'");
  if (!rank->is_number_integer() || rank->get<std::int64_t>() < 1)
    schema_error(line_no, "'rank' must be an integer >= 1");
  r.rank = rank->get<std::int64_t>();

  r.title = get_string(obj, "title", line_no, false);
  r.description = get_string(obj, "description", line_no, false);
  r.channel = get_string(obj, "channel", line_no, false);

  if (const auto* tags = find_key(obj, "tags")) {
    if (!tags->is_array()) schema_error(line_no, "'tags' must be an array");
    for (const auto& t : *tags) {
      if (!t.is_string()) schema_error(line_no, "'tags' entries must be strings");
      r.tags.push_back(t.get<std::string>());
    }
  }
  if (const auto* d = find_key(obj, "duration_s")) {
    if (!d->is_number() || d->get<double>() < 0.0)
      schema_error(line_no, "'duration_s' must be a non-negative number");
    r.duration_s = d->get<double>();
  }
  if (const auto* a = find_key(obj, "age_days")) {
    if (!a->is_number_integer() || a->get<std::int64_t>() < 0)
      schema_error(line_no, "'age_days' must be a non-negative integer");
    r.age_days = a->get<std::int64_t>();
  }
  if (const auto* l = find_key(obj, "label")) {
    if (!l->is_number_integer()) schema_error(line_no, "'label' must be an integer or null");
    r.label = l->get<std::int64_t>();
  }
  return r;
}

std::string format_record(const MetadataRecord& r) {
  ordered_json obj;
  obj["id"] = r.id;
  obj["query"] = r.query;
  obj["rank"] = r.rank;
  obj["title"] = r.title;
  obj["description"] = r.description;
  obj["tags"] = r.tags;
  obj["channel"] = r.channel;
  obj["duration_s"] = r.duration_s;
  obj["age_days"] = r.age_days;
  if (r.label)
    obj["label"] = *r.label;
  else
    obj["label"] = nullptr;
  return obj.dump();
}

CorpusReader::CorpusReader(const std::filesystem::path& path) : in_(path), path_(path.string()) {
  if (!in_) throw DataError("cannot open corpus " + path_);
}

std::optional<MetadataRecord> CorpusReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      MetadataRecord r = parse_record(line, line_no_);
      if (!seen_ids_.insert(r.id).second) schema_error(line_no_, "duplicate id '" + r.id + "'");
      std::string qr = r.query;
      qr.push_back('\0');
      qr += std::to_string(r.rank);
      if (!seen_query_rank_.insert(std::move(qr)).second)
        schema_error(line_no_, "duplicate (query, rank) for query '" + r.query + "'");
      return r;
    } catch (const DataError& e) {
      throw DataError(path_ + ": " + e.what());
    }
  }
  if (in_.bad()) throw DataError("read failed: " + path_);
  return std::nullopt;
}

std::vector<MetadataRecord> read_corpus(const std::filesystem::path& path) {
  CorpusReader reader(path);
  std::vector<MetadataRecord> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const MetadataRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus " + path.string());
  for (const auto& r : records) out << format_record(r) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

bool filter_record(const MetadataRecord& r, std::int64_t age_days, const Denylist& denylist,
                   const FilterRules& rules) {
  return r.duration_s >= rules.min_duration_s && age_days > rules.max_recent_days &&
         !denylist.contains(r.id);
}

std::vector<MetadataRecord> take_top_per_query(std::span<const MetadataRecord> records,
                                               std::int64_t n_per_query) {
  if (n_per_query < 1) throw ConfigError("n_per_query must be >= 1");
  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<const MetadataRecord*>> groups;
  for (const auto& r : records) {
    auto [it, fresh] = group_of.try_emplace(r.query, groups.size());
    if (fresh) groups.emplace_back();
    if (r.rank <= n_per_query) groups[it->second].push_back(&r);
  }
  std::vector<MetadataRecord> out;
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(),
                     [](const auto* a, const auto* b) { return a->rank < b->rank; });
    for (const auto* r : g) out.push_back(*r);
  }
  return out;
}

std::string canonical_tag_string(std::span<const std::string> tags) {
  std::string out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i) out.push_back(kTagSeparator);
    out += trim(tags[i]);
  }
  return out;
}

}  // namespace wvt
