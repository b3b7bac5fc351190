#include "wvt/dataset.hpp"

#include <algorithm>
#include <unordered_map>

namespace wvt {

Example TrainingSet::example(std::size_t i) const {
  Example e;
  e.features = features.row(i);
  for (std::size_t s = 0; s < kSourceCount; ++s) e.text[s] = text[s].row(i);
  return e;
}

TrainingSet TrainingSet::subset(std::span<const std::size_t> rows) const {
  TrainingSet out;
  out.features = Matrix(rows.size(), features.cols);
  for (std::size_t s = 0; s < kSourceCount; ++s) out.text[s] = Matrix(rows.size(), text[s].cols);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    out.ids.push_back(ids.at(i));
    out.labels.push_back(labels[i]);
    std::ranges::copy(features.row(i), out.features.row(k).begin());
    for (std::size_t s = 0; s < kSourceCount; ++s)
      std::ranges::copy(text[s].row(i), out.text[s].row(k).begin());
  }
  return out;
}

TrainingSet assemble_dataset(std::span<const MetadataRecord> records, const VideoFeatureFile& video,
                             const TokenFile& tokens) {
  std::unordered_map<std::string_view, std::size_t> video_row, token_row;
  for (std::size_t i = 0; i < video.ids.size(); ++i) video_row.emplace(video.ids[i], i);
  for (std::size_t i = 0; i < tokens.records.size(); ++i)
    token_row.emplace(tokens.records[i].record_id, i);

  const std::size_t n = records.size();
  TrainingSet out;
  out.features = Matrix(n, video.features.cols);
  for (auto& m : out.text) m = Matrix(n, tokens.width);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    const auto v = video_row.find(r.id);
    if (v == video_row.end()) throw DataError("no video features for record '" + r.id + "'");
    const auto t = token_row.find(r.id);
    if (t == token_row.end()) throw DataError("no token embeddings for record '" + r.id + "'");
    out.ids.push_back(r.id);
    out.labels.push_back(r.label);
    std::ranges::copy(video.features.row(v->second), out.features.row(i).begin());
    const MetadataEmbedding e = embed_record(tokens.records[t->second], tokens.width, tokens.empty_embedding);
    for (Source s : kAllSources) std::ranges::copy(e[s], out.text[index_of(s)].row(i).begin());
  }
  return out;
}

}  // namespace wvt
