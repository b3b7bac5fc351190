#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wvt/common.hpp"
#include "wvt/corpus.hpp"
#include "wvt/objective.hpp"
#include "wvt/textpool.hpp"

namespace wvt {

// Raw video features joined with pooled metadata embeddings, in corpus order.
struct TrainingSet {
  std::vector<std::string> ids;
  Matrix features;                         // N x D_in
  std::array<Matrix, kSourceCount> text;   // N x D_t per source
  std::vector<std::optional<std::int64_t>> labels;

  std::size_t size() const { return ids.size(); }
  std::size_t text_width() const { return text[0].cols; }
  Example example(std::size_t i) const;
  TrainingSet subset(std::span<const std::size_t> rows) const;
};

// Joins the three inputs by record id. Every corpus id must appear in both
// embedding files; extra entries in those files are ignored.
TrainingSet assemble_dataset(std::span<const MetadataRecord> records, const VideoFeatureFile& video,
                             const TokenFile& tokens);

}  // namespace wvt
