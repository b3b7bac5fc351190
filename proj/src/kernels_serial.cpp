#include "wvt/kernels.hpp"

namespace wvt::kernels {

namespace detail {

void accumulate(LossOutput& total, const LossOutput& part) {
  total.value += part.value;
  for (std::size_t s = 0; s < kSourceCount; ++s) total.per_source[s] += part.per_source[s];
  for (std::size_t i = 0; i < total.param_grad.size(); ++i) total.param_grad[i] += part.param_grad[i];
}

void scale(LossOutput& total, double factor) {
  total.value *= factor;
  for (auto& v : total.per_source) v *= factor;
  for (auto& g : total.param_grad) g *= factor;
}

LossOutput run_chunk(const EmbeddingModel& model, const ChunkTask& chunk, const LossConfig& config) {
  return batch_loss(model, chunk.examples, chunk.negatives, config, chunk.masks);
}

std::size_t own_rank(const Matrix& preds, const Matrix& targets, std::size_t i) {
  const auto pred = preds.row(i);
  const double own = cosine_distance(pred, targets.row(i));
  std::size_t rank = 1;
  for (std::size_t j = 0; j < targets.rows; ++j) {
    if (j == i) continue;
    const double d = cosine_distance(pred, targets.row(j));
    if (d < own || (d == own && j < i)) ++rank;
  }
  return rank;
}

}  // namespace detail

LossOutput chunked_gradient_serial(const EmbeddingModel& model, std::span<const ChunkTask> chunks,
                                   const LossConfig& config) {
  if (chunks.empty()) throw DataError("no chunks to evaluate");
  LossOutput total;
  total.param_grad.assign(model.layout().size(), 0.0);
  for (const auto& chunk : chunks) detail::accumulate(total, detail::run_chunk(model, chunk, config));
  detail::scale(total, 1.0 / static_cast<double>(chunks.size()));
  return total;
}

std::vector<std::size_t> own_ranks_serial(const Matrix& preds, const Matrix& targets) {
  if (preds.rows != targets.rows || preds.cols != targets.cols)
    throw DataError("prediction/target shape mismatch");
  std::vector<std::size_t> ranks(preds.rows);
  for (std::size_t i = 0; i < preds.rows; ++i) ranks[i] = detail::own_rank(preds, targets, i);
  return ranks;
}

}  // namespace wvt::kernels
