#include <algorithm>
#include <exception>

#include "wvt/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wvt::kernels {

namespace detail {
void accumulate(LossOutput& total, const LossOutput& part);
void scale(LossOutput& total, double factor);
LossOutput run_chunk(const EmbeddingModel& model, const ChunkTask& chunk, const LossConfig& config);
std::size_t own_rank(const Matrix& preds, const Matrix& targets, std::size_t i);
}  // namespace detail

namespace {
// Chunks evaluated per parallel round; bounds the number of live gradient buffers.
constexpr std::size_t kChunkGroup = 32;
}  // namespace

LossOutput chunked_gradient_omp(const EmbeddingModel& model, std::span<const ChunkTask> chunks,
                                const LossConfig& config) {
  if (chunks.empty()) throw DataError("no chunks to evaluate");
  config.validate();
  LossOutput total;
  total.param_grad.assign(model.layout().size(), 0.0);
  std::vector<LossOutput> parts(std::min(kChunkGroup, chunks.size()));
  for (std::size_t base = 0; base < chunks.size(); base += kChunkGroup) {
    const auto count = static_cast<std::ptrdiff_t>(std::min(kChunkGroup, chunks.size() - base));
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      try {
        parts[static_cast<std::size_t>(k)] = detail::run_chunk(model, chunks[base + static_cast<std::size_t>(k)], config);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    for (std::ptrdiff_t k = 0; k < count; ++k) detail::accumulate(total, parts[static_cast<std::size_t>(k)]);
  }
  detail::scale(total, 1.0 / static_cast<double>(chunks.size()));
  return total;
}

std::vector<std::size_t> own_ranks_omp(const Matrix& preds, const Matrix& targets) {
  if (preds.rows != targets.rows || preds.cols != targets.cols)
    throw DataError("prediction/target shape mismatch");
  std::vector<std::size_t> ranks(preds.rows);
  const auto n = static_cast<std::ptrdiff_t>(preds.rows);
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      ranks[static_cast<std::size_t>(i)] = detail::own_rank(preds, targets, static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return ranks;
}

CorpusStats compute_stats_omp(std::span<const MetadataRecord> records, const StatsOptions& opts,
                              std::size_t shards) {
  if (shards == 0) shards = static_cast<std::size_t>(std::max(1, max_threads()));
  shards = std::max<std::size_t>(1, std::min(shards, records.size()));
  std::vector<StatsAccumulator> partial(shards);
  const std::size_t per = (records.size() + shards - 1) / shards;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(shards); ++k) {
    const std::size_t lo = static_cast<std::size_t>(k) * per;
    const std::size_t hi = std::min(records.size(), lo + per);
    for (std::size_t i = lo; i < hi; ++i) partial[static_cast<std::size_t>(k)].add(records[i]);
  }
  StatsAccumulator merged;
  for (const auto& p : partial) merged.merge(p);
  return merged.finalize(opts);
}

void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace wvt::kernels
