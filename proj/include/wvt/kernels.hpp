#pragma once

// Data-parallel kernels. Each has a serial reference and an OpenMP version; both
// reduce partial results in the same fixed order, so they agree bit for bit
// regardless of thread count.

#include <span>
#include <vector>

#include "wvt/common.hpp"
#include "wvt/corpus.hpp"
#include "wvt/objective.hpp"
#include "wvt/stats.hpp"

namespace wvt::kernels {

// One chunk of a training batch: its examples, chunk-local negatives and dropout masks.
struct ChunkTask {
  std::vector<Example> examples;
  NegativeAssignment negatives;
  std::vector<Vec> masks;  // empty = no dropout
};

// Mean over chunks of batch_loss(chunk). video_grad is left empty.
LossOutput chunked_gradient_serial(const EmbeddingModel& model, std::span<const ChunkTask> chunks,
                                   const LossConfig& config);
LossOutput chunked_gradient_omp(const EmbeddingModel& model, std::span<const ChunkTask> chunks,
                                const LossConfig& config);

// 1-based rank of target i among all targets by cosine distance to pred i,
// ties broken by index.
std::vector<std::size_t> own_ranks_serial(const Matrix& preds, const Matrix& targets);
std::vector<std::size_t> own_ranks_omp(const Matrix& preds, const Matrix& targets);

// Sharded stats accumulation merged in shard order.
CorpusStats compute_stats_omp(std::span<const MetadataRecord> records, const StatsOptions& opts = {},
                              std::size_t shards = 0);

// Sets the OpenMP thread count (0 leaves the runtime default). No-op without OpenMP.
void set_thread_count(int n);
int max_threads();

}  // namespace wvt::kernels
