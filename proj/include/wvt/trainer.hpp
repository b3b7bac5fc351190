#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "wvt/dataset.hpp"
#include "wvt/embedder.hpp"
#include "wvt/kernels.hpp"
#include "wvt/objective.hpp"
#include "wvt/random.hpp"

namespace wvt {

// Defaults are the large-scale values; desk-scale runs override batch size,
// warmup and step count.
struct TrainConfig {
  std::size_t batch_size = 2048;
  std::size_t chunk_size = 16;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::uint64_t total_steps = 0;
  std::uint64_t warmup_steps = 1500;
  double lr_start = 0.001;
  double lr_peak = 1.0;
  std::size_t negatives = 15;
  double margin = 0.1;
  double dropout = 0.5;  // used when building the model config
  std::uint64_t seed = 0;
  std::vector<Source> sources{kAllSources.begin(), kAllSources.end()};
  bool share_negatives = false;  // reuse one negative draw across sources
  bool decay_biases = true;
  bool parallel = true;  // OpenMP chunk kernel instead of the serial reference
  std::uint64_t checkpoint_every = 0;

  void validate() const;
  LossConfig loss_config() const { return {margin, negatives, sources}; }
};

// Geometric warmup lr_start -> lr_peak over warmup_steps, then cosine decay to 0 at total_steps.
double learning_rate(std::uint64_t step, const TrainConfig& config);

// For each anchor in a chunk, K chunk-local indices drawn uniformly from the other
// members: without replacement when chunk_size - 1 >= K, otherwise with replacement.
std::vector<std::vector<std::size_t>> sample_negatives(std::size_t chunk_size, std::size_t k, Rng& rng);

// g = grad + lambda * param (entries with decay_mask == 0 skip the decay term when a
// mask is given); v = mu * v - lr * g; param += mu * v - lr * g.
void nesterov_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
                   double lr, double mu, double lambda, std::span<const std::uint8_t> decay_mask = {});

// Dataset row indices for one step. Rows are visited in a per-epoch permutation
// derived from (seed, epoch); a batch may straddle an epoch boundary.
class EpochSampler {
 public:
  EpochSampler(std::size_t dataset_size, std::uint64_t seed);
  std::vector<std::size_t> batch(std::uint64_t step, std::size_t batch_size);

 private:
  const std::vector<std::size_t>& permutation(std::uint64_t epoch);
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  std::vector<std::size_t> perm_;
};

struct StepMetrics {
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  std::array<double, kSourceCount> loss_per_source{};
  double wall_ms = 0.0;
};

// One JSON object per line.
void write_metrics_line(std::ostream& out, const StepMetrics& m, std::span<const Source> sources);

class Trainer {
 public:
  Trainer(EmbeddingModel model, TrainConfig config, std::optional<TrainerState> state = std::nullopt);

  // Performs one synchronous step: sample, chunk, reduce, update.
  StepMetrics step(const TrainingSet& data);

  // Steps until total_steps. Writes `<checkpoint_path>.step<N>` every checkpoint_every
  // steps when a path is given.
  void run(const TrainingSet& data, const std::function<void(const StepMetrics&)>& on_step = {},
           const std::optional<std::filesystem::path>& checkpoint_path = std::nullopt);

  // Chunk tasks for a given step, as used by step(); exposed for tests and benchmarks.
  std::vector<kernels::ChunkTask> build_chunks(const TrainingSet& data, std::uint64_t step);

  const EmbeddingModel& model() const { return model_; }
  EmbeddingModel& model() { return model_; }
  const TrainerState& state() const { return state_; }
  const TrainConfig& config() const { return config_; }
  void save(const std::filesystem::path& path) const { save_checkpoint(path, model_, &state_); }

 private:
  EmbeddingModel model_;
  TrainConfig config_;
  TrainerState state_;
  std::vector<std::uint8_t> decay_mask_;
  std::optional<EpochSampler> sampler_;
};

// Fresh model config matching a dataset and training config.
ModelConfig model_config_for(const TrainingSet& data, const TrainConfig& config,
                             std::vector<std::size_t> hidden_widths = {64}, std::size_t video_width = 32);

}  // namespace wvt
