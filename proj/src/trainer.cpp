#include "wvt/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

namespace wvt {

namespace {
constexpr std::uint64_t kStepStream = 0x57e9;
constexpr std::uint64_t kEpochStream = 0xe90c;
}  // namespace

void TrainConfig::validate() const {
  if (chunk_size < 2) throw ConfigError("chunk size must be >= 2");
  if (batch_size == 0 || batch_size % chunk_size != 0)
    throw ConfigError("chunk size must divide batch size");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  if (total_steps > 0 && warmup_steps >= total_steps)
    throw ConfigError("warmup steps must be < total steps");
  if (!(lr_start > 0.0 && lr_peak > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  loss_config().validate();
}

double learning_rate(std::uint64_t step, const TrainConfig& c) {
  if (step < c.warmup_steps) {
    const double frac = static_cast<double>(step) / static_cast<double>(c.warmup_steps);
    return c.lr_start * std::pow(c.lr_peak / c.lr_start, frac);
  }
  if (c.total_steps <= c.warmup_steps) return c.lr_peak;
  const double progress = static_cast<double>(step - c.warmup_steps) /
                          static_cast<double>(c.total_steps - c.warmup_steps);
  return 0.5 * c.lr_peak * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<std::vector<std::size_t>> sample_negatives(std::size_t chunk_size, std::size_t k, Rng& rng) {
  if (chunk_size < 2) throw ConfigError("negative sampling needs a chunk of at least 2");
  if (k < 1) throw ConfigError("K must be >= 1");
  const std::size_t others = chunk_size - 1;
  std::vector<std::vector<std::size_t>> out(chunk_size);
  std::vector<std::size_t> pool(others);
  for (std::size_t a = 0; a < chunk_size; ++a) {
    auto& negs = out[a];
    negs.reserve(k);
    if (others >= k) {
      // Partial Fisher-Yates over the other members.
      for (std::size_t j = 0; j < others; ++j) pool[j] = j < a ? j : j + 1;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t pick = j + rng.uniform_index(others - j);
        std::swap(pool[j], pool[pick]);
        negs.push_back(pool[j]);
      }
    } else {
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = rng.uniform_index(others);
        negs.push_back(idx < a ? idx : idx + 1);
      }
    }
  }
  return out;
}

void nesterov_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
                   double lr, double mu, double lambda, std::span<const std::uint8_t> decay_mask) {
  if (grads.size() != params.size() || velocity.size() != params.size() ||
      (!decay_mask.empty() && decay_mask.size() != params.size()))
    throw DataError("optimizer shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double decay = decay_mask.empty() || decay_mask[i] ? lambda : 0.0;
    const double g = grads[i] + decay * params[i];
    velocity[i] = mu * velocity[i] - lr * g;
    params[i] += mu * velocity[i] - lr * g;
  }
}

EpochSampler::EpochSampler(std::size_t dataset_size, std::uint64_t seed) : n_(dataset_size), seed_(seed) {
  if (n_ == 0) throw DataError("cannot sample from an empty dataset");
}

const std::vector<std::size_t>& EpochSampler::permutation(std::uint64_t epoch) {
  if (epoch != cached_epoch_) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    Rng rng(mix_seed(mix_seed(seed_, kEpochStream), epoch));
    for (std::size_t i = n_; i > 1; --i) std::swap(perm_[i - 1], perm_[rng.uniform_index(i)]);
    cached_epoch_ = epoch;
  }
  return perm_;
}

std::vector<std::size_t> EpochSampler::batch(std::uint64_t step, std::size_t batch_size) {
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  std::uint64_t pos = step * batch_size;
  while (out.size() < batch_size) {
    const auto& perm = permutation(pos / n_);
    out.push_back(perm[pos % n_]);
    ++pos;
  }
  return out;
}

void write_metrics_line(std::ostream& out, const StepMetrics& m, std::span<const Source> sources) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["lr"] = m.lr;
  j["loss_total"] = m.loss_total;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (Source s : sources) per[std::string(source_name(s))] = m.loss_per_source[index_of(s)];
  j["loss_per_source"] = per;
  j["wall_ms"] = m.wall_ms;
  out << j.dump() << '\n';
}

Trainer::Trainer(EmbeddingModel model, TrainConfig config, std::optional<TrainerState> state)
    : model_(std::move(model)), config_(std::move(config)) {
  config_.validate();
  for (Source s : config_.sources)
    if (!model_.layout().has_source(s))
      throw ConfigError("model has no projection head for source " + std::string(source_name(s)));
  if (state) {
    if (state->velocity.size() != model_.layout().size())
      throw DataError("optimizer state does not match the model");
    state_ = std::move(*state);
  } else {
    state_.velocity.assign(model_.layout().size(), 0.0);
  }
  if (!config_.decay_biases) {
    decay_mask_ = model_.layout().bias_mask();
    for (auto& m : decay_mask_) m = m ? 0 : 1;
  }
}

std::vector<kernels::ChunkTask> Trainer::build_chunks(const TrainingSet& data, std::uint64_t step) {
  if (data.size() < config_.chunk_size)
    throw DataError("dataset has fewer records than one chunk");
  if (!sampler_) sampler_.emplace(data.size(), config_.seed);
  const auto rows = sampler_->batch(step, config_.batch_size);
  Rng rng(mix_seed(mix_seed(config_.seed, kStepStream), step));
  const std::size_t c = config_.chunk_size;
  const auto& mcfg = model_.config();

  std::vector<kernels::ChunkTask> chunks(rows.size() / c);
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    auto& task = chunks[k];
    for (std::size_t i = 0; i < c; ++i) task.examples.push_back(data.example(rows[k * c + i]));
    task.negatives.resize(c);
    std::vector<std::vector<std::size_t>> shared;
    for (Source s : config_.sources) {
      if (!config_.share_negatives || shared.empty()) shared = sample_negatives(c, config_.negatives, rng);
      for (std::size_t i = 0; i < c; ++i) task.negatives[i][index_of(s)] = shared[i];
    }
    if (mcfg.dropout_rate > 0.0)
      for (std::size_t i = 0; i < c; ++i)
        task.masks.push_back(draw_dropout_mask(rng, mcfg.video_width, mcfg.dropout_rate));
  }
  return chunks;
}

StepMetrics Trainer::step(const TrainingSet& data) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t s = state_.step;
  const auto chunks = build_chunks(data, s);
  const LossConfig lc = config_.loss_config();
  const LossOutput out = config_.parallel ? kernels::chunked_gradient_omp(model_, chunks, lc)
                                          : kernels::chunked_gradient_serial(model_, chunks, lc);
  if (!std::isfinite(out.value))
    throw DataError("non-finite loss at step " + std::to_string(s));

  const double lr = learning_rate(s, config_);
  nesterov_step(model_.parameters(), out.param_grad, state_.velocity, lr, config_.momentum,
                config_.weight_decay, decay_mask_);
  for (double v : state_.velocity)
    if (!std::isfinite(v)) throw DataError("non-finite optimizer velocity at step " + std::to_string(s));
  ++state_.step;

  StepMetrics m;
  m.step = s;
  m.lr = lr;
  m.loss_total = out.value;
  m.loss_per_source = out.per_source;
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

void Trainer::run(const TrainingSet& data, const std::function<void(const StepMetrics&)>& on_step,
                  const std::optional<std::filesystem::path>& checkpoint_path) {
  while (state_.step < config_.total_steps) {
    const StepMetrics m = step(data);
    if (on_step) on_step(m);
    if (checkpoint_path && config_.checkpoint_every > 0 && state_.step % config_.checkpoint_every == 0 &&
        state_.step < config_.total_steps) {
      auto p = *checkpoint_path;
      p += ".step" + std::to_string(state_.step);
      save(p);
    }
  }
}

ModelConfig model_config_for(const TrainingSet& data, const TrainConfig& config,
                             std::vector<std::size_t> hidden_widths, std::size_t video_width) {
  ModelConfig m;
  m.input_width = data.features.cols;
  m.hidden_widths = std::move(hidden_widths);
  m.video_width = video_width;
  m.text_width = data.text_width();
  m.sources = config.sources;
  m.dropout_rate = config.dropout;
  m.seed = config.seed;
  return m;
}

}  // namespace wvt
