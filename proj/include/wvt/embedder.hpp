#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wvt/common.hpp"
#include "wvt/random.hpp"

namespace wvt {

struct ModelConfig {
  std::size_t input_width = 0;                 // D_in
  std::vector<std::size_t> hidden_widths{64};  // ReLU layers; empty = single affine layer
  std::size_t video_width = 32;                // D_v
  std::size_t text_width = 768;                // D_t
  std::vector<Source> sources{kAllSources.begin(), kAllSources.end()};
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Location of one weight matrix or bias vector inside the flat parameter vector.
struct Block {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t size() const { return rows * cols; }
};

// Flat layout: head layers in order (W then b), then one (W, b) per configured
// source in configuration order. Gradients and velocities share this layout.
class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelConfig& cfg);

  std::size_t size() const { return total_; }
  std::size_t layer_count() const { return layer_w_.size(); }
  const Block& layer_weight(std::size_t l) const { return layer_w_[l]; }
  const Block& layer_bias(std::size_t l) const { return layer_b_[l]; }
  bool has_source(Source s) const { return source_w_[index_of(s)].has_value(); }
  const Block& source_weight(Source s) const;
  const Block& source_bias(Source s) const;
  // 1 for bias entries, 0 for weight entries.
  std::vector<std::uint8_t> bias_mask() const;

 private:
  std::vector<Block> layer_w_, layer_b_;
  std::array<std::optional<Block>, kSourceCount> source_w_, source_b_;
  std::size_t total_ = 0;
};

// Read-only or mutable row-major view of a Block within a flat buffer.
template <class T>
struct MatrixView {
  T* data;
  std::size_t rows;
  std::size_t cols;
  T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<T> flat() const { return {data, rows * cols}; }
};

template <class T>
MatrixView<T> view(std::span<T> flat, const Block& b) {
  return {flat.data() + b.offset, b.rows, b.cols};
}

// Video head (affine layers with ReLU between them) plus per-source projections.
class EmbeddingModel {
 public:
  EmbeddingModel(ModelConfig cfg, Vec params);

  const ModelConfig& config() const { return cfg_; }
  const ParameterLayout& layout() const { return layout_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  bool operator==(const EmbeddingModel& o) const {
    return cfg_ == o.cfg_ && params_ == o.params_ && rng_.state() == o.rng_.state();
  }

 private:
  ModelConfig cfg_;
  ParameterLayout layout_;
  Vec params_;
  Rng rng_;
};

// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases, deterministic in cfg.seed.
EmbeddingModel init_model(const ModelConfig& cfg);

// Inverted-dropout scale factors: 0 or 1/(1-p) per unit.
Vec draw_dropout_mask(Rng& rng, std::size_t width, double rate);

// Intermediate values of one head evaluation, kept for the backward pass.
struct HeadTrace {
  std::vector<Vec> pre;  // pre-activation of each layer
  std::vector<Vec> out;  // activation fed to the next layer (input first)
  Vec f_v;               // final output after dropout
};

// Evaluates the head; `mask` (if non-empty) multiplies the final output.
HeadTrace trace_video(const EmbeddingModel& model, std::span<const double> x,
                      std::span<const double> mask);

// f_v for one raw feature vector. Train mode draws a dropout mask from model.rng().
Vec forward_video(EmbeddingModel& model, std::span<const double> x, Mode mode);
Vec forward_video(const EmbeddingModel& model, std::span<const double> x);  // eval mode

// W(s) f_v + b(s)
Vec predict_metadata(const EmbeddingModel& model, std::span<const double> f_v, Source s);

// Optional trainer state stored alongside the model in a checkpoint.
struct TrainerState {
  std::uint64_t step = 0;
  Vec velocity;
  bool operator==(const TrainerState&) const = default;
};

struct Checkpoint {
  EmbeddingModel model;
  std::optional<TrainerState> trainer;
};

// "WVTC" checkpoint: config, source list, f64 parameters, model rng state, then
// optional trainer state.
std::string encode_checkpoint(const EmbeddingModel& model, const TrainerState* state);
Checkpoint decode_checkpoint(std::string bytes, const std::string& what = "checkpoint");
void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model,
                     const TrainerState* state = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wvt
