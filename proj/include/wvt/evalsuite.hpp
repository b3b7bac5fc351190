#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wvt/corpus.hpp"
#include "wvt/dataset.hpp"
#include "wvt/embedder.hpp"
#include "wvt/textpool.hpp"
#include "wvt/trainer.hpp"

namespace wvt {

// ---------------------------------------------------------------------------
// Retrieval

struct RetrievalReport {
  Source source = Source::Title;
  std::size_t count = 0;
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double recall_at_10 = 0.0;
  std::size_t median_rank = 0;
};

// Recall@k from own-metadata ranks; median is the nearest-rank median.
RetrievalReport summarize_ranks(Source s, std::span<const std::size_t> ranks);

// Ranks every f_t(s) in the set by cosine distance to each example's predicted
// metadata (eval mode). Ties are broken by example index.
RetrievalReport evaluate_retrieval(const EmbeddingModel& model, const TrainingSet& data, Source s,
                                   bool parallel = true);

// Eval-mode f_v for every example.
Matrix extract_features(const EmbeddingModel& model, const Matrix& raw);

// Mean eval-mode batch loss over the whole set: rows shuffled from `seed`, split into
// chunks, negatives drawn as in training.
double dataset_loss(const EmbeddingModel& model, const TrainingSet& data, const TrainConfig& config,
                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Linear probe

struct ProbeConfig {
  std::size_t steps = 500;
  double lr = 0.5;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool standardize = true;  // z-score features with train-split statistics
};

struct ProbeReport {
  std::string name;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t class_count = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-class shuffled split; each class contributes round(test_fraction * count) to test,
// keeping at least one example of every class in train.
Split stratified_split(std::span<const std::int64_t> labels, double test_fraction, std::uint64_t seed);

// Softmax cross-entropy over rows `idx` of `x` for a C x (D+1) weight matrix
// (last column is the bias), plus 0.5 * weight_decay * |W|^2 over non-bias weights.
// Writes the gradient into `grad` when it is non-empty.
double probe_objective(std::span<const double> weights, std::size_t classes, const Matrix& x,
                       std::span<const std::size_t> y, std::span<const std::size_t> idx,
                       double weight_decay, std::span<double> grad);

ProbeReport linear_probe(const Matrix& features, std::span<const std::int64_t> labels, const Split& split,
                         const ProbeConfig& config);

// ---------------------------------------------------------------------------
// Ablation over metadata sources

struct AblationConfig {
  TrainConfig train;
  std::vector<std::size_t> hidden_widths{64};
  std::size_t video_width = 32;
  ProbeConfig probe;
  double test_fraction = 0.5;
  std::uint64_t split_seed = 0;
};

std::string subset_name(std::span<const Source> sources);

// Row "scratch" (untrained model) followed by one row per source subset, all with the
// same model seed, training seed and probe split.
std::vector<ProbeReport> ablation_run(const TrainingSet& data, std::span<const std::vector<Source>> subsets,
                                      const AblationConfig& config);

std::vector<std::int64_t> require_labels(const TrainingSet& data);

// ---------------------------------------------------------------------------
// Synthetic data with known class structure

// Each record has a latent made of a class part (a unit vector per class, scaled by
// class_scale) and an instance part (per-record Gaussian with std instance_scale).
// Video features lift the latent to D_in and add Gaussian noise sigma; every text
// token lifts it to D_t with its own per-source map and adds independent noise.
// Tags split tokens_per_text between them, so pooled noise follows source_noise.
// Source s does not observe class dimensions d with (d - s) mod 4 < hidden_views, so
// with hidden_views >= 1 only the union of all sources sees the full class signal.
struct GeneratorConfig {
  std::size_t classes = 10;
  std::size_t per_class = 100;
  std::size_t input_width = 128;  // D_in
  std::size_t text_width = 64;    // D_t
  std::size_t class_width = 16;
  std::size_t instance_width = 16;
  double class_scale = 1.5;
  double instance_scale = 0.5;
  double noise = 0.1;  // sigma, video feature noise
  std::uint64_t seed = 0;
  // Token noise per source (title, description, tags, channel).
  std::array<double, kSourceCount> source_noise{0.1, 0.2, 0.4, 0.8};
  std::size_t tokens_per_text = 4;
  std::size_t tags_per_record = 2;
  std::size_t hidden_views = 1;
  // When false, text is lifted from the class part only and the instance part is
  // nuisance variation seen by the video alone.
  bool text_sees_instance = true;
};

struct SyntheticData {
  std::vector<MetadataRecord> records;
  VideoFeatureFile video;
  TokenFile tokens;
};

SyntheticData generate_synthetic(const GeneratorConfig& config);

// corpus.jsonl, video.wvtv and tokens.wvte under dir.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace wvt
