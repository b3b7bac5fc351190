#include "wvt/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "wvt/kernels.hpp"
#include "wvt/random.hpp"

namespace wvt {

namespace {
constexpr std::uint64_t kRetrievalNegStream = 0x4e47;
constexpr std::uint64_t kProbeInitStream = 0x9b0e;
constexpr std::uint64_t kSplitStream = 0x5911;
}  // namespace

RetrievalReport summarize_ranks(Source s, std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw DataError("retrieval needs at least one example");
  RetrievalReport r;
  r.source = s;
  r.count = ranks.size();
  std::size_t hit1 = 0, hit5 = 0, hit10 = 0;
  for (auto k : ranks) {
    hit1 += k <= 1;
    hit5 += k <= 5;
    hit10 += k <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  r.recall_at_1 = static_cast<double>(hit1) / n;
  r.recall_at_5 = static_cast<double>(hit5) / n;
  r.recall_at_10 = static_cast<double>(hit10) / n;
  std::vector<std::size_t> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  r.median_rank = sorted[(sorted.size() + 1) / 2 - 1];
  return r;
}

Matrix extract_features(const EmbeddingModel& model, const Matrix& raw) {
  Matrix out(raw.rows, model.config().video_width);
  for (std::size_t i = 0; i < raw.rows; ++i) {
    const Vec f = forward_video(model, raw.row(i));
    std::ranges::copy(f, out.row(i).begin());
  }
  return out;
}

RetrievalReport evaluate_retrieval(const EmbeddingModel& model, const TrainingSet& data, Source s,
                                   bool parallel) {
  if (data.size() < 2) throw DataError("retrieval needs at least 2 examples");
  const Matrix fv = extract_features(model, data.features);
  const Matrix& targets = data.text[index_of(s)];
  Matrix preds(data.size(), targets.cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec p = predict_metadata(model, fv.row(i), s);
    std::ranges::copy(p, preds.row(i).begin());
  }
  const auto ranks = parallel ? kernels::own_ranks_omp(preds, targets) : kernels::own_ranks_serial(preds, targets);
  return summarize_ranks(s, ranks);
}

double dataset_loss(const EmbeddingModel& model, const TrainingSet& data, const TrainConfig& config,
                    std::uint64_t seed) {
  const std::size_t c = config.chunk_size;
  if (data.size() < c) throw DataError("dataset smaller than one chunk");
  Rng rng(mix_seed(seed, kRetrievalNegStream));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  std::vector<kernels::ChunkTask> chunks(data.size() / c);
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    auto& task = chunks[k];
    for (std::size_t i = 0; i < c; ++i) task.examples.push_back(data.example(order[k * c + i]));
    task.negatives.resize(c);
    for (Source s : config.sources) {
      const auto negs = sample_negatives(c, config.negatives, rng);
      for (std::size_t i = 0; i < c; ++i) task.negatives[i][index_of(s)] = negs[i];
    }
  }
  return kernels::chunked_gradient_omp(model, chunks, config.loss_config()).value;
}

// ---------------------------------------------------------------------------

Split stratified_split(std::span<const std::int64_t> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must be in (0, 1)");
  std::map<std::int64_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(mix_seed(seed, kSplitStream));
  Split split;
  for (auto& [label, rows] : by_class) {
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.uniform_index(i)]);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    n_test = std::min(n_test, rows.size() - 1);
    split.test.insert(split.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

double probe_objective(std::span<const double> weights, std::size_t classes, const Matrix& x,
                       std::span<const std::size_t> y, std::span<const std::size_t> idx,
                       double weight_decay, std::span<double> grad) {
  const std::size_t d = x.cols;
  const std::size_t stride = d + 1;
  if (weights.size() != classes * stride) throw DataError("probe weight size mismatch");
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  if (idx.empty()) throw DataError("probe needs at least one example");
  const double inv_n = 1.0 / static_cast<double>(idx.size());
  Vec logits(classes);
  double loss = 0.0;
  for (std::size_t i : idx) {
    const auto row = x.row(i);
    double mx = -INFINITY;
    for (std::size_t c = 0; c < classes; ++c) {
      const double* w = weights.data() + c * stride;
      double z = w[d];
      for (std::size_t k = 0; k < d; ++k) z += w[k] * row[k];
      logits[c] = z;
      mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (auto& z : logits) {
      z = std::exp(z - mx);
      sum += z;
    }
    loss += -(std::log(logits[y[i]] / sum)) * inv_n;
    if (grad.empty()) continue;
    for (std::size_t c = 0; c < classes; ++c) {
      const double g = (logits[c] / sum - (c == y[i] ? 1.0 : 0.0)) * inv_n;
      double* gw = grad.data() + c * stride;
      for (std::size_t k = 0; k < d; ++k) gw[k] += g * row[k];
      gw[d] += g;
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < d; ++k) {
      const double w = weights[c * stride + k];
      loss += 0.5 * weight_decay * w * w;
      if (!grad.empty()) grad[c * stride + k] += weight_decay * w;
    }
  }
  return loss;
}

ProbeReport linear_probe(const Matrix& features, std::span<const std::int64_t> labels, const Split& split,
                         const ProbeConfig& config) {
  if (labels.size() != features.rows) throw DataError("label count != feature rows");
  if (split.train.empty() || split.test.empty()) throw DataError("probe needs non-empty train and test splits");
  std::vector<std::int64_t> classes;
  for (auto i : split.train) classes.push_back(labels[i]);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw DataError("probe needs at least 2 classes in the train split");
  std::vector<std::size_t> y(labels.size(), 0);
  auto class_of = [&](std::int64_t l) -> std::optional<std::size_t> {
    auto it = std::lower_bound(classes.begin(), classes.end(), l);
    if (it == classes.end() || *it != l) return std::nullopt;
    return static_cast<std::size_t>(it - classes.begin());
  };
  for (auto i : split.train) y[i] = *class_of(labels[i]);
  for (auto i : split.test) {
    auto c = class_of(labels[i]);
    if (!c) throw DataError("class " + std::to_string(labels[i]) + " appears in test but not in train");
    y[i] = *c;
  }

  Matrix x = features;
  if (config.standardize) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      double mean = 0.0, var = 0.0;
      for (auto i : split.train) mean += x(i, k);
      mean /= static_cast<double>(split.train.size());
      for (auto i : split.train) var += (x(i, k) - mean) * (x(i, k) - mean);
      var /= static_cast<double>(split.train.size());
      const double inv = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) x(i, k) = (x(i, k) - mean) * inv;
    }
  }

  const std::size_t c = classes.size(), stride = x.cols + 1;
  Vec w(c * stride), g(c * stride);
  Rng rng(mix_seed(config.seed, kProbeInitStream));
  for (auto& v : w) v = rng.uniform(-0.01, 0.01);
  for (std::size_t t = 0; t < config.steps; ++t) {
    probe_objective(w, c, x, y, split.train, config.weight_decay, g);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= config.lr * g[k];
  }

  auto accuracy = [&](std::span<const std::size_t> idx) {
    std::size_t correct = 0;
    for (auto i : idx) {
      std::size_t best = 0;
      double best_z = -INFINITY;
      for (std::size_t cl = 0; cl < c; ++cl) {
        double z = w[cl * stride + x.cols];
        for (std::size_t k = 0; k < x.cols; ++k) z += w[cl * stride + k] * x(i, k);
        if (z > best_z) {
          best_z = z;
          best = cl;
        }
      }
      correct += best == y[i];
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
  };
  ProbeReport r;
  r.class_count = c;
  r.train_accuracy = accuracy(split.train);
  r.test_accuracy = accuracy(split.test);
  return r;
}

// ---------------------------------------------------------------------------

std::string subset_name(std::span<const Source> sources) {
  if (sources.size() == kSourceCount) return "all";
  return format_source_list(sources);
}

std::vector<std::int64_t> require_labels(const TrainingSet& data) {
  std::vector<std::int64_t> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.labels[i]) throw DataError("record '" + data.ids[i] + "' has no label");
    out.push_back(*data.labels[i]);
  }
  return out;
}

std::vector<ProbeReport> ablation_run(const TrainingSet& data, std::span<const std::vector<Source>> subsets,
                                      const AblationConfig& config) {
  const auto labels = require_labels(data);
  const Split split = stratified_split(labels, config.test_fraction, config.split_seed);
  std::vector<ProbeReport> rows;

  auto probe_model = [&](const EmbeddingModel& m, std::string name) {
    const Matrix f = extract_features(m, data.features);
    ProbeReport r = linear_probe(f, labels, split, config.probe);
    r.name = std::move(name);
    rows.push_back(std::move(r));
  };

  TrainConfig scratch_cfg = config.train;
  probe_model(init_model(model_config_for(data, scratch_cfg, config.hidden_widths, config.video_width)), "scratch");

  for (const auto& subset : subsets) {
    if (subset.empty()) throw ConfigError("ablation source subsets must be non-empty");
    TrainConfig tc = config.train;
    tc.sources = subset;
    Trainer trainer(init_model(model_config_for(data, tc, config.hidden_widths, config.video_width)), tc);
    trainer.run(data);
    probe_model(trainer.model(), subset_name(subset));
  }
  return rows;
}

// ---------------------------------------------------------------------------

SyntheticData generate_synthetic(const GeneratorConfig& cfg) {
  if (cfg.classes < 1 || cfg.per_class < 1 || cfg.input_width < 1 || cfg.text_width < 1 ||
      cfg.class_width < 1)
    throw ConfigError("generator sizes must be >= 1");
  if (cfg.noise < 0.0 || cfg.instance_scale < 0.0 || cfg.class_scale < 0.0)
    throw ConfigError("generator scales must be >= 0");
  for (double s : cfg.source_noise)
    if (s < 0.0) throw ConfigError("source noise must be >= 0");
  if (cfg.tokens_per_text < 1) throw ConfigError("tokens per text must be >= 1");
  if (cfg.hidden_views >= kSourceCount) throw ConfigError("hidden views must be < 4");

  Rng rng(cfg.seed);
  const std::size_t latent = cfg.class_width + cfg.instance_width;

  // Gaussian map with entries N(0, 1/rows), approximately norm preserving.
  auto random_map = [&](std::size_t rows) {
    Matrix m(rows, latent);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    for (auto& v : m.data) v = rng.normal() * scale;
    return m;
  };
  auto lift = [](const Matrix& m, const Vec& z) {
    Vec out(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) out[r] += m(r, c) * z[c];
    return out;
  };

  std::vector<Vec> centers(cfg.classes, Vec(cfg.class_width));
  for (auto& c : centers) {
    double norm = 0.0;
    for (auto& v : c) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : c) v *= cfg.class_scale / norm;
  }
  const Matrix video_map = random_map(cfg.input_width);
  std::array<Matrix, kSourceCount> text_maps;
  for (auto& m : text_maps) m = random_map(cfg.text_width);
  for (std::size_t s = 0; s < kSourceCount; ++s)
    for (std::size_t d = 0; d < cfg.class_width; ++d)
      if ((d + kSourceCount - s) % kSourceCount < cfg.hidden_views)
        for (std::size_t r = 0; r < cfg.text_width; ++r) text_maps[s](r, d) = 0.0;

  SyntheticData out;
  out.tokens.width = static_cast<std::uint32_t>(cfg.text_width);
  Vec empty(cfg.text_width);
  for (auto& v : empty) v = rng.normal() / std::sqrt(static_cast<double>(cfg.text_width));
  out.tokens.empty_embedding = empty;
  const std::size_t n = cfg.classes * cfg.per_class;
  out.video.features = Matrix(n, cfg.input_width);

  auto text_latent = [&](Vec z) {
    if (!cfg.text_sees_instance) std::fill(z.begin() + static_cast<std::ptrdiff_t>(cfg.class_width), z.end(), 0.0);
    return z;
  };
  auto tokens = [&](Source s, const Vec& z, std::size_t count) {
    std::vector<Vec> toks;
    for (std::size_t t = 0; t < count; ++t) {
      Vec v = lift(text_maps[index_of(s)], text_latent(z));
      for (auto& x : v) x = static_cast<float>(x + cfg.source_noise[index_of(s)] * rng.normal());
      toks.push_back(std::move(v));
    }
    return toks;
  };

  for (std::size_t k = 0; k < cfg.classes; ++k) {
    for (std::size_t j = 0; j < cfg.per_class; ++j) {
      const std::size_t i = k * cfg.per_class + j;
      Vec z(latent, 0.0);
      std::copy(centers[k].begin(), centers[k].end(), z.begin());
      for (std::size_t d = cfg.class_width; d < latent; ++d) z[d] = cfg.instance_scale * rng.normal();

      MetadataRecord r;
      char id[32];
      std::snprintf(id, sizeof id, "syn-%06zu", i);
      r.id = id;
      r.query = "class " + std::to_string(k);
      r.rank = static_cast<std::int64_t>(j + 1);
      r.title = "class " + std::to_string(k) + " clip " + std::to_string(j);
      r.description = "synthetic clip " + std::to_string(j) + " of class " + std::to_string(k);
      for (std::size_t t = 0; t < cfg.tags_per_record; ++t)
        r.tags.push_back("tag" + std::to_string(k) + "_" + std::to_string(t));
      r.channel = "channel " + std::to_string(k % 3);
      r.duration_s = 30.0;
      r.age_days = 365;
      r.label = static_cast<std::int64_t>(k);
      out.records.push_back(r);

      out.video.ids.push_back(r.id);
      const Vec v = lift(video_map, z);
      auto row = out.video.features.row(i);
      for (std::size_t c = 0; c < cfg.input_width; ++c)
        row[c] = static_cast<float>(v[c] + cfg.noise * rng.normal());

      TokenEmbeddingSet te;
      te.record_id = r.id;
      te.title = tokens(Source::Title, z, cfg.tokens_per_text);
      te.description = tokens(Source::Description, z, cfg.tokens_per_text);
      // tags share the token budget so every source pools the same number of tokens
      const std::size_t per_tag = std::max<std::size_t>(1, cfg.tokens_per_text / std::max<std::size_t>(1, cfg.tags_per_record));
      for (std::size_t g = 0; g < cfg.tags_per_record; ++g) te.tags.push_back(tokens(Source::Tags, z, per_tag));
      te.channel = tokens(Source::Channel, z, cfg.tokens_per_text);
      out.tokens.records.push_back(std::move(te));
    }
  }
  for (auto& v : *out.tokens.empty_embedding) v = static_cast<float>(v);
  return out;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_corpus(dir / "corpus.jsonl", data.records);
  write_video_file(dir / "video.wvtv", data.video);
  write_token_file(dir / "tokens.wvte", data.tokens);
}

}  // namespace wvt
