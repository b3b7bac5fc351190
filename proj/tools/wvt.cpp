// wvt: corpus tools, training and evaluation from one entry point.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "wvt/corpus.hpp"
#include "wvt/dataset.hpp"
#include "wvt/evalsuite.hpp"
#include "wvt/kernels.hpp"
#include "wvt/stats.hpp"
#include "wvt/textpool.hpp"
#include "wvt/trainer.hpp"

namespace {

using namespace wvt;

struct DataPaths {
  std::string corpus, video, tokens;

  void add_to(CLI::App* app) {
    app->add_option("--corpus", corpus, "Corpus file (one record per line)")->required()->check(CLI::ExistingFile);
    app->add_option("--video-feats", video, "Raw video feature file")->required()->check(CLI::ExistingFile);
    app->add_option("--token-embs", tokens, "Token embedding file")->required()->check(CLI::ExistingFile);
  }

  TrainingSet load() const {
    const auto records = read_corpus(corpus);
    return assemble_dataset(records, read_video_file(video), read_token_file(tokens));
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

void emit(const std::string& text, const std::string& out_path) {
  std::cout << text;
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_path);
    out << text;
  }
}

std::string retrieval_block(const RetrievalReport& r) {
  std::ostringstream os;
  os << "[retrieval " << source_name(r.source) << "]\n"
     << "count = " << r.count << "\n"
     << "recall_at_1 = " << fmt(r.recall_at_1) << "\n"
     << "recall_at_5 = " << fmt(r.recall_at_5) << "\n"
     << "recall_at_10 = " << fmt(r.recall_at_10) << "\n"
     << "median_rank = " << r.median_rank << "\n";
  return os.str();
}

std::string probe_block(const ProbeReport& r) {
  std::ostringstream os;
  os << "[probe " << r.name << "]\n"
     << "class_count = " << r.class_count << "\n"
     << "train_accuracy = " << fmt(r.train_accuracy) << "\n"
     << "test_accuracy = " << fmt(r.test_accuracy) << "\n";
  return os.str();
}

std::vector<std::size_t> parse_widths(const std::string& csv) {
  std::vector<std::size_t> out;
  if (csv.empty() || csv == "none") return out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("bad width list '" + csv + "'");
    }
  }
  return out;
}

// Optimizer and schedule flags shared by train and eval ablation.
struct TrainFlags {
  TrainConfig cfg;
  std::string sources = "all";
  std::string hidden = "64";
  std::size_t video_width = 32;
  bool serial = false;
  bool no_bias_decay = false;

  void add_to(CLI::App* app) {
    app->add_option("--sources", sources, "Metadata sources: comma list or 'all'")->capture_default_str();
    app->add_option("--steps", cfg.total_steps, "Total training steps")->capture_default_str();
    app->add_option("--batch", cfg.batch_size, "Batch size")->capture_default_str();
    app->add_option("--chunk", cfg.chunk_size, "Chunk size for in-batch negatives")->capture_default_str();
    app->add_option("--negatives", cfg.negatives, "Negatives per positive (K)")->capture_default_str();
    app->add_option("--margin", cfg.margin, "Ranking margin")->capture_default_str();
    app->add_option("--warmup", cfg.warmup_steps, "Warmup steps")->capture_default_str();
    app->add_option("--lr-start", cfg.lr_start, "Learning rate at step 0")->capture_default_str();
    app->add_option("--lr-peak", cfg.lr_peak, "Learning rate at the end of warmup")->capture_default_str();
    app->add_option("--momentum", cfg.momentum, "Nesterov momentum")->capture_default_str();
    app->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay")->capture_default_str();
    app->add_option("--dropout", cfg.dropout, "Dropout on the video embedding")->capture_default_str();
    app->add_option("--hidden", hidden, "Hidden layer widths, comma list or 'none'")->capture_default_str();
    app->add_option("--video-width", video_width, "Video embedding width")->capture_default_str();
    app->add_flag("--share-negatives", cfg.share_negatives, "Use one negative draw for all sources");
    app->add_flag("--no-bias-decay", no_bias_decay, "Exclude biases from weight decay");
    app->add_flag("--serial", serial, "Use the serial chunk kernel");
  }

  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig c = cfg;
    c.sources = parse_source_list(sources);
    c.seed = seed;
    c.decay_biases = !no_bias_decay;
    c.parallel = !serial;
    c.validate();
    return c;
  }
};

struct ProbeFlags {
  ProbeConfig cfg;
  double test_fraction = 0.5;

  void add_to(CLI::App* app) {
    app->add_option("--probe-steps", cfg.steps, "Probe gradient steps")->capture_default_str();
    app->add_option("--probe-lr", cfg.lr, "Probe learning rate")->capture_default_str();
    app->add_option("--probe-wd", cfg.weight_decay, "Probe weight decay")->capture_default_str();
    app->add_option("--test-fraction", test_fraction, "Held-out fraction per class")->capture_default_str();
  }
};

std::vector<std::vector<Source>> parse_subsets(const std::string& list) {
  std::vector<std::vector<Source>> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_source_list(item));
  if (out.empty()) throw ConfigError("no source subsets given");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Video representation learning from web video metadata"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  int threads = 0;
  bool quiet = false;
  app.add_option("--seed", seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  // subset
  auto* subset = app.add_subcommand("subset", "Keep the top-N search results per query");
  std::string in_path, out_path;
  std::int64_t per_query = 0;
  subset->add_option("--in", in_path, "Input corpus")->required()->check(CLI::ExistingFile);
  subset->add_option("--out", out_path, "Output corpus")->required();
  subset->add_option("--per-query", per_query, "Results kept per query")->required();

  // filter
  auto* filter = app.add_subcommand("filter", "Drop short, recent and denylisted videos");
  std::string deny_path;
  FilterRules rules;
  filter->add_option("--in", in_path, "Input corpus")->required()->check(CLI::ExistingFile);
  filter->add_option("--out", out_path, "Output corpus")->required();
  filter->add_option("--denylist", deny_path, "Evaluation-set ids, one per line")->required()->check(CLI::ExistingFile);
  filter->add_option("--min-duration", rules.min_duration_s, "Minimum duration in seconds")->capture_default_str();
  filter->add_option("--recent-days", rules.max_recent_days, "Discard videos at most this many days old")
      ->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus statistics, optionally over growing subsets");
  std::string sizes_csv, plot_path;
  StatsOptions stats_opts;
  stats->add_option("--in", in_path, "Input corpus")->required()->check(CLI::ExistingFile);
  stats->add_option("--subset-sizes", sizes_csv, "Ascending comma list of subset sizes");
  stats->add_flag("--nonmissing-only", stats_opts.nonmissing_only, "Average word counts over non-empty fields");
  stats->add_option("--out", out_path, "Also write the report here");
  stats->add_option("--plot-table", plot_path, "Write size/indicator/value rows here");

  // train
  auto* train = app.add_subcommand("train", "Train the video head and metadata projections");
  DataPaths train_data;
  TrainFlags train_flags;
  std::string ckpt_out, metrics_path, resume_path;
  train_data.add_to(train);
  train_flags.add_to(train);
  train->add_option("--out", ckpt_out, "Final checkpoint")->required();
  train->add_option("--metrics", metrics_path, "Per-step metrics log");
  train->add_option("--checkpoint-every", train_flags.cfg.checkpoint_every, "Write <out>.stepN every N steps");
  train->add_option("--resume", resume_path, "Continue from a checkpoint with trainer state")
      ->check(CLI::ExistingFile);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->require_subcommand(1);
  auto* retrieval = eval->add_subcommand("retrieval", "Recall@k of each video's own metadata");
  DataPaths eval_data;
  std::string ckpt_in, source_arg = "all";
  eval_data.add_to(retrieval);
  retrieval->add_option("--checkpoint", ckpt_in, "Model checkpoint")->required()->check(CLI::ExistingFile);
  retrieval->add_option("--source", source_arg, "Sources to evaluate")->capture_default_str();
  retrieval->add_option("--out", out_path, "Also write the report here");

  auto* probe = eval->add_subcommand("probe", "Linear probe on frozen video embeddings");
  ProbeFlags probe_flags;
  bool raw_features = false;
  eval_data.add_to(probe);
  probe->add_option("--checkpoint", ckpt_in, "Model checkpoint")->check(CLI::ExistingFile);
  probe->add_flag("--raw", raw_features, "Probe the raw video features instead of a model");
  probe_flags.add_to(probe);
  probe->add_option("--out", out_path, "Also write the report here");

  auto* ablation = eval->add_subcommand("ablation", "Pre-train per source subset, then probe");
  TrainFlags abl_flags;
  ProbeFlags abl_probe;
  std::string subsets_arg = "title;description;tags;channel;all";
  eval_data.add_to(ablation);
  abl_flags.add_to(ablation);
  abl_probe.add_to(ablation);
  ablation->add_option("--subsets", subsets_arg, "Semicolon-separated source subsets")->capture_default_str();
  ablation->add_option("--out", out_path, "Also write the report here");

  // gen
  auto* gen = app.add_subcommand("gen", "Write a synthetic corpus with known classes");
  GeneratorConfig gcfg;
  std::string gen_dir, noise_csv;
  gen->add_option("--classes", gcfg.classes, "Number of classes")->capture_default_str();
  gen->add_option("--per-class", gcfg.per_class, "Records per class")->capture_default_str();
  gen->add_option("--noise", gcfg.noise, "Video feature noise")->capture_default_str();
  gen->add_option("--input-width", gcfg.input_width, "Raw video feature width")->capture_default_str();
  gen->add_option("--text-width", gcfg.text_width, "Text embedding width")->capture_default_str();
  gen->add_option("--source-noise", noise_csv, "Token noise for title,description,tags,channel");
  gen->add_option("--hidden-views", gcfg.hidden_views, "Class dimensions hidden per source (of every 4)")
      ->capture_default_str();
  gen->add_option("--out", gen_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  kernels::set_thread_count(threads);
  auto log = [&](const std::string& msg) {
    if (!quiet) std::cerr << msg << '\n';
  };

  if (*subset) {
    const auto recs = read_corpus(in_path);
    const auto out = take_top_per_query(recs, per_query);
    write_corpus(out_path, out);
    log("kept " + std::to_string(out.size()) + " of " + std::to_string(recs.size()) + " records");
  } else if (*filter) {
    const auto deny = Denylist::load(deny_path);
    std::vector<MetadataRecord> out;
    CorpusReader reader(in_path);
    std::size_t total = 0;
    while (auto r = reader.next()) {
      ++total;
      if (filter_record(*r, deny, rules)) out.push_back(std::move(*r));
    }
    write_corpus(out_path, out);
    log("kept " + std::to_string(out.size()) + " of " + std::to_string(total) + " records");
  } else if (*stats) {
    const auto recs = read_corpus(in_path);
    std::vector<std::size_t> sizes = parse_widths(sizes_csv);
    if (sizes.empty()) sizes.push_back(recs.size());
    const auto rows = stats_by_subset(recs, sizes, stats_opts);
    std::string report;
    for (const auto& row : rows) {
      if (row.warning) log("warning: " + *row.warning);
      report += format_stats_block(row) + "\n";
    }
    emit(report, out_path);
    if (!plot_path.empty()) {
      std::ofstream plot(plot_path, std::ios::binary | std::ios::trunc);
      if (!plot) throw DataError("cannot write " + plot_path);
      plot << format_plot_table(rows);
    }
  } else if (*train) {
    const TrainConfig tc = train_flags.resolve(seed);
    const auto data = train_data.load();
    std::optional<Trainer> trainer;
    if (!resume_path.empty()) {
      auto ck = load_checkpoint(resume_path);
      if (!ck.trainer) throw DataError(resume_path + ": checkpoint has no trainer state to resume");
      trainer.emplace(std::move(ck.model), tc, std::move(ck.trainer));
    } else {
      trainer.emplace(init_model(model_config_for(data, tc, parse_widths(train_flags.hidden), train_flags.video_width)), tc);
    }
    std::ofstream metrics;
    if (!metrics_path.empty()) {
      metrics.open(metrics_path, std::ios::binary | (resume_path.empty() ? std::ios::trunc : std::ios::app));
      if (!metrics) throw DataError("cannot write " + metrics_path);
    }
    log("training " + std::to_string(data.size()) + " examples, hidden " + join_widths(trainer->model().config().hidden_widths) +
        ", steps " + std::to_string(trainer->state().step) + " -> " + std::to_string(tc.total_steps));
    trainer->run(
        data,
        [&](const StepMetrics& m) {
          if (metrics.is_open()) write_metrics_line(metrics, m, tc.sources);
          if (!quiet && (m.step % 100 == 0 || m.step + 1 == tc.total_steps))
            std::cerr << "step " << m.step << " lr " << fmt(m.lr) << " loss " << fmt(m.loss_total) << '\n';
        },
        std::filesystem::path(ckpt_out));
    trainer->save(ckpt_out);
  } else if (*retrieval) {
    const auto ck = load_checkpoint(ckpt_in);
    const auto data = eval_data.load();
    std::string report;
    for (Source s : parse_source_list(source_arg)) {
      if (!ck.model.layout().has_source(s)) {
        log("skipping " + std::string(source_name(s)) + ": no projection head in checkpoint");
        continue;
      }
      report += retrieval_block(evaluate_retrieval(ck.model, data, s)) + "\n";
    }
    emit(report, out_path);
  } else if (*probe) {
    if (ckpt_in.empty() == !raw_features) throw ConfigError("give exactly one of --checkpoint or --raw");
    const auto data = eval_data.load();
    const auto labels = require_labels(data);
    const auto split = stratified_split(labels, probe_flags.test_fraction, seed);
    ProbeConfig pc = probe_flags.cfg;
    pc.seed = seed;
    ProbeReport r;
    if (raw_features) {
      r = linear_probe(data.features, labels, split, pc);
      r.name = "raw";
    } else {
      const auto ck = load_checkpoint(ckpt_in);
      r = linear_probe(extract_features(ck.model, data.features), labels, split, pc);
      r.name = std::filesystem::path(ckpt_in).filename().string();
    }
    emit(probe_block(r), out_path);
  } else if (*ablation) {
    AblationConfig ac;
    ac.train = abl_flags.resolve(seed);
    ac.hidden_widths = parse_widths(abl_flags.hidden);
    ac.video_width = abl_flags.video_width;
    ac.probe = abl_probe.cfg;
    ac.probe.seed = seed;
    ac.test_fraction = abl_probe.test_fraction;
    ac.split_seed = seed;
    const auto subsets = parse_subsets(subsets_arg);
    const auto data = eval_data.load();
    std::string report;
    for (const auto& row : ablation_run(data, subsets, ac)) report += probe_block(row) + "\n";
    emit(report, out_path);
  } else if (*gen) {
    gcfg.seed = seed;
    if (!noise_csv.empty()) {
      std::stringstream ss(noise_csv);
      std::string item;
      std::size_t i = 0;
      while (std::getline(ss, item, ',')) {
        if (i >= kSourceCount) throw ConfigError("--source-noise takes four values");
        try {
          gcfg.source_noise[i++] = std::stod(item);
        } catch (const std::exception&) {
          throw ConfigError("bad --source-noise value '" + item + "'");
        }
      }
      if (i != kSourceCount) throw ConfigError("--source-noise takes four values");
    }
    std::filesystem::create_directories(gen_dir);
    write_synthetic(generate_synthetic(gcfg), gen_dir);
    log("wrote " + std::to_string(gcfg.classes * gcfg.per_class) + " records to " + gen_dir);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const wvt::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const wvt::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
