// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "loss_fixture.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "wvt/binary_io.hpp"
#include "wvt/corpus.hpp"
#include "wvt/evalsuite.hpp"
#include "wvt/kernels.hpp"
#include "wvt/stats.hpp"

using namespace wvt;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1
void gradient_check(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  int instances = 0, skipped = 0;
  std::size_t params_checked = 0;
  double worst = 0;
  while (instances < 60) {
    const auto inst = fixtures::random_loss_instance(rng, 4, 3, 8, rng.bernoulli(0.5));
    Vec params(inst->model->parameters().begin(), inst->model->parameters().end());
    double kink = 0;
    auto f = [&] {
      return oracle::batch_loss(inst->cfg, params, inst->batch, inst->negatives, inst->loss.sources, inst->loss.margin,
                                inst->masks, &kink);
    };
    f();
    // central differences straddling a ReLU or hinge kink are meaningless
    if (kink < 1e-3) {
      ++skipped;
      continue;
    }
    const auto out = batch_loss(*inst->model, inst->batch, inst->negatives, inst->loss, inst->masks);
    for (std::size_t i = 0; i < params.size(); ++i) {
      worst = std::max(worst, rel_err(out.param_grad[i], oracle::central_difference(params, i, 1e-6, f)));
      ++params_checked;
    }
    ++instances;
  }
  const double secs = seconds_since(t0);
  v.detail << instances << " instances, " << params_checked << " parameters, " << skipped
           << " near-kink draws skipped, max rel err " << worst << ", " << secs << " s";
  v.require(worst < 1e-4, "rel err < 1e-4");
  v.require(secs < 60, "runtime < 1 min");
}

// 2
void oracle_equivalence(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(202);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto inst = fixtures::random_loss_instance(rng, 2 + rng.uniform_index(15), 1 + rng.uniform_index(5), 8,
                                                     rng.bernoulli(0.5));
    const auto out = batch_loss(*inst->model, inst->batch, inst->negatives, inst->loss, inst->masks);
    const Vec params(inst->model->parameters().begin(), inst->model->parameters().end());
    const double ref = oracle::batch_loss(inst->cfg, params, inst->batch, inst->negatives, inst->loss.sources,
                                          inst->loss.margin, inst->masks);
    worst = std::max(worst, std::abs(out.value - ref) / std::max(1.0, std::abs(ref)));
  }
  const double secs = seconds_since(t0);
  v.detail << "1000 instances, max diff " << worst << ", " << secs << " s";
  v.require(worst <= 1e-12, "diff <= 1e-12");
  v.require(secs < 60, "runtime < 1 min");
}

// 3
void hinge_cases(Verdict& v) {
  using Span = std::span<const double>;
  const Vec p{1, 0}, orth{0, 1}, pos{1, 1}, n1{1, -1};
  const std::vector<Span> far{orth}, equi{n1, n1}, near{p};
  const double a = ranking_loss(p, p, far, 0.1).value;
  const double b = ranking_loss(p, pos, equi, 0.1).value;
  const double c = ranking_loss(p, orth, near, 0.1).value;
  v.detail << "values " << a << ", " << b << ", " << c;
  v.require(a == 0.0, "satisfied margin gives 0");
  v.require(b == 0.1, "equidistant gives m");
  v.require(c == 1.1, "hand-computed 1.1");
}

// 4
void schedule(Verdict& v) {
  TrainConfig c;
  c.total_steps = 10000;
  const double at0 = learning_rate(0, c), at750 = learning_rate(750, c), at1500 = learning_rate(1500, c);
  const double before = learning_rate(1499, c), after = learning_rate(1501, c), end = learning_rate(10000, c);
  v.detail << "lr(0)=" << at0 << " lr(750)=" << at750 << " lr(1499)=" << before << " lr(1500)=" << at1500
           << " lr(1501)=" << after << " lr(T)=" << end;
  v.require(at0 == 0.001, "lr(0)");
  v.require(at1500 == 1.0, "lr(1500)");
  v.require(std::abs(at750 - 0.0316227766) <= 1e-6, "lr(750)");
  v.require(std::abs(before - at1500) < 0.01 && std::abs(after - at1500) < 1e-6, "continuity at warmup end");
  v.require(std::abs(end) < 1e-15, "lr(T)=0");
}

GeneratorConfig synthetic_config(std::uint64_t seed) {
  GeneratorConfig g;
  g.classes = 10;
  g.per_class = 100;
  g.noise = 0.1;
  g.seed = seed;
  return g;
}

TrainConfig synthetic_train(std::uint64_t seed, std::uint64_t steps, std::uint64_t warmup) {
  TrainConfig tc;
  tc.batch_size = 128;
  tc.total_steps = steps;
  tc.warmup_steps = warmup;
  tc.seed = seed;
  return tc;
}

// 5
void synthetic_convergence(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto syn = generate_synthetic(synthetic_config(0));
  const auto data = assemble_dataset(syn.records, syn.video, syn.tokens);
  const TrainConfig tc = synthetic_train(0, 2000, 200);
  const ModelConfig mc = model_config_for(data, tc, {64}, 32);
  Trainer trainer(init_model(mc), tc);
  double tail = 0;
  trainer.run(data, [&](const StepMetrics& m) {
    if (m.step + 100 >= tc.total_steps) tail += m.loss_total / 100;
  });
  const double eval_loss = dataset_loss(trainer.model(), data, tc, 1);
  double title_r1 = 0;
  v.detail << "train-mode loss (last 100 steps) " << tail << ", eval-mode loss " << eval_loss << ", recall@1";
  for (Source s : tc.sources) {
    const double r1 = evaluate_retrieval(trainer.model(), data, s).recall_at_1;
    if (s == Source::Title) title_r1 = r1;
    v.detail << " " << source_name(s) << "=" << r1;
  }
  const auto labels = require_labels(data);
  const auto split = stratified_split(labels, 0.5, 0);
  const double trained = linear_probe(extract_features(trainer.model(), data.features), labels, split, {}).test_accuracy;
  const double scratch = linear_probe(extract_features(init_model(mc), data.features), labels, split, {}).test_accuracy;
  const double secs = seconds_since(t0);
  v.detail << ", probe " << trained << " vs scratch " << scratch << ", " << secs << " s";
  v.require(eval_loss < 0.01 * tc.margin, "loss < 0.01 m");
  v.require(title_r1 > 0.9, "title recall@1 > 0.9");
  v.require(trained >= 0.95, "probe >= 0.95");
  v.require(trained - scratch >= 0.05, "scratch lower by >= 0.05");
  v.require(secs < 300, "runtime < 5 min");
}

// 6
void source_ablation(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  int ordered = 0, all_best = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // class-only text and noisier video keep single-source accuracies off the ceiling
    GeneratorConfig g = synthetic_config(seed);
    g.noise = 0.4;
    g.text_sees_instance = false;
    g.source_noise = {0.25, 0.5, 1.0, 2.0};
    const auto syn = generate_synthetic(g);
    const auto data = assemble_dataset(syn.records, syn.video, syn.tokens);
    AblationConfig ac;
    ac.train = synthetic_train(seed, 300, 30);
    std::vector<std::vector<Source>> subsets;
    for (Source s : kAllSources) subsets.push_back({s});
    subsets.emplace_back(kAllSources.begin(), kAllSources.end());
    const auto rows = ablation_run(data, subsets, ac);
    // rows: scratch, title, description, tags, channel, all
    bool order = true, best = true;
    for (std::size_t i = 1; i + 1 < 5; ++i) order = order && rows[i].test_accuracy > rows[i + 1].test_accuracy;
    for (std::size_t i = 1; i < 5; ++i) best = best && rows[5].test_accuracy >= rows[i].test_accuracy;
    ordered += order;
    all_best += best;
    v.detail << "seed " << seed << ":";
    for (std::size_t i = 1; i < rows.size(); ++i) v.detail << " " << rows[i].name << "=" << rows[i].test_accuracy;
    v.detail << "; ";
  }
  v.detail << "ordered " << ordered << "/5, all >= singles " << all_best << "/5, " << seconds_since(t0) << " s";
  v.require(ordered >= 4, "ordering in >= 4 of 5 seeds");
  v.require(all_best >= 4, "all sources best in >= 4 of 5 seeds");
}

// 7
void subset_stats(Verdict& v) {
  const auto recs = fixtures::ranked_corpus(50, 200, 7);
  const std::vector<std::size_t> sizes{2000, 5000, 10000};
  const auto rows = stats_by_subset(recs, sizes);
  bool exact = true;
  for (const auto& row : rows) {
    const auto subset = take_top_per_query(recs, row.per_query);
    exact = exact && row.stats == oracle::reference_stats(subset, false);
  }
  v.detail << recs.size() << " records; description mean words";
  for (const auto& r : rows) v.detail << " " << r.stats[Source::Description].mean_words;
  v.detail << "; title mean words";
  for (const auto& r : rows) v.detail << " " << r.stats[Source::Title].mean_words;
  v.require(recs.size() == 10000, "10k records");
  v.require(rows[0].stats[Source::Description].mean_words > rows[1].stats[Source::Description].mean_words &&
                rows[1].stats[Source::Description].mean_words > rows[2].stats[Source::Description].mean_words,
            "description words decreasing");
  v.require(rows[0].stats[Source::Title].mean_words < rows[1].stats[Source::Title].mean_words &&
                rows[1].stats[Source::Title].mean_words < rows[2].stats[Source::Title].mean_words,
            "title words increasing");
  v.require(exact, "all fields equal the brute-force oracle");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WVT_CLI_PATH) + " -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 8
void determinism(Verdict& v) {
  testutil::TempDir dir("accept");
  const std::string d = dir.path().string();
  v.require(run_cli("--seed 5 gen --classes 4 --per-class 16 --out " + d + "/g") == 0, "gen");
  const std::string train = "--seed 9 train --corpus " + d + "/g/corpus.jsonl --video-feats " + d +
                            "/g/video.wvtv --token-embs " + d + "/g/tokens.wvte --steps 20 --warmup 5 --batch 16 "
                            "--chunk 8 --negatives 5 --hidden 8 --video-width 6 --out " + d;
  v.require(run_cli(train + "/a.wvtc") == 0, "train a");
  v.require(run_cli(train + "/b.wvtc --checkpoint-every 8") == 0, "train b");
  v.require(run_cli(train + "/c.wvtc --resume " + d + "/b.wvtc.step8") == 0, "resume");
  const auto a = io::read_file(dir / "a.wvtc");
  const bool same = a == io::read_file(dir / "b.wvtc");
  const bool resumed = a == io::read_file(dir / "c.wvtc");
  v.require(same, "identical runs give identical checkpoints");
  v.require(resumed, "resume equals uninterrupted run");

  Rng rng(808);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    auto inst = fixtures::random_loss_instance(rng, 16, 3, 8, true);
    fixtures::localize_negatives(*inst, 4, rng);
    const auto base = kernels::chunked_gradient_serial(*inst->model, fixtures::split_chunks(*inst, 1), inst->loss);
    double scale = 0;
    for (double g : base.param_grad) scale = std::max(scale, std::abs(g));
    for (std::size_t c : {2, 4}) {
      const auto out = kernels::chunked_gradient_omp(*inst->model, fixtures::split_chunks(*inst, c), inst->loss);
      for (std::size_t i = 0; i < base.param_grad.size(); ++i)
        worst = std::max(worst, std::abs(out.param_grad[i] - base.param_grad[i]) / std::max(scale, 1e-300));
    }
  }
  v.detail << "checkpoints " << a.size() << " bytes, identical=" << same << ", resumed=" << resumed
           << ", max chunked grad rel diff " << worst;
  v.require(worst <= 1e-10, "chunked gradients agree <= 1e-10");
}

// 9
void filters(Verdict& v) {
  Denylist deny;
  deny.ids.insert("eval-1");
  MetadataRecord r;
  r.id = "v";
  r.duration_s = 9.9;
  const bool a = filter_record(r, 365, deny);
  r.duration_s = 12;
  const bool b = filter_record(r, 30, deny);
  r.id = "eval-1";
  const bool c = filter_record(r, 365, deny);

  std::vector<MetadataRecord> recs;
  recs.reserve(700000);
  for (int q = 0; q < 700; ++q)
    for (int k = 1; k <= 1000; ++k) {
      MetadataRecord m;
      m.id = std::to_string(q) + ":" + std::to_string(k);
      m.query = "q" + std::to_string(q);
      m.rank = k;
      recs.push_back(std::move(m));
    }
  const auto kept = take_top_per_query(recs, 700);
  v.detail << "short=" << a << " recent=" << b << " denylisted=" << c << ", subset " << kept.size() << " records";
  v.require(!a && !b && !c, "three discards");
  v.require(kept.size() == 490000, "490,000 records");
}

// 10
void round_trips(Verdict& v) {
  testutil::TempDir dir("accept");
  Rng rng(1010);
  int corpus_ok = 0, wvte_ok = 0, wvtv_ok = 0, wvtc_ok = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto recs = fixtures::random_corpus(rng, 1 + rng.uniform_index(100));
    write_corpus(dir / "a.jsonl", recs);
    const auto back = read_corpus(dir / "a.jsonl");
    write_corpus(dir / "b.jsonl", back);
    corpus_ok += back == recs && io::read_file(dir / "a.jsonl") == io::read_file(dir / "b.jsonl");

    const auto tf = fixtures::random_token_file(rng, rng.uniform_index(30), 1 + rng.uniform_index(12));
    write_token_file(dir / "t.wvte", tf);
    wvte_ok += encode_token_file(read_token_file(dir / "t.wvte")) == io::read_file(dir / "t.wvte");

    const auto vf = fixtures::random_video_file(rng, rng.uniform_index(30), 1 + rng.uniform_index(12));
    write_video_file(dir / "v.wvtv", vf);
    wvtv_ok += encode_video_file(read_video_file(dir / "v.wvtv")) == io::read_file(dir / "v.wvtv");

    auto inst = fixtures::random_loss_instance(rng, 2, 1, 8, false);
    inst->model->rng().next_u64();
    TrainerState st{rng.uniform_index(1000), Vec(inst->model->layout().size())};
    for (auto& x : st.velocity) x = rng.normal();
    save_checkpoint(dir / "m.wvtc", *inst->model, t % 2 ? &st : nullptr);
    const auto ck = load_checkpoint(dir / "m.wvtc");
    wvtc_ok += encode_checkpoint(ck.model, ck.trainer ? &*ck.trainer : nullptr) == io::read_file(dir / "m.wvtc") &&
               ck.model == *inst->model;
  }
  v.detail << "corpus " << corpus_ok << "/" << trials << ", WVTE " << wvte_ok << "/" << trials << ", WVTV " << wvtv_ok
           << "/" << trials << ", WVTC " << wvtc_ok << "/" << trials;
  v.require(corpus_ok == trials && wvte_ok == trials && wvtv_ok == trials && wvtc_ok == trials, "byte-exact");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
      {"gradient check", gradient_check},
      {"loss oracle equivalence", oracle_equivalence},
      {"hinge cases", hinge_cases},
      {"learning-rate schedule", schedule},
      {"synthetic convergence", synthetic_convergence},
      {"per-source ablation structure", source_ablation},
      {"subset statistics pipeline", subset_stats},
      {"determinism", determinism},
      {"filters and subset count", filters},
      {"format round-trips", round_trips},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    failures += !v.pass;
    std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures;
}
