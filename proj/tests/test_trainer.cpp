#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "test_util.hpp"
#include "wvt/binary_io.hpp"
#include "wvt/evalsuite.hpp"
#include "wvt/trainer.hpp"

using namespace wvt;

namespace {

TrainingSet small_set(std::uint64_t seed = 0) {
  GeneratorConfig g;
  g.classes = 3;
  g.per_class = 12;
  g.input_width = 10;
  g.text_width = 6;
  g.seed = seed;
  const auto syn = generate_synthetic(g);
  return assemble_dataset(syn.records, syn.video, syn.tokens);
}

TrainConfig small_train(std::uint64_t steps) {
  TrainConfig c;
  c.batch_size = 16;
  c.chunk_size = 8;
  c.negatives = 3;
  c.total_steps = steps;
  c.warmup_steps = steps > 4 ? 4 : 0;
  c.lr_peak = 0.5;
  c.seed = 11;
  return c;
}

Trainer make_trainer(const TrainingSet& data, const TrainConfig& c) {
  return Trainer(init_model(model_config_for(data, c, {8}, 5)), c);
}

}  // namespace

TEST_CASE("learning_rate schedule") {
  TrainConfig c;
  c.total_steps = 10000;
  CHECK(learning_rate(0, c) == 0.001);
  CHECK(learning_rate(1500, c) == 1.0);
  CHECK(learning_rate(750, c) == doctest::Approx(0.0316227766).epsilon(1e-8));
  CHECK(learning_rate(1499, c) == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(learning_rate(1499, c) < 1.0);
  CHECK(learning_rate(10000, c) == doctest::Approx(0.0).scale(1.0));
  CHECK(std::abs(learning_rate(10000, c)) < 1e-15);
  CHECK(learning_rate(5750, c) == doctest::Approx(0.5));
  double prev = 0;
  for (std::uint64_t s = 0; s <= 1500; ++s) {
    const double lr = learning_rate(s, c);
    CHECK(lr > prev);
    prev = lr;
  }
}

TEST_CASE("sample_negatives") {
  Rng rng(1);
  SUBCASE("chunk 16, K=15 selects every other member") {
    const auto negs = sample_negatives(16, 15, rng);
    for (std::size_t a = 0; a < 16; ++a) {
      std::set<std::size_t> got(negs[a].begin(), negs[a].end());
      CHECK(got.size() == 15);
      CHECK_FALSE(got.contains(a));
    }
  }
  SUBCASE("chunk 2, K=1") {
    const auto negs = sample_negatives(2, 1, rng);
    CHECK(negs[0] == std::vector<std::size_t>{1});
    CHECK(negs[1] == std::vector<std::size_t>{0});
  }
  SUBCASE("without replacement when possible") {
    for (int t = 0; t < 100; ++t) {
      const auto negs = sample_negatives(10, 4, rng);
      for (std::size_t a = 0; a < 10; ++a) {
        std::set<std::size_t> got(negs[a].begin(), negs[a].end());
        CHECK(got.size() == 4);
        CHECK_FALSE(got.contains(a));
      }
    }
  }
  SUBCASE("chunk 4, K=6 draws uniformly with replacement") {
    const int trials = 100000;
    std::array<std::array<long, 4>, 4> counts{};
    for (int t = 0; t < trials; ++t) {
      const auto negs = sample_negatives(4, 6, rng);
      for (std::size_t a = 0; a < 4; ++a) {
        CHECK(negs[a].size() == 6);
        for (auto j : negs[a]) ++counts[a][j];
      }
    }
    const double n = 6.0 * trials, p = 1.0 / 3.0;
    const double sd = std::sqrt(n * p * (1 - p));
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t j = 0; j < 4; ++j) {
        if (j == a) {
          CHECK(counts[a][j] == 0);
        } else {
          CHECK(std::abs(static_cast<double>(counts[a][j]) - n * p) < 3 * sd);
        }
      }
  }
  SUBCASE("invalid chunk") { CHECK_THROWS_AS(sample_negatives(1, 1, rng), ConfigError); }
}

TEST_CASE("nesterov_step") {
  SUBCASE("plain SGD") {
    Vec p{1, -2}, v{0, 0};
    nesterov_step(p, Vec{0.5, 1}, v, 0.1, 0.0, 0.0);
    CHECK(p == Vec{1 - 0.05, -2 - 0.1});
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Vec p{1, -2}, v{0, 0};
    nesterov_step(p, Vec{0, 0}, v, 0.1, 0.9, 0.0);
    CHECK(p == Vec{1, -2});
  }
  SUBCASE("two steps on x^2") {
    Vec x{1}, v{0};
    nesterov_step(x, Vec{2 * x[0]}, v, 0.1, 0.9, 0.0);
    CHECK(x[0] == doctest::Approx(0.62).epsilon(1e-15));
    CHECK(v[0] == doctest::Approx(-0.2).epsilon(1e-15));
    nesterov_step(x, Vec{2 * x[0]}, v, 0.1, 0.9, 0.0);
    CHECK(x[0] == doctest::Approx(0.2224).epsilon(1e-15));
    CHECK(v[0] == doctest::Approx(-0.304).epsilon(1e-15));
  }
  SUBCASE("weight decay shrinks every nonzero parameter") {
    Vec p{1, -3, 0, 1e-3}, v(4, 0.0);
    const Vec before = p;
    nesterov_step(p, Vec(4, 0.0), v, 0.1, 0.9, 1e-2);
    for (std::size_t i = 0; i < 4; ++i) {
      if (before[i] == 0)
        CHECK(p[i] == 0);
      else
        CHECK(std::abs(p[i]) < std::abs(before[i]));
    }
  }
  SUBCASE("decay mask skips masked entries") {
    Vec p{1, 1}, v(2, 0.0);
    const std::vector<std::uint8_t> mask{1, 0};
    nesterov_step(p, Vec(2, 0.0), v, 0.1, 0.0, 0.5, mask);
    CHECK(p[0] < 1);
    CHECK(p[1] == 1);
  }
  SUBCASE("shape mismatch") {
    Vec p{1, 1}, v{0};
    CHECK_THROWS_AS(nesterov_step(p, Vec{0, 0}, v, 0.1, 0.9, 0.0), DataError);
  }
}

TEST_CASE("EpochSampler visits every row once per epoch") {
  EpochSampler s(10, 3);
  std::vector<std::size_t> seen;
  for (std::uint64_t step = 0; step < 5; ++step) {
    const auto b = s.batch(step, 4);
    seen.insert(seen.end(), b.begin(), b.end());
  }
  for (int epoch = 0; epoch < 2; ++epoch) {
    std::set<std::size_t> rows(seen.begin() + epoch * 10, seen.begin() + epoch * 10 + 10);
    CHECK(rows.size() == 10);
  }
  EpochSampler again(10, 3);
  CHECK(again.batch(3, 4) == std::vector<std::size_t>(seen.begin() + 12, seen.begin() + 16));
}

TEST_CASE("TrainConfig validation") {
  auto c = small_train(10);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.chunk_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.chunk_size = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.warmup_steps = 10;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("training with zero steps leaves the model unchanged") {
  const auto data = small_set();
  const auto c = small_train(0);
  auto t = make_trainer(data, c);
  const auto before = t.model();
  t.run(data, nullptr);
  CHECK(t.model() == before);
  CHECK(t.state().step == 0);
}

TEST_CASE("training is deterministic and resumable") {
  testutil::TempDir dir("train");
  const auto data = small_set();
  const auto c = small_train(12);

  auto a = make_trainer(data, c);
  a.run(data, nullptr);
  auto b = make_trainer(data, c);
  b.run(data, nullptr);
  a.save(dir / "a.wvtc");
  b.save(dir / "b.wvtc");
  CHECK(io::read_file(dir / "a.wvtc") == io::read_file(dir / "b.wvtc"));

  auto first = make_trainer(data, c);
  for (int i = 0; i < 5; ++i) first.step(data);
  first.save(dir / "mid.wvtc");
  auto ck = load_checkpoint(dir / "mid.wvtc");
  REQUIRE(ck.trainer);
  CHECK(ck.trainer->step == 5);
  Trainer resumed(std::move(ck.model), c, std::move(ck.trainer));
  resumed.run(data, nullptr);
  resumed.save(dir / "resumed.wvtc");
  CHECK(io::read_file(dir / "resumed.wvtc") == io::read_file(dir / "a.wvtc"));

  auto serial_cfg = c;
  serial_cfg.parallel = false;
  auto s = make_trainer(data, serial_cfg);
  s.run(data, nullptr);
  CHECK(s.model() == a.model());
}

TEST_CASE("training lowers the loss and logs each step") {
  const auto data = small_set();
  auto c = small_train(60);
  c.dropout = 0.0;
  auto t = make_trainer(data, c);
  const double before = dataset_loss(t.model(), data, c, 1);
  std::vector<StepMetrics> log;
  t.run(data, [&](const StepMetrics& m) { log.push_back(m); });
  CHECK(log.size() == 60);
  CHECK(log[0].step == 0);
  CHECK(log[0].lr == c.lr_start);
  CHECK(dataset_loss(t.model(), data, c, 1) < before);

  std::ostringstream os;
  write_metrics_line(os, log[3], c.sources);
  const auto j = nlohmann::json::parse(os.str());
  CHECK(j["step"] == 3);
  CHECK(j["loss_per_source"].size() == 4);
  CHECK(j.contains("wall_ms"));
  CHECK(os.str().back() == '\n');
}

TEST_CASE("periodic checkpoints") {
  testutil::TempDir dir("train");
  const auto data = small_set();
  auto c = small_train(10);
  c.checkpoint_every = 4;
  auto t = make_trainer(data, c);
  t.run(data, nullptr, dir / "run.wvtc");
  CHECK(std::filesystem::exists(dir / "run.wvtc.step4"));
  CHECK(std::filesystem::exists(dir / "run.wvtc.step8"));
  CHECK(load_checkpoint(dir / "run.wvtc.step8").trainer->step == 8);
}

TEST_CASE("trainer input errors") {
  const auto data = small_set();
  auto c = small_train(5);
  auto model = init_model(model_config_for(data, c, {8}, 5));
  CHECK_THROWS_AS(Trainer(model, c, TrainerState{0, Vec(3, 0.0)}), DataError);

  auto wider = c;
  wider.sources = {Source::Title};
  auto narrow = init_model(model_config_for(data, wider, {8}, 5));
  CHECK_THROWS_AS(Trainer(narrow, c), ConfigError);

  auto big = c;
  big.batch_size = 64;
  big.chunk_size = 64;
  auto t = make_trainer(data, big);
  CHECK_THROWS_AS(t.step(data), DataError);

  auto blown = init_model(model_config_for(data, c, {8}, 5));
  for (auto& p : blown.parameters()) p = 1e300;
  Trainer bt(blown, c);
  CHECK_THROWS_AS(bt.step(data), DataError);
}
