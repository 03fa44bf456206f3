#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "fmse/checkpoint.hpp"
#include "fmse/trainer.hpp"
#include "oracles.hpp"

using namespace fmse;
namespace fs = std::filesystem;

namespace {

TrainingData toy_data(int n_train, int n_val, std::uint64_t seed = 1) {
  Rng rng(seed);
  TrainingData data;
  const SpectralConfig spectral;
  for (int u = 0; u < n_train + n_val; ++u) {
    Waveform clean, noisy;
    const double f0 = rng.uniform(100.0, 300.0);
    for (int i = 0; i < 2400; ++i) {
      const double s = 0.3 * std::sin(2 * std::numbers::pi * f0 * i / 16000.0);
      clean.samples.push_back(s);
      noisy.samples.push_back(s + 0.05 * rng.normal());
    }
    auto utt = make_utterance("u" + std::to_string(u), clean, noisy, spectral);
    (u < n_train ? data.train : data.val).push_back(std::move(utt));
  }
  return data;
}

TrainSetup small_setup(ObjectiveKind kind = ObjectiveKind::X1Edm) {
  TrainSetup s;
  s.train.learning_rate = 1e-3;
  s.train.batch_size = 2;
  s.train.crop_frames = 8;
  s.train.max_steps = 6;
  s.train.val_interval = 3;
  s.train.objective = kind;
  s.train.seed = 5;
  return s;
}

std::unique_ptr<Backbone> small_net() {
  return std::make_unique<ReferenceNet>(ReferenceNet::Options{4, 1, 4, 3});
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fmse_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("zero learning rate freezes parameters and EMA") {
  const auto data = toy_data(3, 0);
  TrainSetup s = small_setup();
  s.train.learning_rate = 0.0;
  Trainer t(s, small_net(), data);
  const auto initial = t.state().params;
  for (int i = 0; i < 4; ++i) {
    t.step();
    CHECK(t.state().params == initial);
    CHECK(t.state().ema_params == initial);
  }
}

TEST_CASE("EMA recurrence on a two-parameter model") {
  const auto data = toy_data(2, 0);
  TrainSetup s = small_setup(ObjectiveKind::X1);
  s.train.ema_decay = 0.9;
  s.train.learning_rate = 0.05;
  Trainer t(s, std::make_unique<LinearBackbone>(0.2, 0.3), data);
  std::vector<double> ema = t.state().ema_params;
  for (int i = 0; i < 5; ++i) {
    t.step();
    const auto& p = t.state().params;
    for (std::size_t k = 0; k < 2; ++k) {
      ema[k] = 0.9 * ema[k] + 0.1 * p[k];
      CHECK(t.state().ema_params[k] == doctest::Approx(ema[k]).epsilon(1e-14));
    }
  }
  CHECK(t.state().params != std::vector<double>{0.2, 0.3});
}

TEST_CASE("same seed gives an identical loss trajectory") {
  const auto data = toy_data(3, 1);
  for (auto kind : {ObjectiveKind::Velocity, ObjectiveKind::X1, ObjectiveKind::X1Edm}) {
    TrainSetup s = small_setup(kind);
    s.train.alpha_p = 1e-3;
    s.train.alpha_s = 1e-4;
    const TrainState a = train(s, data, small_net());
    const TrainState b = train(s, data, small_net());
    REQUIRE(a.losses.size() == 6);
    for (std::size_t i = 0; i < a.losses.size(); ++i) {
      CHECK(a.losses[i].total == b.losses[i].total);
    }
    CHECK(a.params == b.params);
    CHECK(a.history == b.history);
    CHECK(a.history.size() == 2);
  }
}

TEST_CASE("checkpoint resume matches an uninterrupted run") {
  const auto data = toy_data(3, 1);
  const fs::path dir = temp_dir("resume");
  TrainSetup s = small_setup();
  Trainer full(s, small_net(), data);
  full.run();

  Trainer first(s, small_net(), data);
  first.run(3);
  first.save_checkpoint(dir / "mid.ckpt");
  Trainer resumed = Trainer::resume(dir / "mid.ckpt", s, data);
  CHECK(resumed.state().step == 3);
  resumed.run();
  REQUIRE(resumed.state().losses.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(resumed.state().losses[i].total == full.state().losses[3 + i].total);
  }
  CHECK(resumed.state().params == full.state().params);
  CHECK(resumed.state().ema_params == full.state().ema_params);
  CHECK(resumed.state().history == full.state().history);
  fs::remove_all(dir);
}

TEST_CASE("training writes a log and checkpoints") {
  const auto data = toy_data(2, 1);
  const fs::path dir = temp_dir("log");
  TrainSetup s = small_setup();
  s.output_dir = dir;
  train(s, data, small_net());
  CHECK(fs::exists(dir / "last.ckpt"));
  CHECK(fs::exists(dir / "best.ckpt"));
  std::ifstream is(dir / "train_log.jsonl");
  int lines = 0, val_lines = 0;
  for (std::string line; std::getline(is, line);) {
    const auto j = nlohmann::json::parse(line);
    ++lines;
    if (j.contains("val_metric")) ++val_lines;
  }
  CHECK(lines == 6);
  CHECK(val_lines == 2);
  const Checkpoint c = load_checkpoint(dir / "last.ckpt");
  CHECK(c.step == 6);
  CHECK(c.objective == ObjectiveKind::X1Edm);
  auto net = c.inference_net();
  CHECK(std::equal(c.ema_params.begin(), c.ema_params.end(), net->parameters().begin()));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint format errors") {
  const fs::path dir = temp_dir("ckpt");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
  std::ofstream(dir / "bad.ckpt") << R"({"format": "other/9"})";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), InvalidInput);
  fs::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const auto data = toy_data(2, 0);
  Trainer t(small_setup(ObjectiveKind::X1), std::make_unique<LinearBackbone>(NAN, 0.0), data);
  try {
    t.step();
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 1);
    CHECK(std::string(e.what()).find("t=[") != std::string::npos);
  }
}

TEST_CASE("empty training split is rejected") {
  TrainingData empty;
  CHECK_THROWS_AS(Trainer(small_setup(), small_net(), empty), InvalidInput);
}

TEST_CASE("steps_to_threshold") {
  const std::vector<std::pair<int, double>> h{{100, 1.0}, {200, 2.0}};
  CHECK(steps_to_threshold(h, 1.5) == 200);
  CHECK_FALSE(steps_to_threshold(h, 2.5).has_value());
  CHECK(steps_to_threshold(h, 1.0) == 100);
  CHECK(steps_to_threshold(h, 2.0) == 200);
  CHECK_THROWS_AS(steps_to_threshold({}, 1.0), InvalidInput);
}
