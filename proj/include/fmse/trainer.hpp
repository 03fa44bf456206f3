#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fmse/aux_losses.hpp"
#include "fmse/backbone.hpp"
#include "fmse/config.hpp"
#include "fmse/data.hpp"
#include "fmse/objectives.hpp"

namespace fmse {

/// One paired utterance held in memory with its compressed spectrograms.
struct Utterance {
  std::string id;
  Waveform clean;
  Waveform noisy;
  ComplexSpectrogram clean_spec;
  ComplexSpectrogram noisy_spec;
};

Utterance make_utterance(std::string id, Waveform clean, Waveform noisy,
                         const SpectralConfig& spectral);

struct TrainingData {
  std::vector<Utterance> train;
  std::vector<Utterance> val;
};

/// Loads the train and val splits (at most `max_utts` each when > 0).
TrainingData load_training_data(const Corpus& corpus, const SpectralConfig& spectral,
                                int max_utts = 0);

/// Validation scorer: (enhanced, clean) -> score, higher is better.
using ValidationMetric = std::function<double(const Waveform&, const Waveform&)>;

/// SI-SDR in dB (the negated SI-SDR loss).
double si_sdr_db(const Waveform& estimate, const Waveform& reference);

struct TrainSetup {
  TrainConfig train;
  SpectralConfig spectral;
  PathConfig path;
  PrecondConfig precond;
  SamplerConfig sampler;
  /// Defaults to SI-SDR when empty.
  ValidationMetric val_metric;
  std::string val_metric_name = "si_sdr";
  /// Where the JSONL log and checkpoints go; nothing is written when empty.
  std::filesystem::path output_dir;
};

struct LossRecord {
  int step = 0;
  double total = 0.0;
  double cfm = 0.0;
  double perceptual = 0.0;
  double si_sdr = 0.0;
};

struct TrainState {
  int step = 0;
  std::vector<double> params;
  std::vector<double> ema_params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::string rng_state;
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, double>> history;  // (step, validation metric)
  std::vector<LossRecord> losses;
};

/// Optimization loop: per step, draw a batch of random crops, one t per
/// element, build path samples, evaluate the combined loss, take an Adam
/// step and update the EMA as ema += (1 - decay) * (params - ema).
class Trainer {
 public:
  Trainer(TrainSetup setup, std::unique_ptr<Backbone> net, const TrainingData& data);

  /// Restores a trainer from a checkpoint written by save_checkpoint().
  static Trainer resume(const std::filesystem::path& checkpoint, TrainSetup setup,
                        const TrainingData& data);

  /// Runs until state().step == `until` (or max_steps when omitted).
  void run(std::optional<int> until = std::nullopt);
  /// One optimization step; returns its loss record.
  LossRecord step();
  /// Validation metric of the EMA network on the val split.
  double validate() const;

  const TrainState& state() const noexcept { return state_; }
  const TrainSetup& setup() const noexcept { return setup_; }
  const Backbone& net() const noexcept { return *net_; }
  /// Copy of the backbone carrying the EMA parameters.
  std::unique_ptr<Backbone> ema_net() const;

  void save_checkpoint(const std::filesystem::path& path) const;

 private:
  void log_line(const nlohmann::json& line) const;

  TrainSetup setup_;
  std::unique_ptr<Backbone> net_;
  const TrainingData* data_;
  std::unique_ptr<PerceptualLoss> perceptual_;
  Rng rng_;
  TrainState state_;
};

/// Builds a trainer and runs max_steps.
TrainState train(const TrainSetup& setup, const TrainingData& data, std::unique_ptr<Backbone> net);

/// First step whose metric is >= threshold (inclusive), or nullopt.
/// Throws InvalidInput on an empty history.
std::optional<int> steps_to_threshold(const std::vector<std::pair<int, double>>& history,
                                      double threshold);

}  // namespace fmse
