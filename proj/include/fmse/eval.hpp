#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmse/config.hpp"
#include "fmse/data.hpp"
#include "fmse/spectral.hpp"

namespace fmse {

/// Intrusive quality metric: (estimate, reference) -> score.
class MetricEvaluator {
 public:
  virtual ~MetricEvaluator() = default;
  virtual std::string name() const = 0;
  virtual bool higher_is_better() const = 0;
  virtual double evaluate(const Waveform& estimate, const Waveform& reference) const = 0;
};

/// Built-in SI-SDR in dB. A perfect estimate scores the epsilon-guarded cap
/// 10 log10(|ref|^2 / 1e-8).
class SiSdrMetric final : public MetricEvaluator {
 public:
  std::string name() const override { return "si_sdr"; }
  bool higher_is_better() const override { return true; }
  double evaluate(const Waveform& estimate, const Waveform& reference) const override;
};

/// External scorer (PESQ, ESTOI, DNSMOS, WER, ...) run as
/// `<command> <estimate.wav> <reference.wav>`.
class CommandMetric final : public MetricEvaluator {
 public:
  explicit CommandMetric(MetricAdapterConfig config) : config_(std::move(config)) {}
  std::string name() const override { return config_.name; }
  bool higher_is_better() const override { return config_.higher_is_better; }
  double evaluate(const Waveform& estimate, const Waveform& reference) const override;

 private:
  MetricAdapterConfig config_;
};

using MetricSet = std::vector<std::unique_ptr<MetricEvaluator>>;

/// SI-SDR plus one CommandMetric per configured adapter.
MetricSet make_metrics(const std::vector<MetricAdapterConfig>& adapters);

struct AggregateStat {
  double mean = 0.0;
  double ci95 = 0.0;  // 1.96 * std / sqrt(count), std with divisor count
  int count = 0;

  friend bool operator==(const AggregateStat&, const AggregateStat&) = default;
};

AggregateStat aggregate(const std::vector<double>& values);

struct MetricFailure {
  std::string utterance_id;
  std::string metric;
  std::string message;

  friend bool operator==(const MetricFailure&, const MetricFailure&) = default;
};

struct MetricsReport {
  std::string label;
  /// utterance id -> metric name -> value
  std::map<std::string, std::map<std::string, double>> per_utterance;
  std::map<std::string, AggregateStat> aggregate;
  std::map<std::string, bool> higher_is_better;
  std::vector<MetricFailure> failures;

  /// Recomputes `aggregate` from `per_utterance`.
  void recompute();

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Enhancer receives the noisy waveform and a per-utterance seed.
using Enhancer = std::function<Waveform(const Waveform& noisy, std::uint64_t seed)>;

/// Seed used for an utterance: stable_hash(utterance_id) xor base_seed.
std::uint64_t utterance_seed(const std::string& utterance_id, std::uint64_t base_seed);

/// Enhances every pair of the manifest and scores it. Per-utterance
/// failures (load, enhancement, metric) are recorded, never fatal.
MetricsReport evaluate(const CorpusManifest& manifest, const Enhancer& enhancer,
                       const MetricSet& metrics, std::uint64_t base_seed = 0,
                       std::string label = {});

struct PairedSignals {
  std::string utterance_id;
  Waveform clean;
  Waveform noisy;
};

/// Same as evaluate() for signals already in memory.
MetricsReport evaluate_signals(const std::vector<PairedSignals>& pairs, const Enhancer& enhancer,
                               const MetricSet& metrics, std::uint64_t base_seed = 0,
                               std::string label = {});

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

struct ComparisonTable {
  std::vector<std::string> runs;
  std::vector<std::string> metrics;
  /// values[run][metric]
  std::vector<std::vector<AggregateStat>> values;
  /// best[run][metric]: this run attains the best mean (ties all marked).
  std::vector<std::vector<bool>> best;

  nlohmann::json to_json() const;
  /// Aligned text table, best entries suffixed with '*'.
  std::string to_text() const;
};

/// Throws InvalidInput listing the difference when metric sets disagree.
ComparisonTable compare_runs(const std::vector<MetricsReport>& reports);

}  // namespace fmse
