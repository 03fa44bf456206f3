#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmse/backbone.hpp"
#include "fmse/data.hpp"
#include "fmse/objectives.hpp"
#include "fmse/path.hpp"
#include "fmse/sampler.hpp"
#include "fmse/spectral.hpp"

namespace fmse {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  double ema_decay = 0.999;
  int max_steps = 1000;
  int val_interval = 100;
  double alpha_p = 0.0;
  double alpha_s = 0.0;
  ObjectiveKind objective = ObjectiveKind::X1Edm;
  std::uint64_t seed = 0;
  /// Random crop length in STFT frames per batch element.
  int crop_frames = 256;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Validation utterances scored per validation event (0 = all).
  int val_max_utts = 0;
  /// Perceptual loss adapter used when alpha_p > 0.
  std::string perceptual_loss = "log-spectral";
  nlohmann::json perceptual_options = nlohmann::json::object();

  void validate() const;
};

/// External metric scorer: `<command> <estimate.wav> <reference.wav>`
/// prints one number.
struct MetricAdapterConfig {
  std::string name;
  std::string command;
  bool higher_is_better = true;
};

struct CorpusConfig {
  std::string root;
  CorpusLayout layout = CorpusLayout::VoiceBank;
  /// Limit on utterances loaded per split (0 = all).
  int max_utts = 0;
};

/// Everything a run needs. Parsed from JSON with a strict schema: unknown
/// keys raise ConfigError naming the dotted key.
struct RunConfig {
  SpectralConfig spectral;
  PathConfig path;
  PrecondConfig precond;
  SamplerConfig sampler;
  TrainConfig train;
  ReferenceNet::Options backbone;
  CorpusConfig corpus;
  std::vector<MetricAdapterConfig> metrics;
  /// Name of a metrics entry used as the validation metric; empty selects
  /// the built-in SI-SDR.
  std::string val_metric;
  std::string output_dir = "runs";

  void validate() const;
};

nlohmann::json to_json(const SpectralConfig& c);
nlohmann::json to_json(const PathConfig& c);
nlohmann::json to_json(const PrecondConfig& c);
nlohmann::json to_json(const SamplerConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const RunConfig& c);

SpectralConfig spectral_from_json(const nlohmann::json& j, const std::string& where = "spectral");
PathConfig path_from_json(const nlohmann::json& j, const std::string& where = "path");
PrecondConfig precond_from_json(const nlohmann::json& j, const std::string& where = "precond");
SamplerConfig sampler_from_json(const nlohmann::json& j, const std::string& where = "sampler");
TrainConfig train_from_json(const nlohmann::json& j, const std::string& where = "train");

/// Defaults overlaid by `j`. sigma_max is shared: precond.sigma_max always
/// follows path.sigma_max.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

nlohmann::json load_json_file(const std::filesystem::path& path);

/// Short hex digest of the resolved configuration.
std::string config_hash(const RunConfig& config);

}  // namespace fmse
