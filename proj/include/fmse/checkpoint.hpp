#pragma once

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "fmse/backbone.hpp"
#include "fmse/config.hpp"

namespace fmse {

inline constexpr const char* kCheckpointFormat = "fmse-checkpoint/1";

/// Single-file JSON container: backbone architecture, raw and EMA
/// parameters, optimizer moments, objective, the spectral/path/precond
/// configs, training step, RNG state and validation history.
struct Checkpoint {
  nlohmann::json architecture;
  ObjectiveKind objective = ObjectiveKind::X1Edm;
  SpectralConfig spectral;
  PathConfig path;
  PrecondConfig precond;
  TrainConfig train;
  int step = 0;
  std::vector<double> params;
  std::vector<double> ema_params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::string rng_state;
  double best_val = 0.0;
  std::vector<std::pair<int, double>> history;

  /// Backbone with the EMA parameters (used for inference).
  std::unique_ptr<Backbone> inference_net() const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError for unreadable files and InvalidInput for a wrong format tag.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fmse
