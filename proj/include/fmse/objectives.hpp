#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fmse/aux_losses.hpp"
#include "fmse/backbone.hpp"
#include "fmse/path.hpp"
#include "fmse/spectral.hpp"

namespace fmse {

enum class ObjectiveKind { Velocity, X1, X1Edm };

std::string to_string(ObjectiveKind kind);
/// Accepts "velocity", "x1", "x1-edm".
ObjectiveKind parse_objective(std::string_view text);

/// Which quantity scales sigma_max into the preconditioner's noise level s.
enum class NoiseLevelMap { T, OneMinusT };

std::string to_string(NoiseLevelMap map);
NoiseLevelMap parse_noise_level_map(std::string_view text);

struct PrecondConfig {
  double sigma_data = 0.1;
  double sigma_max = 0.5;
  NoiseLevelMap noise_level_map = NoiseLevelMap::T;

  void validate() const;
};

struct EdmCoefficients {
  double c_skip = 0.0;
  double c_out = 0.0;
  double c_in = 0.0;
  double lambda = 0.0;  // infinity when s = 0 and lambda was not requested
};

/// With s = map(t) * sigma_max:
///   c_skip = sd^2 / (sd^2 + s^2), c_out = s sd / sqrt(sd^2 + s^2),
///   c_in = 1 / sqrt(sd^2 + s^2), lambda = (s^2 + sd^2) / (s^2 sd^2).
/// Throws SingularityError when s = 0 and `need_lambda` is set.
EdmCoefficients edm_coefficients(double t, const PrecondConfig& config, bool need_lambda = true);

/// D(x_t, y, t) = c_skip x_t + c_out F(c_in x_t, c_in y, t).
CMatrix precondition(const Backbone& net, const CMatrix& x_t, const CMatrix& y, double t,
                     const PrecondConfig& config);

/// (x1_pred - x_t) / (1 - t); SingularityError for t >= 1.
CMatrix v_from_x1(const CMatrix& x1_pred, const CMatrix& x_t, double t);
/// x_t + (1 - t) v_pred.
CMatrix x1_from_v(const CMatrix& v_pred, const CMatrix& x_t, double t);

struct ObjectiveOutput {
  double loss = 0.0;
  std::vector<CMatrix> x1_hat;
  std::vector<CMatrix> v_hat;
};

/// Flow-matching regression loss averaged over batch elements and complex
/// entries (|z|^2 = re^2 + im^2 per entry). The x1-edm kind weights each
/// element's mean squared error by lambda(t) before averaging. When `grad`
/// is non-empty it accumulates d(loss)/d(params).
ObjectiveOutput cfm_loss(ObjectiveKind kind, const Backbone& net, const PathBatch& batch,
                         const PrecondConfig& precond, std::span<double> grad = {});

struct AuxiliaryWeights {
  double alpha_p = 0.0;  // perceptual term
  double alpha_s = 0.0;  // SI-SDR term
};

struct CombinedLossValue {
  double total = 0.0;
  double cfm = 0.0;
  double perceptual = 0.0;  // batch mean before weighting; 0 when skipped
  double si_sdr = 0.0;      // batch mean before weighting; 0 when skipped
  ObjectiveOutput detail;
};

/// cfm + alpha_p * L_perceptual(istft(x1_hat), istft(x1))
///     + alpha_s * L_SI-SDR(istft(x1_hat), istft(x1)),
/// auxiliary terms averaged over the batch and skipped when their weight is
/// zero. Spectrogram crops are inverted with original_length 0.
CombinedLossValue combined_loss(ObjectiveKind kind, const Backbone& net, const PathBatch& batch,
                                const PrecondConfig& precond, const AuxiliaryWeights& weights,
                                const PerceptualLoss* perceptual, const SpectralConfig& frontend,
                                std::span<double> grad = {});

}  // namespace fmse
