#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmse/spectral.hpp"

namespace fmse {

/// Floor on the SI-SDR residual energy.
inline constexpr double kSiSdrEpsilon = 1e-8;

/// Negative scale-invariant SDR in dB. omega = <est, ref> / <ref, ref>;
/// loss = -10 log10(|omega ref|^2 / max(|est - omega ref|^2, 1e-8)).
/// The floor only engages for (near-)perfect estimates, so ordinary values
/// are unbiased and a perfect estimate scores exactly
/// -10 log10(|omega ref|^2 / 1e-8).
/// When `grad` is non-null it receives d(loss)/d(estimate).
double si_sdr_loss(std::span<const double> estimate, std::span<const double> reference,
                   std::vector<double>* grad = nullptr);
double si_sdr_loss(const Waveform& estimate, const Waveform& reference);

/// Perceptual loss adapter: 16 kHz mono waveforms in, scalar loss out
/// (lower is better). Differentiable adapters also supply the gradient with
/// respect to the estimate.
class PerceptualLoss {
 public:
  virtual ~PerceptualLoss() = default;

  virtual std::string name() const = 0;
  virtual bool differentiable() const = 0;
  /// Whether evaluate() may be called concurrently.
  virtual bool reentrant() const { return true; }
  /// Smallest value the loss can take (reached for identical signals).
  virtual double minimum() const = 0;

  virtual double evaluate(const Waveform& estimate, const Waveform& reference) const = 0;
  virtual double evaluate_with_grad(const Waveform& estimate, const Waveform& reference,
                                    std::vector<double>& grad) const;
};

/// Differentiable stand-in for a PESQ loss: mean squared difference of
/// log power spectra (512-point periodic Hann, hop 128), with spectral
/// excess in the estimate weighted twice as heavily as spectral deficit.
/// The asymmetry mirrors PESQ's heavier penalty on added noise. Minimum 0.
class LogSpectralSurrogate final : public PerceptualLoss {
 public:
  struct Options {
    int n_fft = 512;
    int hop = 128;
    double floor = 1e-6;
    double excess_weight = 2.0;
  };

  LogSpectralSurrogate() = default;
  explicit LogSpectralSurrogate(const Options& options) : options_(options) {}

  std::string name() const override { return "log-spectral"; }
  bool differentiable() const override { return true; }
  double minimum() const override { return 0.0; }
  double evaluate(const Waveform& estimate, const Waveform& reference) const override;
  double evaluate_with_grad(const Waveform& estimate, const Waveform& reference,
                            std::vector<double>& grad) const override;

 private:
  double run(const Waveform& estimate, const Waveform& reference,
             std::vector<double>* grad) const;

  Options options_;
};

/// Wraps an external scorer executable invoked as
/// `<command> <estimate.wav> <reference.wav>` that prints one number on
/// stdout. Used for PESQ, ESTOI and similar tools. As a loss the score is
/// negated when higher scores are better. Not differentiable, not reentrant.
class CommandPerceptualLoss final : public PerceptualLoss {
 public:
  CommandPerceptualLoss(std::string name, std::string command, bool higher_is_better,
                        double best_score);

  std::string name() const override { return name_; }
  bool differentiable() const override { return false; }
  bool reentrant() const override { return false; }
  double minimum() const override { return higher_is_better_ ? -best_score_ : best_score_; }
  double evaluate(const Waveform& estimate, const Waveform& reference) const override;

 private:
  std::string name_;
  std::string command_;
  bool higher_is_better_;
  double best_score_;
};

/// Runs an external scorer and returns the number it prints.
double run_external_scorer(const std::string& command, const Waveform& estimate,
                           const Waveform& reference);

/// Validates 16 kHz input, delegates to fn.evaluate and wraps failures with
/// the adapter name.
double pesq_loss(const PerceptualLoss& fn, const Waveform& estimate, const Waveform& reference);

/// Adapter registry. Known names: "log-spectral", "command" (options:
/// command, higher_is_better, best_score, label).
std::unique_ptr<PerceptualLoss> make_perceptual_loss(const std::string& name,
                                                     const nlohmann::json& options = {});

}  // namespace fmse
