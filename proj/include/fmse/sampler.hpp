#pragma once

#include "fmse/backbone.hpp"
#include "fmse/head.hpp"
#include "fmse/objectives.hpp"
#include "fmse/path.hpp"
#include "fmse/spectral.hpp"

namespace fmse {

enum class SamplerScheme { Euler, Midpoint };

std::string to_string(SamplerScheme scheme);
SamplerScheme parse_sampler_scheme(std::string_view text);

struct SamplerConfig {
  int n_steps = 5;
  double t_start = 0.0;
  double t_end = 1.0;
  SamplerScheme scheme = SamplerScheme::Euler;

  void validate() const;
};

/// Integrates dx/dt = velocity(x, y, t) on a uniform grid of n_steps
/// intervals. The field is never evaluated at t_end. Throws DivergenceError
/// with the step index when the state becomes non-finite.
CMatrix integrate(const VelocityFieldFn& velocity, const CMatrix& x0, const CMatrix& y,
                  const SamplerConfig& config);

/// Draws x0 from the prior around y_spec and integrates the velocity view of
/// `net` for the given objective.
ComplexSpectrogram enhance(const Backbone& net, ObjectiveKind kind,
                           const ComplexSpectrogram& y_spec, const PathConfig& path,
                           const PrecondConfig& precond, const SamplerConfig& sampler, Rng& rng);

/// Waveform convenience wrapper: stft -> enhance -> istft at the input length.
Waveform enhance_waveform(const Backbone& net, ObjectiveKind kind, const Waveform& noisy,
                          const SpectralConfig& spectral, const PathConfig& path,
                          const PrecondConfig& precond, const SamplerConfig& sampler, Rng& rng);

}  // namespace fmse
