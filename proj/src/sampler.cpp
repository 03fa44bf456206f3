#include "fmse/sampler.hpp"

namespace fmse {

std::string to_string(SamplerScheme scheme) {
  return scheme == SamplerScheme::Euler ? "euler" : "midpoint";
}

SamplerScheme parse_sampler_scheme(std::string_view text) {
  if (text == "euler") return SamplerScheme::Euler;
  if (text == "midpoint") return SamplerScheme::Midpoint;
  throw ConfigError("unknown sampler scheme '" + std::string(text) + "'");
}

void SamplerConfig::validate() const {
  if (n_steps < 1) throw InvalidInput("n_steps must be >= 1");
  if (!(t_start >= 0.0 && t_start < t_end && t_end <= 1.0)) {
    throw InvalidInput("sampler interval must satisfy 0 <= t_start < t_end <= 1");
  }
}

CMatrix integrate(const VelocityFieldFn& velocity, const CMatrix& x0, const CMatrix& y,
                  const SamplerConfig& config) {
  config.validate();
  if (!all_finite(x0)) throw InvalidInput("integrate: non-finite initial state");
  const double h = (config.t_end - config.t_start) / config.n_steps;
  CMatrix x = x0;
  for (int k = 0; k < config.n_steps; ++k) {
    const double t = config.t_start + k * h;
    if (config.scheme == SamplerScheme::Euler) {
      x += h * velocity(x, y, t);
    } else {
      const CMatrix half = x + (0.5 * h) * velocity(x, y, t);
      x += h * velocity(half, y, t + 0.5 * h);
    }
    if (!all_finite(x)) {
      throw DivergenceError("sampler state became non-finite at step " + std::to_string(k) +
                                " (t = " + std::to_string(t) + ")",
                            k);
    }
  }
  return x;
}

ComplexSpectrogram enhance(const Backbone& net, ObjectiveKind kind,
                           const ComplexSpectrogram& y_spec, const PathConfig& path,
                           const PrecondConfig& precond, const SamplerConfig& sampler, Rng& rng) {
  const ObjectiveHead head = wrap_objective_head(net, kind, precond);
  const CMatrix x0 = sample_prior(y_spec.data, path, rng);
  ComplexSpectrogram out = y_spec;
  out.data = integrate(head.velocity, x0, y_spec.data, sampler);
  return out;
}

Waveform enhance_waveform(const Backbone& net, ObjectiveKind kind, const Waveform& noisy,
                          const SpectralConfig& spectral, const PathConfig& path,
                          const PrecondConfig& precond, const SamplerConfig& sampler, Rng& rng) {
  const ComplexSpectrogram y = stft(noisy, spectral);
  Waveform out = istft(enhance(net, kind, y, path, precond, sampler, rng));
  out.sample_rate = noisy.sample_rate;
  return out;
}

}  // namespace fmse
