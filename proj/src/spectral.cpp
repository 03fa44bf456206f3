#include "fmse/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fmse/fft.hpp"

namespace fmse {
namespace {

constexpr double kMagnitudeFloor = 1e-12;

void require_finite(Complex c) {
  if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
    throw InvalidInput("non-finite spectral coefficient");
  }
}

std::size_t padded_signal_length(std::size_t length, const SpectralConfig& config) {
  return std::max<std::size_t>(length, static_cast<std::size_t>(config.n_fft));
}

std::size_t output_length(const ComplexSpectrogram& spec) {
  if (spec.original_length > 0) return spec.original_length;
  return static_cast<std::size_t>(std::max<Eigen::Index>(spec.frames() - 1, 0)) *
         static_cast<std::size_t>(spec.config.hop);
}

// Overlap-added squared analysis window over the centred, padded signal.
std::vector<double> window_energy(Eigen::Index frames, const std::vector<double>& window,
                                  int hop) {
  const std::size_t n = window.size();
  std::vector<double> energy(static_cast<std::size_t>(frames - 1) * hop + n, 0.0);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * hop;
    for (std::size_t i = 0; i < n; ++i) energy[off + i] += window[i] * window[i];
  }
  return energy;
}

void check_shape(const ComplexSpectrogram& spec) {
  spec.config.validate();
  if (spec.data.rows() != spec.config.freq_bins()) {
    throw InvalidInput("spectrogram has " + std::to_string(spec.data.rows()) +
                       " frequency bins, config implies " +
                       std::to_string(spec.config.freq_bins()));
  }
  if (spec.data.cols() < 1) throw InvalidInput("spectrogram has no frames");
}

}  // namespace

void SpectralConfig::validate() const {
  if (n_fft < 2) throw InvalidInput("n_fft must be >= 2");
  if (hop <= 0 || hop > n_fft) throw InvalidInput("hop must satisfy 0 < hop <= n_fft");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must be in (0, 1]");
  if (!(beta > 0.0)) throw InvalidInput("beta must be positive");
}

Complex compress(Complex c, const SpectralConfig& config) {
  require_finite(c);
  const double mag = std::abs(c);
  if (mag == 0.0) return {0.0, 0.0};
  return std::polar(config.beta * std::pow(mag, config.alpha), std::arg(c));
}

CMatrix compress(const CMatrix& c, const SpectralConfig& config) {
  return c.unaryExpr([&](Complex v) { return compress(v, config); });
}

Complex decompress(Complex c, const SpectralConfig& config) {
  require_finite(c);
  const double mag = std::abs(c);
  if (mag < kMagnitudeFloor) return {0.0, 0.0};
  return std::polar(std::pow(mag / config.beta, 1.0 / config.alpha), std::arg(c));
}

CMatrix decompress(const CMatrix& c, const SpectralConfig& config) {
  return c.unaryExpr([&](Complex v) { return decompress(v, config); });
}

CMatrix decompress_vjp(const CMatrix& compressed, const CMatrix& grad_out,
                       const SpectralConfig& config) {
  // decompress(z) = z * g(r), g(r) = r^(p-1) / beta^p, p = 1/alpha, r = |z|.
  // grad_z = g(r) G + g'(r)/r * Re(conj(G) z) z.
  const double p = 1.0 / config.alpha;
  const double scale = std::pow(config.beta, -p);
  CMatrix grad(compressed.rows(), compressed.cols());
  for (Eigen::Index i = 0; i < compressed.size(); ++i) {
    const Complex z = compressed.data()[i];
    const Complex g = grad_out.data()[i];
    const double r = std::abs(z);
    if (r < kMagnitudeFloor) {
      grad.data()[i] = {0.0, 0.0};
      continue;
    }
    const double gr = scale * std::pow(r, p - 1.0);
    const double dgr_over_r = scale * (p - 1.0) * std::pow(r, p - 3.0);
    grad.data()[i] = gr * g + dgr_over_r * (std::conj(g) * z).real() * z;
  }
  return grad;
}

std::vector<double> analysis_window(const SpectralConfig& config) {
  std::vector<double> w(config.n_fft);
  for (int i = 0; i < config.n_fft; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / config.n_fft);
  }
  return w;
}

Eigen::Index frame_count(std::size_t length, const SpectralConfig& config) {
  const std::size_t half = config.n_fft / 2;
  const std::size_t padded = padded_signal_length(length, config) + 2 * half;
  return 1 + static_cast<Eigen::Index>((padded - config.n_fft) / config.hop);
}

ComplexSpectrogram stft(const Waveform& wave, const SpectralConfig& config) {
  config.validate();
  if (wave.samples.empty()) throw InvalidInput("stft of an empty waveform");
  for (double s : wave.samples) {
    if (!std::isfinite(s)) throw InvalidInput("waveform contains non-finite samples");
  }
  const std::size_t n = config.n_fft;
  const std::size_t half = n / 2;
  std::vector<double> signal = wave.samples;
  signal.resize(padded_signal_length(signal.size(), config), 0.0);

  const std::size_t len = signal.size();
  std::vector<double> padded(len + 2 * half);
  for (std::size_t i = 0; i < len; ++i) padded[half + i] = signal[i];
  for (std::size_t k = 1; k <= half; ++k) {
    padded[half - k] = signal[k];
    padded[half + len - 1 + k] = signal[len - 1 - k];
  }

  const Eigen::Index frames = frame_count(wave.size(), config);
  const auto window = analysis_window(config);
  const RealFft& fft = RealFft::get(config.n_fft);

  ComplexSpectrogram out;
  out.config = config;
  out.original_length = wave.size();
  out.data.resize(config.freq_bins(), frames);
  std::vector<double> frame(n);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * config.hop;
    for (std::size_t i = 0; i < n; ++i) frame[i] = padded[off + i] * window[i];
    fft.forward(frame, std::span<Complex>(out.data.col(t).data(), config.freq_bins()));
  }
  out.data = compress(out.data, config);
  return out;
}

Waveform istft(const ComplexSpectrogram& spec) {
  check_shape(spec);
  if (!all_finite(spec.data)) throw InvalidInput("non-finite spectrogram");
  const SpectralConfig& config = spec.config;
  const std::size_t n = config.n_fft;
  const std::size_t half = n / 2;
  const CMatrix linear = decompress(spec.data, config);
  const auto window = analysis_window(config);
  const auto energy = window_energy(spec.frames(), window, config.hop);
  const RealFft& fft = RealFft::get(config.n_fft);

  std::vector<double> acc(energy.size(), 0.0);
  std::vector<double> frame(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index t = 0; t < spec.frames(); ++t) {
    fft.inverse(std::span<const Complex>(linear.col(t).data(), config.freq_bins()), frame);
    const std::size_t off = static_cast<std::size_t>(t) * config.hop;
    for (std::size_t i = 0; i < n; ++i) acc[off + i] += frame[i] * inv_n * window[i];
  }

  Waveform out;
  out.samples.assign(output_length(spec), 0.0);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const std::size_t j = half + i;
    if (j < acc.size() && energy[j] > 1e-10) out.samples[i] = acc[j] / energy[j];
  }
  return out;
}

CMatrix istft_vjp(const ComplexSpectrogram& spec, std::span<const double> grad_wave) {
  check_shape(spec);
  const SpectralConfig& config = spec.config;
  const std::size_t n = config.n_fft;
  const std::size_t half = n / 2;
  if (grad_wave.size() != output_length(spec)) {
    throw InvalidInput("istft_vjp: gradient length does not match output length");
  }
  const auto window = analysis_window(config);
  const auto energy = window_energy(spec.frames(), window, config.hop);
  const RealFft& fft = RealFft::get(config.n_fft);

  std::vector<double> grad_acc(energy.size(), 0.0);
  for (std::size_t i = 0; i < grad_wave.size(); ++i) {
    const std::size_t j = half + i;
    if (j < grad_acc.size() && energy[j] > 1e-10) grad_acc[j] = grad_wave[i] / energy[j];
  }

  CMatrix grad_linear(config.freq_bins(), spec.frames());
  std::vector<double> frame(n);
  for (Eigen::Index t = 0; t < spec.frames(); ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * config.hop;
    for (std::size_t i = 0; i < n; ++i) frame[i] = grad_acc[off + i] * window[i];
    fft.inverse_normalized_vjp(frame,
                               std::span<Complex>(grad_linear.col(t).data(), config.freq_bins()));
  }
  return decompress_vjp(spec.data, grad_linear, config);
}

}  // namespace fmse
