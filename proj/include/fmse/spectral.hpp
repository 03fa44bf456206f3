#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fmse/types.hpp"

namespace fmse {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const noexcept { return samples.size(); }
};

enum class WindowKind { PeriodicHann };

/// STFT and amplitude-compression settings. Defaults are the 16 kHz model
/// configuration: 510-point periodic Hann, hop 128, |c|^0.5 scaled by 0.15.
struct SpectralConfig {
  int n_fft = 510;
  int hop = 128;
  WindowKind window = WindowKind::PeriodicHann;
  double alpha = 0.5;
  double beta = 0.15;

  int freq_bins() const noexcept { return n_fft / 2 + 1; }
  void validate() const;

  friend bool operator==(const SpectralConfig&, const SpectralConfig&) = default;
};

struct ComplexSpectrogram {
  CMatrix data;  // freq_bins x frames, compressed domain
  SpectralConfig config;
  std::size_t original_length = 0;

  Eigen::Index frames() const noexcept { return data.cols(); }
};

/// beta * |c|^alpha * exp(i arg c), elementwise.
Complex compress(Complex c, const SpectralConfig& config);
CMatrix compress(const CMatrix& c, const SpectralConfig& config);

/// (|c|/beta)^(1/alpha) * exp(i arg c); magnitudes below 1e-12 map to zero.
Complex decompress(Complex c, const SpectralConfig& config);
CMatrix decompress(const CMatrix& c, const SpectralConfig& config);

/// Vector-Jacobian product of decompress at `compressed`.
CMatrix decompress_vjp(const CMatrix& compressed, const CMatrix& grad_out,
                       const SpectralConfig& config);

std::vector<double> analysis_window(const SpectralConfig& config);

/// Frames produced for a signal of `length` samples. Frames are centred:
/// the signal (zero-padded to at least n_fft samples) is reflect-padded by
/// n_fft/2 on both sides, giving 1 + floor(length / hop) frames for even
/// n_fft and length >= n_fft.
Eigen::Index frame_count(std::size_t length, const SpectralConfig& config);

/// Centred STFT followed by amplitude compression.
ComplexSpectrogram stft(const Waveform& wave, const SpectralConfig& config);

/// Decompression, inverse FFT, and overlap-add with the canonical dual
/// window. Output is truncated to original_length (or the full centred
/// length (frames - 1) * hop when original_length is 0).
Waveform istft(const ComplexSpectrogram& spec);

/// Gradient of istft(spec) with respect to spec.data, given the gradient
/// with respect to the output samples.
CMatrix istft_vjp(const ComplexSpectrogram& spec, std::span<const double> grad_wave);

}  // namespace fmse
