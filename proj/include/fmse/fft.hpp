#pragma once

#include <span>

#include "fmse/types.hpp"

namespace fmse {

/// Real-input FFT of a fixed size backed by FFTW plans. Instances are shared
/// per size and are safe to execute from several threads.
class RealFft {
 public:
  static const RealFft& get(int n);

  int size() const noexcept { return n_; }
  int bins() const noexcept { return n_ / 2 + 1; }

  /// out[k] = sum_n in[n] exp(-2 pi i k n / N), k = 0..N/2.
  void forward(std::span<const double> in, std::span<Complex> out) const;
  /// Unnormalized Hermitian inverse; imaginary parts of the DC and Nyquist
  /// bins are ignored.
  void inverse(std::span<const Complex> in, std::span<double> out) const;

  /// Gradient with respect to the spectrum of `out = inverse(in) / N` given
  /// the gradient of `out`. Gradients use the (d/dRe + i d/dIm) convention.
  void inverse_normalized_vjp(std::span<const double> grad_out, std::span<Complex> grad_in) const;
  /// Gradient with respect to the input samples of `out = forward(in)`.
  void forward_vjp(std::span<const Complex> grad_out, std::span<double> grad_in) const;

  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

 private:
  explicit RealFft(int n);

  int n_;
  void* r2c_ = nullptr;
  void* c2r_ = nullptr;
};

}  // namespace fmse
