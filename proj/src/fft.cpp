#include "fmse/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace fmse {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Scratch {
  std::vector<double> real;
  std::vector<Complex> spec;
  void ensure(int n) {
    if (static_cast<int>(real.size()) < n) real.resize(n);
    if (static_cast<int>(spec.size()) < n / 2 + 1) spec.resize(n / 2 + 1);
  }
};

thread_local Scratch scratch;

}  // namespace

const RealFft& RealFft::get(int n) {
  static std::map<int, std::unique_ptr<RealFft>> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, std::unique_ptr<RealFft>(new RealFft(n))).first;
  }
  return *it->second;
}

RealFft::RealFft(int n) : n_(n) {
  if (n < 2) throw InvalidInput("FFT size must be >= 2");
  std::vector<double> real(n);
  std::vector<Complex> spec(n / 2 + 1);
  auto* c = reinterpret_cast<fftw_complex*>(spec.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  r2c_ = fftw_plan_dft_r2c_1d(n, real.data(), c, flags);
  c2r_ = fftw_plan_dft_c2r_1d(n, c, real.data(), flags);
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(r2c_));
  fftw_destroy_plan(static_cast<fftw_plan>(c2r_));
}

void RealFft::forward(std::span<const double> in, std::span<Complex> out) const {
  scratch.ensure(n_);
  std::copy(in.begin(), in.begin() + n_, scratch.real.begin());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(r2c_), scratch.real.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const Complex> in, std::span<double> out) const {
  scratch.ensure(n_);
  std::copy(in.begin(), in.begin() + bins(), scratch.spec.begin());
  // c2r overwrites its input.
  fftw_execute_dft_c2r(static_cast<fftw_plan>(c2r_),
                       reinterpret_cast<fftw_complex*>(scratch.spec.data()), out.data());
}

void RealFft::inverse_normalized_vjp(std::span<const double> grad_out,
                                     std::span<Complex> grad_in) const {
  forward(grad_out, grad_in);
  const double inv_n = 1.0 / n_;
  const int nb = bins();
  for (int k = 0; k < nb; ++k) {
    const bool edge = k == 0 || (n_ % 2 == 0 && k == n_ / 2);
    grad_in[k] *= (edge ? 1.0 : 2.0) * inv_n;
    if (edge) grad_in[k] = {grad_in[k].real(), 0.0};
  }
}

void RealFft::forward_vjp(std::span<const Complex> grad_out, std::span<double> grad_in) const {
  // grad_in[n] = sum_k Re(G_k exp(+2 pi i k n / N)); the c2r transform doubles
  // the interior bins, so halve them first.
  scratch.ensure(n_);
  const int nb = bins();
  std::vector<Complex> half(nb);
  for (int k = 0; k < nb; ++k) {
    const bool edge = k == 0 || (n_ % 2 == 0 && k == n_ / 2);
    half[k] = edge ? Complex(grad_out[k].real(), 0.0) : grad_out[k] * 0.5;
  }
  inverse(half, grad_in);
}

}  // namespace fmse
