#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fmse/spectral.hpp"
#include "oracles.hpp"

using namespace fmse;

TEST_CASE("compress: hand-evaluated values") {
  const SpectralConfig cfg;
  const Complex a = compress(Complex(4.0, 0.0), cfg);
  CHECK(a.real() == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(a.imag() == doctest::Approx(0.0));
  CHECK(compress(Complex(0.0, 0.0), cfg) == Complex(0.0, 0.0));
  const Complex b = compress(Complex(-1.0, 0.0), cfg);
  CHECK(b.real() == doctest::Approx(-0.15).epsilon(1e-15));
  CHECK(std::abs(b.imag()) < 1e-15);
}

TEST_CASE("decompress: inverse values and zero") {
  const SpectralConfig cfg;
  const Complex a = decompress(Complex(0.3, 0.0), cfg);
  CHECK(a.real() == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(decompress(Complex(0.0, 0.0), cfg) == Complex(0.0, 0.0));
  CHECK(decompress(Complex(1e-13, 0.0), cfg) == Complex(0.0, 0.0));
}

TEST_CASE("compress/decompress reject non-finite input") {
  const SpectralConfig cfg;
  CHECK_THROWS_AS(compress(Complex(NAN, 0.0), cfg), InvalidInput);
  CHECK_THROWS_AS(decompress(Complex(0.0, INFINITY), cfg), InvalidInput);
}

TEST_CASE("compress properties: round trip, phase, monotone magnitude") {
  const SpectralConfig cfg;
  Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Complex c = rng.complex_normal() * std::exp(rng.uniform(-4.0, 4.0));
    const Complex back = decompress(compress(c, cfg), cfg);
    worst = std::max(worst, std::abs(back - c) / std::abs(c));
    CHECK(std::abs(std::arg(compress(c, cfg)) - std::arg(c)) < 1e-15);
    const Complex bigger = c * rng.uniform(1.001, 3.0);
    CHECK(std::abs(compress(c, cfg)) < std::abs(compress(bigger, cfg)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("frame count for one second of 16 kHz audio") {
  const SpectralConfig cfg;
  CHECK(cfg.freq_bins() == 256);
  CHECK(frame_count(16000, cfg) == 126);
  CHECK(frame_count(100, cfg) == 4);  // zero-padded to one window first
}

TEST_CASE("stft matches a direct DFT of centred reflect-padded frames") {
  const SpectralConfig cfg;
  Rng rng(3);
  Waveform w;
  for (int i = 0; i < 1500; ++i) w.samples.push_back(0.3 * rng.normal());
  const ComplexSpectrogram s = stft(w, cfg);
  const CMatrix linear = decompress(s.data, cfg);
  const CMatrix ref = oracle::naive_stft(w.samples, cfg.n_fft, cfg.hop);
  REQUIRE(linear.rows() == ref.rows());
  REQUIRE(linear.cols() == ref.cols());
  CHECK((linear - ref).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stft edge cases") {
  const SpectralConfig cfg;
  CHECK_THROWS_AS(stft(Waveform{}, cfg), InvalidInput);
  Waveform zeros{std::vector<double>(16000, 0.0), 16000};
  const auto s = stft(zeros, cfg);
  CHECK(s.data.rows() == 256);
  CHECK(s.data.cols() == 126);
  CHECK(s.data.cwiseAbs().maxCoeff() == 0.0);
  CHECK(istft(s).samples == zeros.samples);
  Waveform bad{{0.0, NAN}, 16000};
  CHECK_THROWS_AS(stft(bad, cfg), InvalidInput);
}

TEST_CASE("bin-centred sinusoid peaks in its bin") {
  const SpectralConfig cfg;
  const int bin = 20;
  Waveform w;
  for (int i = 0; i < 16000; ++i) {
    w.samples.push_back(0.5 * std::sin(2.0 * std::numbers::pi * bin * i / cfg.n_fft));
  }
  const auto s = stft(w, cfg);
  // Boundary frames see the reflected signal, so only interior frames count.
  for (Eigen::Index t = 2; t + 2 < s.frames(); ++t) {
    Eigen::Index arg = 0;
    s.data.col(t).cwiseAbs().maxCoeff(&arg);
    CHECK(arg == bin);
  }
}

TEST_CASE("istft inverts stft and keeps the length") {
  const SpectralConfig cfg;
  Rng rng(11);
  for (std::size_t len : {1u, 300u, 511u, 4000u, 16003u}) {
    Waveform w;
    for (std::size_t i = 0; i < len; ++i) w.samples.push_back(rng.normal());
    const Waveform back = istft(stft(w, cfg));
    REQUIRE(back.size() == len);
    double worst = 0.0;
    for (std::size_t i = 0; i < len; ++i) worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("istft rejects a config/shape mismatch") {
  ComplexSpectrogram s;
  s.data = CMatrix::Zero(100, 4);
  CHECK_THROWS_AS(istft(s), InvalidInput);
}

TEST_CASE("istft_vjp matches finite differences") {
  SpectralConfig cfg;
  cfg.n_fft = 30;
  cfg.hop = 8;
  Rng rng(5);
  ComplexSpectrogram s;
  s.config = cfg;
  s.data = oracle::random_cmatrix(cfg.freq_bins(), 5, rng, 0.5);
  const Waveform base = istft(s);
  std::vector<double> weights(base.size());
  for (double& v : weights) v = rng.normal();
  auto f = [&](const std::vector<double>& flat) {
    ComplexSpectrogram p = s;
    for (Eigen::Index i = 0; i < p.data.size(); ++i) p.data.data()[i] = {flat[2 * i], flat[2 * i + 1]};
    const Waveform w = istft(p);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += weights[i] * w.samples[i];
    return acc;
  };
  std::vector<double> flat;
  for (Eigen::Index i = 0; i < s.data.size(); ++i) {
    flat.push_back(s.data.data()[i].real());
    flat.push_back(s.data.data()[i].imag());
  }
  const CMatrix g = istft_vjp(s, weights);
  std::vector<double> analytic;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    analytic.push_back(g.data()[i].real());
    analytic.push_back(g.data()[i].imag());
  }
  const auto numeric = oracle::finite_difference(f, flat);
  // DC and Nyquist imaginary parts do not reach the signal; both sides must agree they are 0.
  CHECK(oracle::max_relative_error(analytic, numeric, 1e-6) < 1e-5);
}
