#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fmse {

using Complex = std::complex<double>;

/// F x T complex matrix; one column per STFT frame.
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A (1 - t) division or a diverging loss weight was requested.
class SingularityError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

bool all_finite(const CMatrix& m);

/// Seeded random source. The whole state (engine and cached normal deviate)
/// is serializable so checkpointed runs resume on the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform draw on [lo, hi); never returns hi.
  double uniform(double lo, double hi);
  double normal() { return normal_(engine_); }
  /// Independent unit-variance normals on the real and imaginary parts.
  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re, im};
  }
  std::uint64_t next_u64() { return engine_(); }

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.normal_ == b.normal_;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Stable 64-bit FNV-1a hash, used to derive per-utterance seeds.
std::uint64_t stable_hash(const std::string& text);

/// Keeps large scratch buffers on the heap instead of returning them to the
/// OS after every layer. No-op outside glibc. Call once at program start.
void tune_allocator();

}  // namespace fmse
