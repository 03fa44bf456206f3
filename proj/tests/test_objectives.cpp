#include <cmath>

#include "doctest.h"
#include "fmse/aux_losses.hpp"
#include "fmse/backbone.hpp"
#include "fmse/head.hpp"
#include "fmse/objectives.hpp"
#include "oracles.hpp"

using namespace fmse;

namespace {

// Independent evaluation of the preconditioning formulas.
struct Coeffs {
  double c_skip, c_out, c_in, lambda;
};
Coeffs hand_coeffs(double t, double sd = 0.1, double smax = 0.5) {
  const double s = t * smax;
  return {sd * sd / (sd * sd + s * s), s * sd / std::sqrt(sd * sd + s * s),
          1.0 / std::sqrt(sd * sd + s * s), (s * s + sd * sd) / (s * s * sd * sd)};
}

PathBatch random_batch(int n, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  PathConfig cfg;
  PathBatch batch;
  for (int i = 0; i < n; ++i) {
    const CMatrix x1 = oracle::random_cmatrix(rows, cols, rng, 0.3);
    const CMatrix y = x1 + oracle::random_cmatrix(rows, cols, rng, 0.2);
    batch.push_back(sample_path(x1, y, rng.uniform(0.03, 1.0), cfg, rng));
  }
  return batch;
}

const PathSample& find_sample(const PathBatch& batch, const CMatrix& x_in, const PrecondConfig& p,
                              ObjectiveKind kind, double t) {
  for (const auto& s : batch) {
    if (s.t != t) continue;
    const double scale = kind == ObjectiveKind::X1Edm ? edm_coefficients(t, p, false).c_in : 1.0;
    if ((s.x_t * scale - x_in).cwiseAbs().maxCoeff() < 1e-12) return s;
  }
  throw std::runtime_error("oracle could not locate sample");
}

}  // namespace

TEST_CASE("edm coefficients at t = 1") {
  const auto c = edm_coefficients(1.0, PrecondConfig{});
  CHECK(std::abs(c.c_skip - 0.0384615) < 1e-6);
  CHECK(std::abs(c.c_out - 0.0980581) < 1e-6);
  CHECK(std::abs(c.c_in - 1.9611614) < 1e-6);
  CHECK(std::abs(c.lambda - 104.0) < 1e-6);
}

TEST_CASE("edm coefficients match an independent evaluation and identities") {
  Rng rng(9);
  const PrecondConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    const double t = 1.0 - rng.uniform(0.0, 1.0);  // (0, 1]
    const auto c = edm_coefficients(t, cfg);
    const auto h = hand_coeffs(t);
    CHECK(c.c_skip == doctest::Approx(h.c_skip).epsilon(1e-13));
    CHECK(c.c_out == doctest::Approx(h.c_out).epsilon(1e-13));
    CHECK(c.c_in == doctest::Approx(h.c_in).epsilon(1e-13));
    CHECK(c.lambda == doctest::Approx(h.lambda).epsilon(1e-13));
    const double s = t * 0.5;
    CHECK(std::abs(c.lambda * c.c_out * c.c_out - 1.0) < 1e-12);
    CHECK(std::abs(c.c_in * c.c_in * (0.01 + s * s) - 1.0) < 1e-12);
    CHECK(std::abs(c.c_skip - 0.01 * c.c_in * c.c_in) < 1e-12);
  }
}

TEST_CASE("edm coefficients: singular weight and one-minus-t map") {
  PrecondConfig cfg;
  CHECK_THROWS_AS(edm_coefficients(0.0, cfg), SingularityError);
  CHECK_NOTHROW(edm_coefficients(0.0, cfg, false));
  cfg.noise_level_map = NoiseLevelMap::OneMinusT;
  const auto c = edm_coefficients(0.0, cfg);
  const auto h = hand_coeffs(1.0);
  CHECK(c.c_out == doctest::Approx(h.c_out).epsilon(1e-14));
  CHECK_THROWS_AS(edm_coefficients(1.0, cfg), SingularityError);
}

TEST_CASE("precondition: zero network and affinity") {
  const PrecondConfig cfg;
  LinearBackbone zero;
  const CMatrix x = CMatrix::Constant(2, 2, Complex(1.0, 0.0));
  const CMatrix out = precondition(zero, x, x, 1.0, cfg);
  CHECK(std::abs(out(0, 0) - Complex(0.0384615, 0.0)) < 1e-6);

  // Output is affine in the net output with slope c_out.
  Rng rng(1);
  const CMatrix a = oracle::random_cmatrix(3, 2, rng);
  const CMatrix b = oracle::random_cmatrix(3, 2, rng);
  const CMatrix k = oracle::random_cmatrix(3, 2, rng);
  FunctionBackbone base([&](const CMatrix&, const CMatrix&, double) { return k; });
  FunctionBackbone shifted([&](const CMatrix&, const CMatrix&, double) { return CMatrix(k + b); });
  const double t = 0.4;
  const CMatrix diff = precondition(shifted, a, a, t, cfg) - precondition(base, a, a, t, cfg);
  CHECK((diff - edm_coefficients(t, cfg).c_out * b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("v_from_x1 / x1_from_v conversions") {
  const CMatrix two = CMatrix::Constant(1, 1, 2.0);
  const CMatrix one = CMatrix::Constant(1, 1, 1.0);
  CHECK(v_from_x1(two, one, 0.5)(0, 0) == Complex(2.0, 0.0));
  CHECK(x1_from_v(two, one, 0.5)(0, 0) == Complex(2.0, 0.0));
  CHECK(v_from_x1(one, one, 0.3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(x1_from_v(two, one, 1.0) == one);
  CHECK_THROWS_AS(v_from_x1(two, one, 1.0), SingularityError);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const CMatrix a = oracle::random_cmatrix(3, 3, rng);
    const CMatrix x = oracle::random_cmatrix(3, 3, rng);
    const double t = rng.uniform(0.0, 0.99);
    CHECK((x1_from_v(v_from_x1(a, x, t), x, t) - a).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("objective kind names round trip") {
  for (auto k : {ObjectiveKind::Velocity, ObjectiveKind::X1, ObjectiveKind::X1Edm}) {
    CHECK(parse_objective(to_string(k)) == k);
  }
  CHECK(to_string(ObjectiveKind::X1Edm) == "x1-edm");
  CHECK_THROWS_AS(parse_objective("score"), ConfigError);
}

TEST_CASE("oracle networks zero every objective") {
  Rng rng(21);
  const PrecondConfig precond;
  const PathBatch batch = random_batch(6, 5, 4, rng);

  FunctionBackbone v_oracle([&](const CMatrix& x, const CMatrix&, double t) {
    return find_sample(batch, x, precond, ObjectiveKind::Velocity, t).v_target;
  });
  const auto v = cfm_loss(ObjectiveKind::Velocity, v_oracle, batch, precond);
  CHECK(v.loss < 1e-10);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK((v.x1_hat[i] - batch[i].x1).cwiseAbs().maxCoeff() < 1e-12);
  }

  FunctionBackbone x_oracle([&](const CMatrix& x, const CMatrix&, double t) {
    return find_sample(batch, x, precond, ObjectiveKind::X1, t).x1;
  });
  const auto x = cfm_loss(ObjectiveKind::X1, x_oracle, batch, precond);
  CHECK(x.loss < 1e-10);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK((x.v_hat[i] - batch[i].v_target).cwiseAbs().maxCoeff() < 1e-9);
  }

  FunctionBackbone e_oracle([&](const CMatrix& x_in, const CMatrix&, double t) {
    const auto& s = find_sample(batch, x_in, precond, ObjectiveKind::X1Edm, t);
    const auto c = hand_coeffs(t);
    return CMatrix((s.x1 - c.c_skip * s.x_t) / c.c_out);
  });
  const auto e = cfm_loss(ObjectiveKind::X1Edm, e_oracle, batch, precond);
  CHECK(e.loss < 1e-10);

  for (const auto* out : {&v, &x, &e}) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const CMatrix rebuilt = batch[i].x_t + (1.0 - batch[i].t) * out->v_hat[i];
      CHECK((rebuilt - out->x1_hat[i]).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("loss values match a direct evaluation") {
  Rng rng(4);
  const PrecondConfig precond;
  const PathBatch batch = random_batch(3, 4, 3, rng);
  LinearBackbone net(0.7, -0.2);
  auto mse = [](const CMatrix& a, const CMatrix& b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) acc += std::norm(a(i) - b(i));
    return acc / double(a.size());
  };
  double v = 0, x = 0, e = 0;
  for (const auto& s : batch) {
    const CMatrix out = 0.7 * s.x_t - 0.2 * s.y;
    v += mse(out, s.v_target);
    x += mse(out, s.x1);
    const auto c = hand_coeffs(s.t);
    const CMatrix d = c.c_skip * s.x_t + c.c_out * (0.7 * c.c_in * s.x_t - 0.2 * c.c_in * s.y);
    e += c.lambda * mse(d, s.x1);
  }
  CHECK(cfm_loss(ObjectiveKind::Velocity, net, batch, precond).loss ==
        doctest::Approx(v / 3).epsilon(1e-12));
  CHECK(cfm_loss(ObjectiveKind::X1, net, batch, precond).loss ==
        doctest::Approx(x / 3).epsilon(1e-12));
  CHECK(cfm_loss(ObjectiveKind::X1Edm, net, batch, precond).loss ==
        doctest::Approx(e / 3).epsilon(1e-12));
}

TEST_CASE("x1 loss equals (1-t)^2 times velocity loss on matched predictions") {
  Rng rng(8);
  const PrecondConfig precond;
  for (int i = 0; i < 20; ++i) {
    PathBatch batch = random_batch(1, 4, 4, rng);
    const auto& s = batch[0];
    const CMatrix v_pred = oracle::random_cmatrix(4, 4, rng);
    const CMatrix x1_pred = x1_from_v(v_pred, s.x_t, s.t);
    FunctionBackbone vn([&](const CMatrix&, const CMatrix&, double) { return v_pred; });
    FunctionBackbone xn([&](const CMatrix&, const CMatrix&, double) { return x1_pred; });
    const double lv = cfm_loss(ObjectiveKind::Velocity, vn, batch, precond).loss;
    const double lx = cfm_loss(ObjectiveKind::X1, xn, batch, precond).loss;
    CHECK(std::abs(lx - (1 - s.t) * (1 - s.t) * lv) < 1e-9);
  }
}

TEST_CASE("combined loss with zero weights equals the flow-matching loss") {
  Rng rng(12);
  const PrecondConfig precond;
  const SpectralConfig spectral;
  const PathBatch batch = random_batch(2, spectral.freq_bins(), 5, rng);
  LinearBackbone net(0.3, 0.4);
  LogSpectralSurrogate surrogate;
  for (auto kind : {ObjectiveKind::Velocity, ObjectiveKind::X1, ObjectiveKind::X1Edm}) {
    const auto c = combined_loss(kind, net, batch, precond, {}, &surrogate, spectral);
    CHECK(c.total == cfm_loss(kind, net, batch, precond).loss);
    CHECK(c.perceptual == 0.0);
    CHECK(c.si_sdr == 0.0);
  }
}

TEST_CASE("gradients match finite differences") {
  Rng rng(31);
  const PrecondConfig precond;
  const SpectralConfig spectral;
  const PathBatch batch = random_batch(2, spectral.freq_bins(), 5, rng);
  LogSpectralSurrogate surrogate;
  const std::vector<double> theta{0.35, 0.45};
  for (auto kind : {ObjectiveKind::Velocity, ObjectiveKind::X1, ObjectiveKind::X1Edm}) {
    for (AuxiliaryWeights w : {AuxiliaryWeights{0.0, 0.0}, AuxiliaryWeights{0.05, 0.005}}) {
      CAPTURE(to_string(kind));
      CAPTURE(w.alpha_p);
      auto f = [&](const std::vector<double>& p) {
        LinearBackbone net(p[0], p[1]);
        return combined_loss(kind, net, batch, precond, w, &surrogate, spectral).total;
      };
      LinearBackbone net(theta[0], theta[1]);
      std::vector<double> grad(2, 0.0);
      combined_loss(kind, net, batch, precond, w, &surrogate, spectral, grad);
      const auto numeric = oracle::finite_difference(f, theta, 1e-5);
      CHECK(oracle::max_relative_error(grad, numeric) < 1e-4);
    }
  }
}

TEST_CASE("objective heads are mutually consistent") {
  Rng rng(17);
  const PrecondConfig precond;
  ReferenceNet net(ReferenceNet::Options{8, 1, 8, 3});
  const CMatrix x = oracle::random_cmatrix(16, 8, rng, 0.3);
  const CMatrix y = oracle::random_cmatrix(16, 8, rng, 0.3);
  for (auto kind : {ObjectiveKind::Velocity, ObjectiveKind::X1, ObjectiveKind::X1Edm}) {
    const auto head = wrap_objective_head(net, kind, precond);
    for (double t : {0.03, 0.4, 0.97}) {
      const CMatrix rebuilt = x + (1 - t) * head.velocity(x, y, t);
      CHECK((rebuilt - head.x1(x, y, t)).cwiseAbs().maxCoeff() < 1e-6);
    }
    if (kind != ObjectiveKind::Velocity) {
      CHECK_THROWS_AS(head.velocity(x, y, 1.0), SingularityError);
    }
  }
  const double t = 0.6;
  const auto c = edm_coefficients(t, precond, false);
  const auto head = wrap_objective_head(net, ObjectiveKind::X1Edm, precond);
  const CMatrix expected = c.c_skip * x + c.c_out * net.apply(c.c_in * x, c.c_in * y, t);
  CHECK((head.x1(x, y, t) - expected).cwiseAbs().maxCoeff() < 1e-14);
  const auto vhead = wrap_objective_head(net, ObjectiveKind::Velocity, precond);
  CHECK((vhead.x1(x, y, t) - x1_from_v(net.apply(x, y, t), x, t)).cwiseAbs().maxCoeff() < 1e-14);
}
