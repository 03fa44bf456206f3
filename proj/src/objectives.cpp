#include "fmse/objectives.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "fmse/head.hpp"

namespace fmse {

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Velocity: return "velocity";
    case ObjectiveKind::X1: return "x1";
    case ObjectiveKind::X1Edm: return "x1-edm";
  }
  return "?";
}

ObjectiveKind parse_objective(std::string_view text) {
  if (text == "velocity" || text == "v") return ObjectiveKind::Velocity;
  if (text == "x1") return ObjectiveKind::X1;
  if (text == "x1-edm" || text == "x1_edm") return ObjectiveKind::X1Edm;
  throw ConfigError("unknown objective '" + std::string(text) +
                    "' (expected velocity, x1 or x1-edm)");
}

std::string to_string(NoiseLevelMap map) { return map == NoiseLevelMap::T ? "t" : "one-minus-t"; }

NoiseLevelMap parse_noise_level_map(std::string_view text) {
  if (text == "t") return NoiseLevelMap::T;
  if (text == "one-minus-t") return NoiseLevelMap::OneMinusT;
  throw ConfigError("unknown noise_level_map '" + std::string(text) + "'");
}

void PrecondConfig::validate() const {
  if (!(sigma_data > 0.0)) throw InvalidInput("sigma_data must be positive");
  if (!(sigma_max > 0.0)) throw InvalidInput("sigma_max must be positive");
}

EdmCoefficients edm_coefficients(double t, const PrecondConfig& config, bool need_lambda) {
  config.validate();
  const double level = config.noise_level_map == NoiseLevelMap::T ? t : 1.0 - t;
  const double s = level * config.sigma_max;
  const double sd2 = config.sigma_data * config.sigma_data;
  const double s2 = s * s;
  const double total = sd2 + s2;
  EdmCoefficients c;
  c.c_skip = sd2 / total;
  c.c_out = s * config.sigma_data / std::sqrt(total);
  c.c_in = 1.0 / std::sqrt(total);
  if (s2 == 0.0) {
    if (need_lambda) {
      throw SingularityError("EDM loss weight diverges at noise level 0 (t = " +
                             std::to_string(t) + ")");
    }
    c.lambda = std::numeric_limits<double>::infinity();
  } else {
    c.lambda = total / (s2 * sd2);
  }
  return c;
}

CMatrix precondition(const Backbone& net, const CMatrix& x_t, const CMatrix& y, double t,
                     const PrecondConfig& config) {
  if (x_t.rows() != y.rows() || x_t.cols() != y.cols()) {
    throw InvalidInput("precondition: x_t and y shapes differ");
  }
  const EdmCoefficients c = edm_coefficients(t, config, false);
  return c.c_skip * x_t + c.c_out * net.apply(c.c_in * x_t, c.c_in * y, t);
}

CMatrix v_from_x1(const CMatrix& x1_pred, const CMatrix& x_t, double t) {
  if (!(t < 1.0)) {
    throw SingularityError("velocity from an x1 prediction is undefined at t = " +
                           std::to_string(t));
  }
  return (x1_pred - x_t) / (1.0 - t);
}

CMatrix x1_from_v(const CMatrix& v_pred, const CMatrix& x_t, double t) {
  return x_t + (1.0 - t) * v_pred;
}

namespace {

struct SampleResult {
  std::unique_ptr<BackboneCache> cache;
  CMatrix grad_out;      // d loss / d net output
  double x1_slope = 0;   // d x1_hat / d net output (a real scalar for every kind)
};

struct BatchResult {
  ObjectiveOutput output;
  std::vector<SampleResult> samples;
};

BatchResult run_objective(ObjectiveKind kind, const Backbone& net, const PathBatch& batch,
                          const PrecondConfig& precond, bool need_grad) {
  if (batch.empty()) throw InvalidInput("objective: empty batch");
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  BatchResult r;
  r.samples.resize(batch.size());
  r.output.x1_hat.resize(batch.size());
  r.output.v_hat.resize(batch.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const PathSample& s = batch[b];
    if (s.x_t.rows() != s.x1.rows() || s.x_t.cols() != s.x1.cols() ||
        s.y.rows() != s.x1.rows() || s.y.cols() != s.x1.cols()) {
      throw InvalidInput("objective: inconsistent shapes in batch element " + std::to_string(b));
    }
    const double n = static_cast<double>(s.x1.size());
    SampleResult& sr = r.samples[b];
    auto* cache_slot = need_grad ? &sr.cache : nullptr;
    CMatrix residual;
    double weight = 1.0;
    double out_scale = 1.0;  // d(residual)/d(net output)
    switch (kind) {
      case ObjectiveKind::Velocity: {
        CMatrix o = net.forward(s.x_t, s.y, s.t, cache_slot);
        r.output.x1_hat[b] = x1_from_v(o, s.x_t, s.t);
        residual = o - s.v_target;
        r.output.v_hat[b] = std::move(o);
        sr.x1_slope = 1.0 - s.t;
        break;
      }
      case ObjectiveKind::X1: {
        CMatrix o = net.forward(s.x_t, s.y, s.t, cache_slot);
        r.output.v_hat[b] = v_from_x1(o, s.x_t, s.t);
        residual = o - s.x1;
        r.output.x1_hat[b] = std::move(o);
        sr.x1_slope = 1.0;
        break;
      }
      case ObjectiveKind::X1Edm: {
        const EdmCoefficients c = edm_coefficients(s.t, precond, true);
        const CMatrix o = net.forward(c.c_in * s.x_t, c.c_in * s.y, s.t, cache_slot);
        CMatrix d = c.c_skip * s.x_t + c.c_out * o;
        r.output.v_hat[b] = v_from_x1(d, s.x_t, s.t);
        residual = d - s.x1;
        r.output.x1_hat[b] = std::move(d);
        weight = c.lambda;
        out_scale = c.c_out;
        sr.x1_slope = c.c_out;
        break;
      }
    }
    total += weight * residual.squaredNorm() / n;
    if (need_grad) sr.grad_out = (2.0 * weight * out_scale * inv_batch / n) * residual;
  }
  r.output.loss = total * inv_batch;
  return r;
}

void backpropagate(const Backbone& net, const BatchResult& r, std::span<double> grad) {
  if (grad.size() != net.parameter_count()) {
    throw InvalidInput("gradient buffer has " + std::to_string(grad.size()) +
                       " entries, backbone has " + std::to_string(net.parameter_count()));
  }
  for (const SampleResult& sr : r.samples) net.backward(*sr.cache, sr.grad_out, grad);
}

}  // namespace

ObjectiveOutput cfm_loss(ObjectiveKind kind, const Backbone& net, const PathBatch& batch,
                         const PrecondConfig& precond, std::span<double> grad) {
  const bool need_grad = !grad.empty();
  BatchResult r = run_objective(kind, net, batch, precond, need_grad);
  if (need_grad) backpropagate(net, r, grad);
  return std::move(r.output);
}

CombinedLossValue combined_loss(ObjectiveKind kind, const Backbone& net, const PathBatch& batch,
                                const PrecondConfig& precond, const AuxiliaryWeights& weights,
                                const PerceptualLoss* perceptual, const SpectralConfig& frontend,
                                std::span<double> grad) {
  if (!(std::isfinite(weights.alpha_p) && weights.alpha_p >= 0.0) ||
      !(std::isfinite(weights.alpha_s) && weights.alpha_s >= 0.0)) {
    throw InvalidInput("alpha_p and alpha_s must be finite and non-negative");
  }
  const bool use_p = weights.alpha_p > 0.0;
  const bool use_s = weights.alpha_s > 0.0;
  if (use_p && perceptual == nullptr) {
    throw ConfigError("alpha_p > 0 but no perceptual loss adapter is configured");
  }
  const bool need_grad = !grad.empty();
  if (use_p && need_grad && !perceptual->differentiable()) {
    throw ConfigError("perceptual loss '" + perceptual->name() +
                      "' is not differentiable and cannot be used for training");
  }

  BatchResult r = run_objective(kind, net, batch, precond, need_grad);
  CombinedLossValue v;
  v.cfm = r.output.loss;
  v.total = v.cfm;

  if (use_p || use_s) {
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double p_sum = 0.0, s_sum = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      ComplexSpectrogram est_spec{r.output.x1_hat[b], frontend, 0};
      const ComplexSpectrogram ref_spec{batch[b].x1, frontend, 0};
      const Waveform est = istft(est_spec);
      const Waveform ref = istft(ref_spec);
      std::vector<double> wave_grad(need_grad ? est.size() : 0, 0.0);
      std::vector<double> g;
      if (use_p) {
        try {
          if (need_grad) {
            p_sum += perceptual->evaluate_with_grad(est, ref, g);
            for (std::size_t i = 0; i < g.size(); ++i) {
              wave_grad[i] += weights.alpha_p * inv_batch * g[i];
            }
          } else {
            p_sum += pesq_loss(*perceptual, est, ref);
          }
        } catch (const std::exception& e) {
          std::ostringstream os;
          os << "batch element " << b << " (t = " << batch[b].t << "): " << e.what();
          throw Error(os.str());
        }
      }
      if (use_s) {
        s_sum += si_sdr_loss(est.samples, ref.samples, need_grad ? &g : nullptr);
        if (need_grad) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            wave_grad[i] += weights.alpha_s * inv_batch * g[i];
          }
        }
      }
      if (need_grad) {
        const CMatrix gx = istft_vjp(est_spec, wave_grad);
        r.samples[b].grad_out += r.samples[b].x1_slope * gx;
      }
    }
    v.perceptual = use_p ? p_sum * inv_batch : 0.0;
    v.si_sdr = use_s ? s_sum * inv_batch : 0.0;
    if (use_p) v.total += weights.alpha_p * v.perceptual;
    if (use_s) v.total += weights.alpha_s * v.si_sdr;
  }
  if (need_grad) backpropagate(net, r, grad);
  v.detail = std::move(r.output);
  return v;
}

// ---------------------------------------------------------------------------

ObjectiveHead wrap_objective_head(const Backbone& net, ObjectiveKind kind,
                                  const PrecondConfig& precond) {
  ObjectiveHead head;
  switch (kind) {
    case ObjectiveKind::Velocity:
      head.velocity = [&net](const CMatrix& x, const CMatrix& y, double t) {
        return net.apply(x, y, t);
      };
      head.x1 = [&net](const CMatrix& x, const CMatrix& y, double t) {
        return x1_from_v(net.apply(x, y, t), x, t);
      };
      break;
    case ObjectiveKind::X1:
      head.x1 = [&net](const CMatrix& x, const CMatrix& y, double t) {
        return net.apply(x, y, t);
      };
      head.velocity = [&net](const CMatrix& x, const CMatrix& y, double t) {
        if (!(t < 1.0)) throw SingularityError("x1-derived velocity requested at t = 1");
        return v_from_x1(net.apply(x, y, t), x, t);
      };
      break;
    case ObjectiveKind::X1Edm:
      head.x1 = [&net, precond](const CMatrix& x, const CMatrix& y, double t) {
        return precondition(net, x, y, t, precond);
      };
      head.velocity = [&net, precond](const CMatrix& x, const CMatrix& y, double t) {
        if (!(t < 1.0)) throw SingularityError("x1-derived velocity requested at t = 1");
        return v_from_x1(precondition(net, x, y, t, precond), x, t);
      };
      break;
  }
  return head;
}

}  // namespace fmse
