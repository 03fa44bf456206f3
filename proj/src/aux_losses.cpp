#include "fmse/aux_losses.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "fmse/fft.hpp"
#include "fmse/wav.hpp"

namespace fmse {

double si_sdr_loss(std::span<const double> estimate, std::span<const double> reference,
                   std::vector<double>* grad) {
  if (estimate.size() != reference.size()) {
    throw InvalidInput("si_sdr_loss: length mismatch (" + std::to_string(estimate.size()) +
                       " vs " + std::to_string(reference.size()) + ")");
  }
  if (reference.empty()) throw InvalidInput("si_sdr_loss: empty signals");
  double rr = 0.0, er = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    rr += reference[i] * reference[i];
    er += estimate[i] * reference[i];
  }
  if (rr == 0.0) throw InvalidInput("si_sdr_loss: reference is identically zero");
  const double omega = er / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = omega * reference[i];
    const double r = estimate[i] - s;
    target += s * s;
    residual += r * r;
  }
  const bool guarded = residual < kSiSdrEpsilon;
  const double denom = guarded ? kSiSdrEpsilon : residual;
  const double loss = -10.0 * std::log10(target / denom);
  if (grad != nullptr) {
    // d target / d est = 2 omega ref; d residual / d est = 2 (est - omega ref).
    const double k = -10.0 / std::numbers::ln10;
    grad->assign(estimate.size(), 0.0);
    for (std::size_t i = 0; i < estimate.size(); ++i) {
      const double s = omega * reference[i];
      const double d_res = guarded ? 0.0 : 2.0 * (estimate[i] - s) / denom;
      (*grad)[i] = k * (2.0 * s / target - d_res);
    }
  }
  return loss;
}

double si_sdr_loss(const Waveform& estimate, const Waveform& reference) {
  return si_sdr_loss(estimate.samples, reference.samples);
}

double PerceptualLoss::evaluate_with_grad(const Waveform&, const Waveform&,
                                          std::vector<double>&) const {
  throw InvalidInput("perceptual loss '" + name() + "' is not differentiable");
}

double LogSpectralSurrogate::evaluate(const Waveform& estimate, const Waveform& reference) const {
  return run(estimate, reference, nullptr);
}

double LogSpectralSurrogate::evaluate_with_grad(const Waveform& estimate,
                                                const Waveform& reference,
                                                std::vector<double>& grad) const {
  return run(estimate, reference, &grad);
}

double LogSpectralSurrogate::run(const Waveform& estimate, const Waveform& reference,
                                 std::vector<double>* grad) const {
  if (estimate.size() != reference.size()) {
    throw InvalidInput("log-spectral loss: length mismatch");
  }
  if (estimate.samples.empty()) throw InvalidInput("log-spectral loss: empty signals");
  const int n = options_.n_fft;
  const int hop = options_.hop;
  const std::size_t len = std::max<std::size_t>(estimate.size(), static_cast<std::size_t>(n));
  const std::size_t frames = 1 + (len - n) / hop;
  const RealFft& fft = RealFft::get(n);
  const int bins = fft.bins();

  std::vector<double> window(n);
  for (int i = 0; i < n; ++i) window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);

  auto frame_of = [&](const std::vector<double>& x, std::size_t f, std::vector<double>& out) {
    for (int i = 0; i < n; ++i) {
      const std::size_t j = f * hop + i;
      out[i] = j < x.size() ? x[j] * window[i] : 0.0;
    }
  };

  const double count = static_cast<double>(frames) * bins;
  std::vector<double> fe(n), fr(n), gframe(n);
  std::vector<Complex> se(bins), sr(bins), gspec(bins);
  if (grad != nullptr) grad->assign(estimate.size(), 0.0);
  double total = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    frame_of(estimate.samples, f, fe);
    frame_of(reference.samples, f, fr);
    fft.forward(fe, se);
    fft.forward(fr, sr);
    for (int k = 0; k < bins; ++k) {
      const double pe = std::norm(se[k]) + options_.floor;
      const double pr = std::norm(sr[k]) + options_.floor;
      const double d = std::log(pe) - std::log(pr);
      const double wgt = d > 0.0 ? options_.excess_weight : 1.0;
      total += wgt * d * d;
      if (grad != nullptr) {
        // d/dX of w d^2 with d = log(|X|^2 + floor): 2 w d / pe * 2 X
        gspec[k] = (4.0 * wgt * d / pe / count) * se[k];
      }
    }
    if (grad != nullptr) {
      fft.forward_vjp(gspec, gframe);
      for (int i = 0; i < n; ++i) {
        const std::size_t j = f * hop + i;
        if (j < grad->size()) (*grad)[j] += gframe[i] * window[i];
      }
    }
  }
  return total / count;
}

CommandPerceptualLoss::CommandPerceptualLoss(std::string name, std::string command,
                                             bool higher_is_better, double best_score)
    : name_(std::move(name)),
      command_(std::move(command)),
      higher_is_better_(higher_is_better),
      best_score_(best_score) {
  if (command_.empty()) throw ConfigError("perceptual adapter '" + name_ + "' has no command");
}

double CommandPerceptualLoss::evaluate(const Waveform& estimate, const Waveform& reference) const {
  const double score = run_external_scorer(command_, estimate, reference);
  return higher_is_better_ ? -score : score;
}

double run_external_scorer(const std::string& command, const Waveform& estimate,
                           const Waveform& reference) {
  namespace fs = std::filesystem;
  static thread_local std::mt19937_64 names(std::random_device{}());
  const fs::path dir = fs::temp_directory_path() / ("fmse-score-" + std::to_string(names()));
  fs::create_directories(dir);
  const fs::path est = dir / "estimate.wav";
  const fs::path ref = dir / "reference.wav";
  write_wav(est, estimate);
  write_wav(ref, reference);
  const std::string cmd = command + " '" + est.string() + "' '" + ref.string() + "'";
  std::string output;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    fs::remove_all(dir);
    throw IoError("cannot run scorer: " + command);
  }
  std::array<char, 256> buf{};
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) output += buf.data();
  const int status = pclose(pipe);
  fs::remove_all(dir);
  if (status != 0) {
    throw IoError("scorer '" + command + "' exited with status " + std::to_string(status));
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(output, &used);
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
    return v;
  } catch (const std::exception&) {
    throw IoError("scorer '" + command + "' printed no number: '" + output + "'");
  }
}

double pesq_loss(const PerceptualLoss& fn, const Waveform& estimate, const Waveform& reference) {
  if (estimate.sample_rate != 16000 || reference.sample_rate != 16000) {
    throw InvalidInput("perceptual loss '" + fn.name() + "' requires 16 kHz input");
  }
  double value = 0.0;
  try {
    value = fn.evaluate(estimate, reference);
  } catch (const std::exception& e) {
    throw Error("perceptual loss '" + fn.name() + "' failed: " + e.what());
  }
  if (!std::isfinite(value)) {
    throw Error("perceptual loss '" + fn.name() + "' returned a non-finite value");
  }
  return value;
}

std::unique_ptr<PerceptualLoss> make_perceptual_loss(const std::string& name,
                                                     const nlohmann::json& options) {
  if (name == "log-spectral") {
    LogSpectralSurrogate::Options o;
    if (options.is_object()) {
      o.n_fft = options.value("n_fft", o.n_fft);
      o.hop = options.value("hop", o.hop);
      o.floor = options.value("floor", o.floor);
      o.excess_weight = options.value("excess_weight", o.excess_weight);
    }
    return std::make_unique<LogSpectralSurrogate>(o);
  }
  if (name == "command") {
    if (!options.is_object() || !options.contains("command")) {
      throw ConfigError("perceptual adapter 'command' needs a 'command' option");
    }
    return std::make_unique<CommandPerceptualLoss>(
        options.value("label", std::string("pesq")), options.at("command").get<std::string>(),
        options.value("higher_is_better", true), options.value("best_score", 4.5));
  }
  throw ConfigError("unknown perceptual loss adapter '" + name + "'");
}

}  // namespace fmse
