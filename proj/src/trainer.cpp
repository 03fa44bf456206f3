#include "fmse/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fmse/checkpoint.hpp"
#include "fmse/sampler.hpp"

namespace fmse {

using nlohmann::json;

Utterance make_utterance(std::string id, Waveform clean, Waveform noisy,
                         const SpectralConfig& spectral) {
  Utterance u;
  u.id = std::move(id);
  u.clean_spec = stft(clean, spectral);
  u.noisy_spec = stft(noisy, spectral);
  u.clean = std::move(clean);
  u.noisy = std::move(noisy);
  return u;
}

TrainingData load_training_data(const Corpus& corpus, const SpectralConfig& spectral,
                                int max_utts) {
  TrainingData data;
  auto load = [&](const CorpusManifest& m, std::vector<Utterance>& out) {
    for (const auto& e : m.pairs) {
      if (max_utts > 0 && static_cast<int>(out.size()) >= max_utts) break;
      auto [clean, noisy] = load_pair(e);
      out.push_back(make_utterance(e.utterance_id, std::move(clean), std::move(noisy), spectral));
    }
  };
  load(corpus.train, data.train);
  load(corpus.val, data.val);
  return data;
}

double si_sdr_db(const Waveform& estimate, const Waveform& reference) {
  return -si_sdr_loss(estimate, reference);
}

Trainer::Trainer(TrainSetup setup, std::unique_ptr<Backbone> net, const TrainingData& data)
    : setup_(std::move(setup)), net_(std::move(net)), data_(&data), rng_(setup_.train.seed) {
  setup_.train.validate();
  if (data.train.empty()) throw InvalidInput("training split is empty");
  if (!setup_.val_metric) {
    setup_.val_metric = si_sdr_db;
    setup_.val_metric_name = "si_sdr";
  }
  if (setup_.train.alpha_p > 0.0) {
    perceptual_ = make_perceptual_loss(setup_.train.perceptual_loss, setup_.train.perceptual_options);
  }
  const auto params = net_->parameters();
  state_.params.assign(params.begin(), params.end());
  state_.ema_params = state_.params;
  state_.adam_m.assign(params.size(), 0.0);
  state_.adam_v.assign(params.size(), 0.0);
  state_.rng_state = rng_.serialize();
}

Trainer Trainer::resume(const std::filesystem::path& path, TrainSetup setup,
                        const TrainingData& data) {
  const Checkpoint c = load_checkpoint(path);
  setup.train = c.train;
  setup.spectral = c.spectral;
  setup.path = c.path;
  setup.precond = c.precond;
  auto net = make_backbone(c.architecture);
  Trainer t(std::move(setup), std::move(net), data);
  t.net_->set_parameters(c.params);
  t.state_.step = c.step;
  t.state_.params = c.params;
  t.state_.ema_params = c.ema_params;
  t.state_.adam_m = c.adam_m;
  t.state_.adam_v = c.adam_v;
  t.state_.rng_state = c.rng_state;
  t.state_.best_val = c.best_val;
  t.state_.history = c.history;
  t.rng_ = Rng::deserialize(c.rng_state);
  return t;
}

std::unique_ptr<Backbone> Trainer::ema_net() const {
  auto copy = net_->clone();
  copy->set_parameters(state_.ema_params);
  return copy;
}

void Trainer::log_line(const json& line) const {
  if (setup_.output_dir.empty()) return;
  std::filesystem::create_directories(setup_.output_dir);
  std::ofstream os(setup_.output_dir / "train_log.jsonl", std::ios::app);
  os << line.dump() << "\n";
}

LossRecord Trainer::step() {
  const TrainConfig& cfg = setup_.train;
  const auto& utts = data_->train;

  PathBatch batch;
  batch.reserve(cfg.batch_size);
  const std::vector<double> ts = sample_t(cfg.batch_size, setup_.path, rng_);
  for (int b = 0; b < cfg.batch_size; ++b) {
    const Utterance& u = utts[rng_.next_u64() % utts.size()];
    const Eigen::Index frames = u.clean_spec.frames();
    const Eigen::Index crop = std::min<Eigen::Index>(cfg.crop_frames, frames);
    const Eigen::Index start =
        frames > crop ? static_cast<Eigen::Index>(rng_.next_u64() % (frames - crop + 1)) : 0;
    const CMatrix x1 = u.clean_spec.data.middleCols(start, crop);
    const CMatrix y = u.noisy_spec.data.middleCols(start, crop);
    batch.push_back(sample_path(x1, y, ts[b], setup_.path, rng_));
  }

  std::vector<double> grad(net_->parameter_count(), 0.0);
  const CombinedLossValue loss =
      combined_loss(cfg.objective, *net_, batch, setup_.precond, {cfg.alpha_p, cfg.alpha_s},
                    perceptual_.get(), setup_.spectral, grad);

  bool finite = std::isfinite(loss.total);
  for (double g : grad) finite = finite && std::isfinite(g);
  if (!finite) {
    std::ostringstream os;
    os << "non-finite loss at step " << state_.step + 1 << ": total=" << loss.total
       << " cfm=" << loss.cfm << " perceptual=" << loss.perceptual << " si_sdr=" << loss.si_sdr
       << " t=[";
    for (std::size_t i = 0; i < ts.size(); ++i) os << (i ? ", " : "") << ts[i];
    os << "]";
    throw DivergenceError(os.str(), state_.step + 1);
  }

  // Adam with bias correction, then EMA.
  ++state_.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, state_.step);
  const double c2 = 1.0 - std::pow(b2, state_.step);
  auto params = net_->parameters();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double& m = state_.adam_m[i];
    double& v = state_.adam_v[i];
    m = b1 * m + (1.0 - b1) * grad[i];
    v = b2 * v + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
  }
  state_.params.assign(params.begin(), params.end());
  const double rate = 1.0 - cfg.ema_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state_.ema_params[i] += rate * (params[i] - state_.ema_params[i]);
  }
  state_.rng_state = rng_.serialize();

  LossRecord rec{state_.step, loss.total, loss.cfm, loss.perceptual, loss.si_sdr};
  state_.losses.push_back(rec);
  return rec;
}

double Trainer::validate() const {
  const auto& utts = data_->val;
  if (utts.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto net = ema_net();
  const int limit = setup_.train.val_max_utts > 0 ? setup_.train.val_max_utts
                                                  : static_cast<int>(utts.size());
  double sum = 0.0;
  int count = 0;
  for (const Utterance& u : utts) {
    if (count >= limit) break;
    // Fixed per-utterance seed so successive validation events are comparable.
    Rng rng(stable_hash(u.id) ^ setup_.train.seed);
    const ComplexSpectrogram out =
        enhance(*net, setup_.train.objective, u.noisy_spec, setup_.path, setup_.precond,
                setup_.sampler, rng);
    sum += setup_.val_metric(istft(out), u.clean);
    ++count;
  }
  return sum / count;
}

void Trainer::run(std::optional<int> until) {
  const int target = until.value_or(setup_.train.max_steps);
  const auto start = std::chrono::steady_clock::now();
  while (state_.step < target) {
    const LossRecord rec = step();
    json line = {{"step", rec.step},
                 {"loss", rec.total},
                 {"cfm", rec.cfm},
                 {"perceptual", rec.perceptual},
                 {"si_sdr_loss", rec.si_sdr},
                 {"wall_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                                .count()}};
    if (state_.step % setup_.train.val_interval == 0 && !data_->val.empty()) {
      const double metric = validate();
      state_.history.emplace_back(state_.step, metric);
      line["val_" + setup_.val_metric_name] = metric;
      line["val_metric"] = metric;
      if (metric > state_.best_val) {
        state_.best_val = metric;
        if (!setup_.output_dir.empty()) save_checkpoint(setup_.output_dir / "best.ckpt");
      }
    }
    log_line(line);
  }
  if (!setup_.output_dir.empty()) save_checkpoint(setup_.output_dir / "last.ckpt");
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  Checkpoint c;
  c.architecture = net_->architecture();
  c.objective = setup_.train.objective;
  c.spectral = setup_.spectral;
  c.path = setup_.path;
  c.precond = setup_.precond;
  c.train = setup_.train;
  c.step = state_.step;
  c.params = state_.params;
  c.ema_params = state_.ema_params;
  c.adam_m = state_.adam_m;
  c.adam_v = state_.adam_v;
  c.rng_state = state_.rng_state;
  c.best_val = state_.best_val;
  c.history = state_.history;
  fmse::save_checkpoint(path, c);
}

TrainState train(const TrainSetup& setup, const TrainingData& data, std::unique_ptr<Backbone> net) {
  Trainer t(setup, std::move(net), data);
  t.run();
  return t.state();
}

std::optional<int> steps_to_threshold(const std::vector<std::pair<int, double>>& history,
                                      double threshold) {
  if (history.empty()) throw InvalidInput("steps_to_threshold: empty history");
  for (const auto& [step, metric] : history) {
    if (metric >= threshold) return step;
  }
  return std::nullopt;
}

}  // namespace fmse
