#include "fmse/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace fmse {

using nlohmann::json;

namespace {

/// Reads keys from one JSON object and rejects whatever was not consumed.
class StrictReader {
 public:
  StrictReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("'" + where_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("configuration key '" + path(key) + "' has the wrong type");
    }
  }

  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string text;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    get(key, text);
    try {
      out = parse(text);
    } catch (const ConfigError& e) {
      throw ConfigError("configuration key '" + path(key) + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError("unknown configuration key '" + path(key) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto rethrow_as_config(Fn&& fn, const std::string& where) {
  try {
    return fn();
  } catch (const InvalidInput& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("train.ema_decay must be in (0, 1)");
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
  if (val_interval < 1) throw ConfigError("train.val_interval must be >= 1");
  if (!(alpha_p >= 0.0) || !(alpha_s >= 0.0)) {
    throw ConfigError("train.alpha_p and train.alpha_s must be >= 0");
  }
  if (crop_frames < 1) throw ConfigError("train.crop_frames must be >= 1");
}

void RunConfig::validate() const {
  rethrow_as_config([&] { spectral.validate(); return 0; }, "spectral");
  rethrow_as_config([&] { path.validate(); return 0; }, "path");
  rethrow_as_config([&] { precond.validate(); return 0; }, "precond");
  rethrow_as_config([&] { sampler.validate(); return 0; }, "sampler");
  train.validate();
  if (!val_metric.empty()) {
    bool found = false;
    for (const auto& m : metrics) found = found || m.name == val_metric;
    if (!found) throw ConfigError("val_metric '" + val_metric + "' is not a configured metric");
  }
}

json to_json(const SpectralConfig& c) {
  return {{"n_fft", c.n_fft}, {"hop", c.hop}, {"window", "periodic-hann"},
          {"alpha", c.alpha}, {"beta", c.beta}};
}

json to_json(const PathConfig& c) { return {{"sigma_max", c.sigma_max}, {"t_eps", c.t_eps}}; }

json to_json(const PrecondConfig& c) {
  return {{"sigma_data", c.sigma_data}, {"noise_level_map", to_string(c.noise_level_map)}};
}

json to_json(const SamplerConfig& c) {
  return {{"n_steps", c.n_steps},
          {"t_start", c.t_start},
          {"t_end", c.t_end},
          {"scheme", to_string(c.scheme)}};
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"ema_decay", c.ema_decay},
          {"max_steps", c.max_steps},
          {"val_interval", c.val_interval},
          {"alpha_p", c.alpha_p},
          {"alpha_s", c.alpha_s},
          {"objective", to_string(c.objective)},
          {"seed", c.seed},
          {"crop_frames", c.crop_frames},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"val_max_utts", c.val_max_utts},
          {"perceptual_loss", c.perceptual_loss},
          {"perceptual_options", c.perceptual_options}};
}

json to_json(const RunConfig& c) {
  json metrics = json::array();
  for (const auto& m : c.metrics) {
    metrics.push_back(
        {{"name", m.name}, {"command", m.command}, {"higher_is_better", m.higher_is_better}});
  }
  return {{"spectral", to_json(c.spectral)},
          {"path", to_json(c.path)},
          {"precond", to_json(c.precond)},
          {"sampler", to_json(c.sampler)},
          {"train", to_json(c.train)},
          {"backbone",
           {{"channels", c.backbone.channels},
            {"depth", c.backbone.depth},
            {"embedding_dim", c.backbone.embedding_dim},
            {"seed", c.backbone.seed}}},
          {"corpus",
           {{"root", c.corpus.root},
            {"layout", to_string(c.corpus.layout)},
            {"max_utts", c.corpus.max_utts}}},
          {"metrics", metrics},
          {"val_metric", c.val_metric},
          {"output_dir", c.output_dir}};
}

SpectralConfig spectral_from_json(const json& j, const std::string& where) {
  SpectralConfig c;
  StrictReader r(j, where);
  r.get("n_fft", c.n_fft);
  r.get("hop", c.hop);
  r.get_enum("window", c.window, [](const std::string& s) {
    if (s != "periodic-hann") throw ConfigError("only periodic-hann is supported");
    return WindowKind::PeriodicHann;
  });
  r.get("alpha", c.alpha);
  r.get("beta", c.beta);
  r.finish();
  return c;
}

PathConfig path_from_json(const json& j, const std::string& where) {
  PathConfig c;
  StrictReader r(j, where);
  r.get("sigma_max", c.sigma_max);
  r.get("t_eps", c.t_eps);
  r.finish();
  return c;
}

PrecondConfig precond_from_json(const json& j, const std::string& where) {
  PrecondConfig c;
  StrictReader r(j, where);
  r.get("sigma_data", c.sigma_data);
  r.get("sigma_max", c.sigma_max);
  r.get_enum("noise_level_map", c.noise_level_map,
             [](const std::string& s) { return parse_noise_level_map(s); });
  r.finish();
  return c;
}

SamplerConfig sampler_from_json(const json& j, const std::string& where) {
  SamplerConfig c;
  StrictReader r(j, where);
  r.get("n_steps", c.n_steps);
  r.get("t_start", c.t_start);
  r.get("t_end", c.t_end);
  r.get_enum("scheme", c.scheme, [](const std::string& s) { return parse_sampler_scheme(s); });
  r.finish();
  return c;
}

TrainConfig train_from_json(const json& j, const std::string& where) {
  TrainConfig c;
  StrictReader r(j, where);
  r.get("learning_rate", c.learning_rate);
  r.get("batch_size", c.batch_size);
  r.get("ema_decay", c.ema_decay);
  r.get("max_steps", c.max_steps);
  r.get("val_interval", c.val_interval);
  r.get("alpha_p", c.alpha_p);
  r.get("alpha_s", c.alpha_s);
  r.get_enum("objective", c.objective, [](const std::string& s) { return parse_objective(s); });
  r.get("seed", c.seed);
  r.get("crop_frames", c.crop_frames);
  r.get("adam_beta1", c.adam_beta1);
  r.get("adam_beta2", c.adam_beta2);
  r.get("adam_eps", c.adam_eps);
  r.get("val_max_utts", c.val_max_utts);
  r.get("perceptual_loss", c.perceptual_loss);
  if (const json* opts = r.child("perceptual_options")) c.perceptual_options = *opts;
  r.finish();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  StrictReader r(j, "");
  if (const json* s = r.child("spectral")) c.spectral = spectral_from_json(*s, "spectral");
  if (const json* s = r.child("path")) c.path = path_from_json(*s, "path");
  if (const json* s = r.child("precond")) {
    if (s->contains("sigma_max")) {
      throw ConfigError("configuration key 'precond.sigma_max' is shared; set path.sigma_max");
    }
    c.precond = precond_from_json(*s, "precond");
  }
  c.precond.sigma_max = c.path.sigma_max;
  if (const json* s = r.child("sampler")) c.sampler = sampler_from_json(*s, "sampler");
  if (const json* s = r.child("train")) c.train = train_from_json(*s, "train");
  if (const json* s = r.child("backbone")) {
    StrictReader b(*s, "backbone");
    b.get("channels", c.backbone.channels);
    b.get("depth", c.backbone.depth);
    b.get("embedding_dim", c.backbone.embedding_dim);
    b.get("seed", c.backbone.seed);
    b.finish();
  }
  if (const json* s = r.child("corpus")) {
    StrictReader b(*s, "corpus");
    b.get("root", c.corpus.root);
    b.get_enum("layout", c.corpus.layout, [](const std::string& v) { return parse_layout(v); });
    b.get("max_utts", c.corpus.max_utts);
    b.finish();
  }
  if (const json* s = r.child("metrics")) {
    if (!s->is_array()) throw ConfigError("'metrics' must be an array");
    for (std::size_t i = 0; i < s->size(); ++i) {
      MetricAdapterConfig m;
      StrictReader b(s->at(i), "metrics[" + std::to_string(i) + "]");
      b.get("name", m.name);
      b.get("command", m.command);
      b.get("higher_is_better", m.higher_is_better);
      b.finish();
      if (m.name.empty() || m.command.empty()) {
        throw ConfigError("metrics[" + std::to_string(i) + "] needs a name and a command");
      }
      c.metrics.push_back(m);
    }
  }
  r.get("val_metric", c.val_metric);
  r.get("output_dir", c.output_dir);
  r.finish();
  c.validate();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read configuration file " + path.string());
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("configuration file " + path.string() + " is not JSON");
  return j;
}

std::string config_hash(const RunConfig& config) {
  const std::uint64_t h = stable_hash(to_json(config).dump());
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str().substr(0, 8);
}

}  // namespace fmse
