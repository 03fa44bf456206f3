#include "fmse/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace fmse {

using nlohmann::json;

std::unique_ptr<Backbone> Checkpoint::inference_net() const {
  auto net = make_backbone(architecture);
  net->set_parameters(ema_params);
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  json history = json::array();
  for (const auto& [step, value] : c.history) history.push_back({step, value});
  json j = {{"format", kCheckpointFormat},
            {"architecture", c.architecture},
            {"objective", to_string(c.objective)},
            {"spectral", to_json(c.spectral)},
            {"path", to_json(c.path)},
            {"precond", to_json(c.precond)},
            {"train", to_json(c.train)},
            {"step", c.step},
            {"params", c.params},
            {"ema_params", c.ema_params},
            {"adam_m", c.adam_m},
            {"adam_v", c.adam_v},
            {"rng_state", c.rng_state},
            {"best_val", std::isfinite(c.best_val) ? json(c.best_val) : json(nullptr)},
            {"history", history}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp);
    if (!os) throw IoError("cannot write checkpoint " + path.string());
    os << j.dump();
    if (!os) throw IoError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read checkpoint " + path.string());
  const json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw IoError("checkpoint " + path.string() + " is not valid JSON");
  if (j.value("format", std::string()) != kCheckpointFormat) {
    throw InvalidInput("checkpoint " + path.string() + " has format '" +
                       j.value("format", std::string("<none>")) + "', expected " +
                       kCheckpointFormat);
  }
  try {
    Checkpoint c;
    c.architecture = j.at("architecture");
    c.objective = parse_objective(j.at("objective").get<std::string>());
    c.spectral = spectral_from_json(j.at("spectral"));
    c.path = path_from_json(j.at("path"));
    c.precond = precond_from_json(j.at("precond"));
    c.precond.sigma_max = c.path.sigma_max;
    c.train = train_from_json(j.at("train"));
    c.step = j.at("step").get<int>();
    c.params = j.at("params").get<std::vector<double>>();
    c.ema_params = j.at("ema_params").get<std::vector<double>>();
    c.adam_m = j.at("adam_m").get<std::vector<double>>();
    c.adam_v = j.at("adam_v").get<std::vector<double>>();
    c.rng_state = j.at("rng_state").get<std::string>();
    c.best_val = j.at("best_val").is_null() ? -std::numeric_limits<double>::infinity()
                                            : j.at("best_val").get<double>();
    for (const auto& h : j.at("history")) c.history.emplace_back(h[0].get<int>(), h[1].get<double>());
    return c;
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path.string() + " is malformed: " + e.what());
  }
}

}  // namespace fmse
