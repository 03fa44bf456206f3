#include "fmse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "fmse/aux_losses.hpp"

namespace fmse {

using nlohmann::json;

double SiSdrMetric::evaluate(const Waveform& estimate, const Waveform& reference) const {
  return -si_sdr_loss(estimate, reference);
}

double CommandMetric::evaluate(const Waveform& estimate, const Waveform& reference) const {
  return run_external_scorer(config_.command, estimate, reference);
}

MetricSet make_metrics(const std::vector<MetricAdapterConfig>& adapters) {
  MetricSet set;
  set.push_back(std::make_unique<SiSdrMetric>());
  for (const auto& a : adapters) set.push_back(std::make_unique<CommandMetric>(a));
  return set;
}

AggregateStat aggregate(const std::vector<double>& values) {
  AggregateStat s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.ci95 = 1.96 * std::sqrt(ss / s.count) / std::sqrt(static_cast<double>(s.count));
  return s;
}

void MetricsReport::recompute() {
  std::map<std::string, std::vector<double>> columns;
  for (const auto& [utt, metrics] : per_utterance) {
    for (const auto& [name, value] : metrics) columns[name].push_back(value);
  }
  aggregate.clear();
  for (auto& [name, values] : columns) {
    // Sorting makes the floating-point sums independent of utterance order.
    std::sort(values.begin(), values.end());
    aggregate[name] = fmse::aggregate(values);
  }
  for (const auto& [name, hib] : higher_is_better) {
    if (!aggregate.contains(name)) aggregate[name] = AggregateStat{};
  }
}

std::uint64_t utterance_seed(const std::string& utterance_id, std::uint64_t base_seed) {
  return stable_hash(utterance_id) ^ base_seed;
}

namespace {

void score_one(MetricsReport& report, const std::string& id, const Waveform& clean,
               const Waveform& noisy, const Enhancer& enhancer, const MetricSet& metrics,
               std::uint64_t base_seed) {
  Waveform enhanced;
  try {
    enhanced = enhancer(noisy, utterance_seed(id, base_seed));
  } catch (const std::exception& e) {
    report.failures.push_back({id, "*", std::string("enhancement failed: ") + e.what()});
    return;
  }
  for (const auto& m : metrics) {
    try {
      const double v = m->evaluate(enhanced, clean);
      if (!std::isfinite(v)) throw Error("non-finite score");
      report.per_utterance[id][m->name()] = v;
    } catch (const std::exception& e) {
      report.failures.push_back({id, m->name(), e.what()});
    }
  }
}

MetricsReport new_report(const MetricSet& metrics, std::string label) {
  MetricsReport r;
  r.label = std::move(label);
  for (const auto& m : metrics) r.higher_is_better[m->name()] = m->higher_is_better();
  return r;
}

}  // namespace

MetricsReport evaluate(const CorpusManifest& manifest, const Enhancer& enhancer,
                       const MetricSet& metrics, std::uint64_t base_seed, std::string label) {
  if (manifest.pairs.empty()) throw InvalidInput("evaluate: manifest is empty");
  MetricsReport report = new_report(metrics, std::move(label));
  for (const auto& e : manifest.pairs) {
    std::pair<Waveform, Waveform> signals;
    try {
      signals = load_pair(e);
    } catch (const std::exception& ex) {
      report.failures.push_back({e.utterance_id, "*", std::string("load failed: ") + ex.what()});
      continue;
    }
    score_one(report, e.utterance_id, signals.first, signals.second, enhancer, metrics, base_seed);
  }
  report.recompute();
  return report;
}

MetricsReport evaluate_signals(const std::vector<PairedSignals>& pairs, const Enhancer& enhancer,
                               const MetricSet& metrics, std::uint64_t base_seed,
                               std::string label) {
  if (pairs.empty()) throw InvalidInput("evaluate: no utterances");
  MetricsReport report = new_report(metrics, std::move(label));
  for (const auto& p : pairs) {
    score_one(report, p.utterance_id, p.clean, p.noisy, enhancer, metrics, base_seed);
  }
  report.recompute();
  return report;
}

json to_json(const MetricsReport& r) {
  json agg = json::object();
  for (const auto& [name, s] : r.aggregate) {
    agg[name] = {{"mean", s.mean}, {"ci95", s.ci95}, {"count", s.count}};
  }
  json failures = json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"utterance", f.utterance_id}, {"metric", f.metric}, {"message", f.message}});
  }
  return {{"label", r.label},
          {"per_utterance", r.per_utterance},
          {"aggregate", agg},
          {"higher_is_better", r.higher_is_better},
          {"failures", failures}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.label = j.value("label", std::string());
  r.per_utterance = j.at("per_utterance").get<std::map<std::string, std::map<std::string, double>>>();
  r.higher_is_better = j.at("higher_is_better").get<std::map<std::string, bool>>();
  for (const auto& [name, s] : j.at("aggregate").items()) {
    r.aggregate[name] = {s.at("mean").get<double>(), s.at("ci95").get<double>(),
                         s.at("count").get<int>()};
  }
  for (const auto& f : j.at("failures")) {
    r.failures.push_back({f.at("utterance").get<std::string>(), f.at("metric").get<std::string>(),
                          f.at("message").get<std::string>()});
  }
  return r;
}

ComparisonTable compare_runs(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw InvalidInput("compare_runs: no reports");
  auto names = [](const MetricsReport& r) {
    std::set<std::string> s;
    for (const auto& [name, stat] : r.aggregate) s.insert(name);
    return s;
  };
  const std::set<std::string> reference = names(reports.front());
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const std::set<std::string> other = names(reports[i]);
    if (other == reference) continue;
    std::ostringstream os;
    os << "compare_runs: metric sets differ between '" << reports.front().label << "' and '"
       << reports[i].label << "':";
    for (const auto& n : reference) {
      if (!other.contains(n)) os << " -" << n;
    }
    for (const auto& n : other) {
      if (!reference.contains(n)) os << " +" << n;
    }
    throw InvalidInput(os.str());
  }

  ComparisonTable t;
  t.metrics.assign(reference.begin(), reference.end());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    t.runs.push_back(reports[i].label.empty() ? "run" + std::to_string(i) : reports[i].label);
    std::vector<AggregateStat> row;
    for (const auto& m : t.metrics) row.push_back(reports[i].aggregate.at(m));
    t.values.push_back(row);
  }
  t.best.assign(reports.size(), std::vector<bool>(t.metrics.size(), false));
  for (std::size_t k = 0; k < t.metrics.size(); ++k) {
    const auto it = reports.front().higher_is_better.find(t.metrics[k]);
    const bool higher = it == reports.front().higher_is_better.end() || it->second;
    double best = t.values[0][k].mean;
    for (std::size_t i = 1; i < reports.size(); ++i) {
      const double v = t.values[i][k].mean;
      best = higher ? std::max(best, v) : std::min(best, v);
    }
    for (std::size_t i = 0; i < reports.size(); ++i) t.best[i][k] = t.values[i][k].mean == best;
  }
  return t;
}

json ComparisonTable::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    json cells = json::object();
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      cells[metrics[k]] = {{"mean", values[i][k].mean},
                           {"ci95", values[i][k].ci95},
                           {"count", values[i][k].count},
                           {"best", static_cast<bool>(best[i][k])}};
    }
    rows.push_back({{"run", runs[i]}, {"metrics", cells}});
  }
  return {{"metrics", metrics}, {"rows", rows}};
}

std::string ComparisonTable::to_text() const {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"run"};
  header.insert(header.end(), metrics.begin(), metrics.end());
  cells.push_back(header);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::vector<std::string> row{runs[i]};
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      std::ostringstream os;
      os << std::fixed << std::setprecision(3) << values[i][k].mean << " ± " << values[i][k].ci95
         << (best[i][k] ? " *" : "");
      row.push_back(os.str());
    }
    cells.push_back(row);
  }
  // Width in code points; "±" is two bytes in UTF-8.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t k = 0; k < row.size(); ++k) widths[k] = std::max(widths[k], width(row[k]));
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      os << row[k] << std::string(widths[k] - width(row[k]) + (k + 1 < row.size() ? 2 : 0), ' ');
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace fmse
