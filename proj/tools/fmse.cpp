// fmse: train, enhance, evaluate, sweep and plot flow-matching speech
// enhancement models.
//
// Exit codes: 0 success, 2 configuration error, 1 runtime failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "fmse/checkpoint.hpp"
#include "fmse/config.hpp"
#include "fmse/data.hpp"
#include "fmse/eval.hpp"
#include "fmse/sampler.hpp"
#include "fmse/trainer.hpp"
#include "fmse/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fmse;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 1;

// Options shared by every command that resolves a run configuration.
struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string objective;
  std::optional<double> alpha_p;
  std::optional<double> alpha_s;
  std::optional<int> steps;
  std::string output_dir;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration (default: $FMSE_CONFIG)");
  cmd->add_option("--set", o.overrides, "Dotted override key=value, repeatable");
  cmd->add_option("--alpha-p", o.alpha_p, "Weight of the perceptual loss");
  cmd->add_option("--alpha-s", o.alpha_s, "Weight of the SI-SDR loss");
  cmd->add_option("--max-steps", o.steps, "Training steps");
  cmd->add_option("-o,--output-dir", o.output_dir, "Parent directory for run outputs");
}

/// Precedence: command-line flags > --set > file > defaults.
json resolve_document(const ConfigOptions& o) {
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("FMSE_CONFIG")) path = env;
  }
  json doc = path.empty() ? json::object() : load_json_file(path);
  for (const auto& s : o.overrides) apply_override(doc, s);
  if (!o.objective.empty()) apply_override(doc, "train.objective=\"" + o.objective + "\"");
  if (o.alpha_p) doc["train"]["alpha_p"] = *o.alpha_p;
  if (o.alpha_s) doc["train"]["alpha_s"] = *o.alpha_s;
  if (o.steps) doc["train"]["max_steps"] = *o.steps;
  if (!o.output_dir.empty()) doc["output_dir"] = o.output_dir;
  return doc;
}

void require_corpus(const RunConfig& c) {
  if (c.corpus.root.empty()) throw ConfigError("configuration key 'corpus.root' is required");
  if (!fs::is_directory(c.corpus.root)) {
    throw ConfigError("configuration key 'corpus.root': directory '" + c.corpus.root +
                      "' does not exist");
  }
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

fs::path make_run_dir(const RunConfig& c, const std::string& tag = {}) {
  fs::path dir = fs::path(c.output_dir) / (timestamp() + "-" + config_hash(c) + tag);
  for (int k = 2; fs::exists(dir); ++k) {
    dir = fs::path(c.output_dir) / (timestamp() + "-" + config_hash(c) + tag + "-" + std::to_string(k));
  }
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

MetricSet metrics_for(const RunConfig& c) { return make_metrics(c.metrics); }

TrainSetup setup_for(const RunConfig& c, const fs::path& run_dir, const MetricSet& metrics) {
  TrainSetup s;
  s.train = c.train;
  s.spectral = c.spectral;
  s.path = c.path;
  s.precond = c.precond;
  s.sampler = c.sampler;
  s.output_dir = run_dir;
  if (!c.val_metric.empty()) {
    const MetricEvaluator* chosen = nullptr;
    for (const auto& m : metrics) {
      if (m->name() == c.val_metric) chosen = m.get();
    }
    if (chosen == nullptr) {
      throw ConfigError("configuration key 'val_metric': no metric named '" + c.val_metric + "'");
    }
    const double sign = chosen->higher_is_better() ? 1.0 : -1.0;
    s.val_metric = [chosen, sign](const Waveform& est, const Waveform& ref) {
      return sign * chosen->evaluate(est, ref);
    };
    s.val_metric_name = c.val_metric;
  }
  return s;
}

std::string log_tail(const fs::path& log, std::size_t lines = 5) {
  std::ifstream is(log);
  std::deque<std::string> tail;
  for (std::string line; std::getline(is, line);) {
    tail.push_back(line);
    if (tail.size() > lines) tail.pop_front();
  }
  std::string out;
  for (const auto& l : tail) out += "  " + l + "\n";
  return out;
}

/// Enhancer backed by a network; per-utterance seeds come from evaluate().
Enhancer model_enhancer(const Backbone& net, ObjectiveKind kind, const SpectralConfig& spectral,
                        const PathConfig& path, const PrecondConfig& precond,
                        const SamplerConfig& sampler) {
  return [&net, kind, spectral, path, precond, sampler](const Waveform& noisy, std::uint64_t seed) {
    Rng rng(seed);
    return enhance_waveform(net, kind, noisy, spectral, path, precond, sampler, rng);
  };
}

// ---------------------------------------------------------------------------

struct TrainResult {
  fs::path run_dir;
  TrainState state;
};

TrainResult run_training(const RunConfig& c, const TrainingData& data, const std::string& tag = {}) {
  const fs::path dir = make_run_dir(c, tag);
  write_json(dir / "config.json", to_json(c));
  const MetricSet metrics = metrics_for(c);
  TrainSetup setup = setup_for(c, dir, metrics);
  std::cout << "run directory: " << dir.string() << "\n";
  try {
    TrainState state = train(setup, data, std::make_unique<ReferenceNet>(c.backbone));
    return {dir, std::move(state)};
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    const std::string tail = log_tail(dir / "train_log.jsonl");
    if (!tail.empty()) std::cerr << "last log lines:\n" << tail;
    throw;
  }
}

TrainingData load_data(const RunConfig& c) {
  require_corpus(c);
  const Corpus corpus = scan_corpus(c.corpus.root, c.corpus.layout);
  if (!corpus.unmatched.empty()) {
    std::cerr << corpus.unmatched.size() << " file(s) without a counterpart:\n";
    for (const auto& p : corpus.unmatched) std::cerr << "  " << p.string() << "\n";
  }
  TrainingData data = load_training_data(corpus, c.spectral, c.corpus.max_utts);
  if (data.train.empty()) throw InvalidInput("corpus has no training utterances");
  return data;
}

int cmd_train(const ConfigOptions& o) {
  const RunConfig c = run_config_from_json(resolve_document(o));
  const TrainingData data = load_data(c);
  const TrainResult r = run_training(c, data);
  std::cout << "finished " << r.state.step << " steps";
  if (!r.state.history.empty()) std::cout << ", best validation " << r.state.best_val;
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EnhanceOptions {
  std::string checkpoint;
  std::string input;
  std::string output;
  int steps = 5;
  std::uint64_t seed = 0;
  bool resample_input = false;
  std::string scheme = "euler";
};

int cmd_enhance(const EnhanceOptions& o) {
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const auto net = ckpt.inference_net();
  SamplerConfig sampler;
  sampler.n_steps = o.steps;
  sampler.scheme = parse_sampler_scheme(o.scheme);
  try {
    sampler.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("--steps: ") + e.what());
  }

  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(o.input)) {
    fs::create_directories(o.output);
    for (const auto& e : fs::directory_iterator(o.input)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") {
        jobs.emplace_back(e.path(), fs::path(o.output) / e.path().filename());
      }
    }
    std::sort(jobs.begin(), jobs.end());
  } else {
    if (!fs::exists(o.input)) throw IoError("input not found: " + o.input);
    const fs::path out(o.output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    jobs.emplace_back(o.input, out);
  }

  for (const auto& [in, out] : jobs) {
    const auto start = std::chrono::steady_clock::now();
    Waveform noisy = read_wav(in);
    if (noisy.sample_rate != 16000) {
      if (!o.resample_input) {
        throw InvalidInput(in.string() + " is " + std::to_string(noisy.sample_rate) +
                           " Hz; pass --resample to convert to 16000 Hz");
      }
      noisy = resample(noisy, 16000);
    }
    Rng rng(utterance_seed(in.stem().string(), o.seed));
    const Waveform clean = enhance_waveform(*net, ckpt.objective, noisy, ckpt.spectral, ckpt.path,
                                            ckpt.precond, sampler, rng);
    write_wav(out, clean);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << in.filename().string() << " -> " << out.string() << "  " << std::fixed
              << std::setprecision(3) << secs << " s\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::string checkpoint;
  std::string corpus;
  std::string layout;
  std::string split = "test";
  std::string label;
  std::string output;
  int steps = 5;
  std::uint64_t seed = 0;
  int max_utts = 0;
  ConfigOptions config;
};

CorpusManifest limited(CorpusManifest m, int max_utts) {
  if (max_utts > 0 && static_cast<int>(m.pairs.size()) > max_utts) m.pairs.resize(max_utts);
  return m;
}

void emit_report(const MetricsReport& r, const std::string& output) {
  std::vector<MetricsReport> one{r};
  std::cout << compare_runs(one).to_text();
  if (!r.failures.empty()) std::cout << r.failures.size() << " metric failure(s)\n";
  if (!output.empty()) {
    write_json(output, to_json(r));
    std::cout << "report written to " << output << "\n";
  }
}

int cmd_evaluate(const EvaluateOptions& o) {
  const RunConfig c = run_config_from_json(resolve_document(o.config));
  const std::string root = o.corpus.empty() ? c.corpus.root : o.corpus;
  if (root.empty()) throw ConfigError("no corpus: pass --corpus or set corpus.root");
  if (!fs::is_directory(root)) throw ConfigError("corpus directory '" + root + "' does not exist");
  const Corpus corpus =
      scan_corpus(root, o.layout.empty() ? c.corpus.layout : parse_layout(o.layout));
  const CorpusManifest manifest = limited(corpus.manifest(parse_split(o.split)), o.max_utts);
  if (manifest.pairs.empty()) throw InvalidInput("split '" + o.split + "' is empty");
  const MetricSet metrics = metrics_for(c);

  MetricsReport report;
  if (o.checkpoint.empty()) {
    const Enhancer identity = [](const Waveform& w, std::uint64_t) { return w; };
    report = evaluate(manifest, identity, metrics, o.seed, o.label.empty() ? "noisy" : o.label);
  } else {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const auto net = ckpt.inference_net();
    SamplerConfig sampler = c.sampler;
    sampler.n_steps = o.steps;
    const Enhancer enh =
        model_enhancer(*net, ckpt.objective, ckpt.spectral, ckpt.path, ckpt.precond, sampler);
    report = evaluate(manifest, enh, metrics, o.seed,
                      o.label.empty() ? to_string(ckpt.objective) : o.label);
  }
  emit_report(report, o.output);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_compare(const std::vector<std::string>& files, const std::string& output) {
  std::vector<MetricsReport> reports;
  for (const auto& f : files) {
    try {
      reports.push_back(report_from_json(load_json_file(f)));
    } catch (const ConfigError& e) {
      throw IoError(e.what());
    }
  }
  const ComparisonTable t = compare_runs(reports);
  std::cout << t.to_text();
  if (!output.empty()) write_json(output, t.to_json());
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepOptions {
  ConfigOptions config;
  std::vector<std::string> objectives{"velocity", "x1", "x1-edm"};
  std::vector<std::string> grid{"0:0"};
  std::optional<double> threshold;
  std::string split = "val";
  int eval_utts = 0;
};

std::vector<std::pair<double, double>> parse_grid(const std::vector<std::string>& cells) {
  std::vector<std::pair<double, double>> out;
  for (const auto& cell : cells) {
    if (cell == "table2") {
      out.insert(out.end(), {{5e-2, 5e-3}, {1e-3, 1e-4}, {1e-6, 1e-7}});
      continue;
    }
    const auto colon = cell.find(':');
    if (colon == std::string::npos) throw ConfigError("--grid cell '" + cell + "' is not alpha_p:alpha_s");
    try {
      const double ap = std::stod(cell.substr(0, colon));
      const double as = std::stod(cell.substr(colon + 1));
      if (!(ap >= 0.0) || !(as >= 0.0)) throw std::invalid_argument("negative");
      out.emplace_back(ap, as);
    } catch (const std::logic_error&) {
      throw ConfigError("--grid cell '" + cell + "' is not a pair of non-negative numbers");
    }
  }
  return out;
}

std::string format_alpha(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int cmd_sweep(const SweepOptions& o) {
  if (o.objectives.empty()) throw ConfigError("--objectives: at least one objective is required");
  std::vector<ObjectiveKind> kinds;
  for (const auto& name : o.objectives) kinds.push_back(parse_objective(name));
  const auto grid = parse_grid(o.grid);
  if (grid.empty()) throw ConfigError("--grid: at least one cell is required");

  const json base_doc = resolve_document(o.config);
  const RunConfig base = run_config_from_json(base_doc);
  const TrainingData data = load_data(base);
  const Corpus corpus = scan_corpus(base.corpus.root, base.corpus.layout);
  const CorpusManifest manifest = limited(corpus.manifest(parse_split(o.split)), o.eval_utts);
  if (manifest.pairs.empty()) throw InvalidInput("evaluation split '" + o.split + "' is empty");

  const fs::path sweep_dir = make_run_dir(base, "-sweep");
  write_json(sweep_dir / "config.json", to_json(base));

  struct Cell {
    std::string label;
    ObjectiveKind kind;
    std::vector<std::pair<int, double>> history;
  };
  std::vector<Cell> cells;
  std::vector<MetricsReport> reports;
  json failures = json::array();
  for (ObjectiveKind kind : kinds) {
    for (const auto& [ap, as] : grid) {
      json doc = base_doc;
      doc["train"]["objective"] = to_string(kind);
      doc["train"]["alpha_p"] = ap;
      doc["train"]["alpha_s"] = as;
      doc["output_dir"] = sweep_dir.string();
      const std::string label = to_string(kind) + " a_p=" + format_alpha(ap) + " a_s=" + format_alpha(as);
      std::cout << "== " << label << "\n";
      try {
        const RunConfig c = run_config_from_json(doc);
        const TrainResult r = run_training(c, data, "-" + to_string(kind));
        const Checkpoint ckpt = load_checkpoint(r.run_dir / "last.ckpt");
        const auto net = ckpt.inference_net();
        const MetricSet metrics = metrics_for(c);
        const Enhancer enh =
            model_enhancer(*net, ckpt.objective, ckpt.spectral, ckpt.path, ckpt.precond, c.sampler);
        MetricsReport rep = evaluate(manifest, enh, metrics, c.train.seed, label);
        write_json(r.run_dir / "report.json", to_json(rep));
        reports.push_back(std::move(rep));
        cells.push_back({label, kind, r.state.history});
      } catch (const std::exception& e) {
        std::cerr << "cell '" << label << "' failed: " << e.what() << "\n";
        failures.push_back({{"cell", label}, {"error", e.what()}});
      }
    }
  }

  json summary = {{"failures", failures}};
  if (!reports.empty()) {
    const ComparisonTable table = compare_runs(reports);
    std::cout << "\n" << table.to_text();
    write_text(sweep_dir / "comparison.txt", table.to_text());
    summary["comparison"] = table.to_json();
  }

  // Steps to a shared validation threshold; default is the midpoint of the
  // range of all validation values seen in the sweep.
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& c : cells) {
    for (const auto& [step, v] : c.history) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  json steps = json::array();
  if (std::isfinite(lo)) {
    const double threshold = o.threshold.value_or(0.5 * (lo + hi));
    std::cout << "\nsteps to validation threshold " << threshold << ":\n";
    for (const auto& c : cells) {
      std::optional<int> s;
      if (!c.history.empty()) s = steps_to_threshold(c.history, threshold);
      std::cout << "  " << std::left << std::setw(40) << c.label << " "
                << (s ? std::to_string(*s) : std::string("not reached")) << "\n";
      steps.push_back({{"cell", c.label}, {"steps", s ? json(*s) : json(nullptr)}});
    }
    summary["threshold"] = threshold;
  }
  summary["steps_to_threshold"] = steps;
  write_json(sweep_dir / "summary.json", summary);
  std::cout << "sweep written to " << sweep_dir.string() << "\n";
  return failures.empty() ? 0 : kExitRuntime;
}

// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string render_svg(const std::vector<PlotSeries>& series, const std::string& ylabel) {
  const double width = 720, height = 440, left = 70, right = 200, top = 30, bottom = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = width - left - right, ph = height - top - bottom;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
       << std::setprecision(0) << xv << std::setprecision(2) << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << yv
       << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << sy(yv) << "\" x2=\"" << left + pw << "\" y2=\""
       << sy(yv) << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10
     << "\" text-anchor=\"middle\">training step</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">" << svg_escape(ylabel) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[i].points) os << sx(x) << "," << sy(y) << " ";
    os << "\"/>\n";
    const double ly = top + 16 + 18.0 * i;
    os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 32
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly << "\">" << svg_escape(series[i].label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

int cmd_plot(const std::vector<std::string>& logs, const std::vector<std::string>& labels,
             const std::string& prefix, const std::string& key) {
  std::vector<PlotSeries> series;
  int malformed = 0;
  int rows = 0;
  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "run,step," << key << "\n";
  for (std::size_t i = 0; i < logs.size(); ++i) {
    std::ifstream is(logs[i]);
    if (!is) throw IoError("cannot read log " + logs[i]);
    PlotSeries s;
    s.label = i < labels.size() ? labels[i] : fs::path(logs[i]).parent_path().filename().string();
    if (s.label.empty()) s.label = fs::path(logs[i]).stem().string();
    int lineno = 0;
    for (std::string line; std::getline(is, line);) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("step") || !j["step"].is_number()) {
        std::cerr << "warning: " << logs[i] << ":" << lineno << ": malformed line skipped\n";
        ++malformed;
        continue;
      }
      if (!j.contains(key)) continue;
      if (!j[key].is_number()) {
        std::cerr << "warning: " << logs[i] << ":" << lineno << ": non-numeric '" << key
                  << "' skipped\n";
        ++malformed;
        continue;
      }
      const double step = j["step"].get<double>();
      const double value = j[key].get<double>();
      s.points.emplace_back(step, value);
      csv << '"' << s.label << "\"," << step << "," << value << "\n";
      ++rows;
    }
    series.push_back(std::move(s));
  }
  const fs::path base(prefix);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  write_text(base.string() + ".csv", csv.str());
  write_text(base.string() + ".svg", render_svg(series, key));
  std::cout << rows << " validation events from " << logs.size() << " log(s) -> " << base.string()
            << ".csv, " << base.string() << ".svg\n";
  if (malformed > 0) std::cout << malformed << " malformed line(s) skipped\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_synth(const fs::path& out, const SynthOptions& o) {
  const auto made = synth_corpus(out, o);
  std::cout << "wrote " << made.size() << " pairs under " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Flow-matching speech enhancement"};
  app.require_subcommand(1);

  ConfigOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_config_options(train_cmd, train_opts);
  train_cmd->add_option("--objective", train_opts.objective, "velocity | x1 | x1-edm");

  EnhanceOptions enh;
  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance a WAV file or a directory of WAVs");
  enhance_cmd->add_option("--checkpoint", enh.checkpoint, "Checkpoint file")->required();
  enhance_cmd->add_option("input", enh.input, "Input WAV or directory")->required();
  enhance_cmd->add_option("output", enh.output, "Output WAV or directory")->required();
  enhance_cmd->add_option("--steps", enh.steps, "Sampling steps")->capture_default_str();
  enhance_cmd->add_option("--seed", enh.seed, "Base seed")->capture_default_str();
  enhance_cmd->add_option("--scheme", enh.scheme, "euler | midpoint")->capture_default_str();
  enhance_cmd->add_flag("--resample", enh.resample_input, "Resample non-16 kHz input");

  EvaluateOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint (or the noisy input) on a corpus split");
  add_config_options(eval_cmd, ev.config);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint; omit to score the noisy input");
  eval_cmd->add_option("--corpus", ev.corpus, "Corpus root (default: corpus.root)");
  eval_cmd->add_option("--layout", ev.layout, "voicebank | paired-dirs (default: corpus.layout)");
  eval_cmd->add_option("--split", ev.split, "train | val | test")->capture_default_str();
  eval_cmd->add_option("--label", ev.label, "Report label");
  eval_cmd->add_option("--report", ev.output, "Write the JSON report here");
  eval_cmd->add_option("--steps", ev.steps, "Sampling steps")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "Base seed")->capture_default_str();
  eval_cmd->add_option("--max-utts", ev.max_utts, "Limit utterances (0 = all)");

  std::vector<std::string> compare_files;
  std::string compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "Side-by-side table of evaluation reports");
  compare_cmd->add_option("reports", compare_files, "Report JSON files")->required();
  compare_cmd->add_option("--json", compare_out, "Write the table as JSON");

  SweepOptions sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate objectives x loss-weight grid");
  add_config_options(sweep_cmd, sw.config);
  sweep_cmd->add_option("--objectives", sw.objectives, "Objectives to train")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--grid", sw.grid,
                        "alpha_p:alpha_s cells, comma separated; 'table2' adds "
                        "5e-2:5e-3,1e-3:1e-4,1e-6:1e-7")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--threshold", sw.threshold, "Validation threshold for steps-to-threshold");
  sweep_cmd->add_option("--split", sw.split, "Split used for evaluation")->capture_default_str();
  sweep_cmd->add_option("--eval-utts", sw.eval_utts, "Limit evaluation utterances (0 = all)");

  std::vector<std::string> plot_logs, plot_labels;
  std::string plot_out = "curves";
  std::string plot_key = "val_metric";
  auto* plot_cmd = app.add_subcommand("plot", "Validation curves (CSV + SVG) from training logs");
  plot_cmd->add_option("logs", plot_logs, "train_log.jsonl files")->required();
  plot_cmd->add_option("--label", plot_labels, "Curve labels, in log order");
  plot_cmd->add_option("-o,--output", plot_out, "Output prefix")->capture_default_str();
  plot_cmd->add_option("--key", plot_key, "Log field to plot")->capture_default_str();

  std::string synth_out;
  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic paired corpus");
  synth_cmd->add_option("output", synth_out, "Corpus root")->required();
  synth_cmd->add_option("--n-utts", synth.n_utts)->capture_default_str();
  synth_cmd->add_option("--n-val", synth.n_val, "Utterances for the validation speakers")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--duration", synth.duration_s, "Seconds per utterance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*enhance_cmd) return cmd_enhance(enh);
    if (*eval_cmd) return cmd_evaluate(ev);
    if (*compare_cmd) return cmd_compare(compare_files, compare_out);
    if (*sweep_cmd) return cmd_sweep(sw);
    if (*plot_cmd) return cmd_plot(plot_logs, plot_labels, plot_out, plot_key);
    if (*synth_cmd) return cmd_synth(synth_out, synth);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
