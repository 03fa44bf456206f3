#include "fmse/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "fmse/wav.hpp"

namespace fmse {

namespace fs = std::filesystem;

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

std::string to_string(CorpusLayout layout) {
  return layout == CorpusLayout::VoiceBank ? "voicebank" : "paired-dirs";
}

CorpusLayout parse_layout(std::string_view text) {
  if (text == "voicebank") return CorpusLayout::VoiceBank;
  if (text == "paired-dirs") return CorpusLayout::PairedDirs;
  throw ConfigError("unknown corpus layout '" + std::string(text) + "'");
}

const CorpusManifest& Corpus::manifest(Split split) const {
  switch (split) {
    case Split::Train: return train;
    case Split::Val: return val;
    case Split::Test: return test;
  }
  return train;
}

namespace {

std::map<std::string, fs::path> wav_files(const fs::path& dir) {
  std::map<std::string, fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") {
      files.emplace(e.path().stem().string(), e.path());
    }
  }
  return files;
}

std::string speaker_of(const std::string& utt) {
  const auto pos = utt.find('_');
  return pos == std::string::npos ? utt : utt.substr(0, pos);
}

void pair_dirs(const fs::path& clean_dir, const fs::path& noisy_dir,
               std::vector<CorpusEntry>& out, std::vector<fs::path>& unmatched) {
  const auto clean = wav_files(clean_dir);
  const auto noisy = wav_files(noisy_dir);
  for (const auto& [id, path] : clean) {
    auto it = noisy.find(id);
    if (it == noisy.end()) {
      unmatched.push_back(path);
      continue;
    }
    out.push_back({path, it->second, speaker_of(id), id});
  }
  for (const auto& [id, path] : noisy) {
    if (!clean.contains(id)) unmatched.push_back(path);
  }
}

fs::path find_prefixed(const fs::path& root, const std::string& prefix) {
  if (!fs::is_directory(root)) return {};
  std::vector<fs::path> hits;
  for (const auto& e : fs::directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && name.rfind(prefix, 0) == 0) hits.push_back(e.path());
  }
  std::sort(hits.begin(), hits.end());
  return hits.empty() ? fs::path{} : hits.front();
}

void sort_manifest(CorpusManifest& m) {
  std::sort(m.pairs.begin(), m.pairs.end(), [](const CorpusEntry& a, const CorpusEntry& b) {
    return a.utterance_id < b.utterance_id;
  });
}

double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

}  // namespace

Corpus scan_corpus(const fs::path& root, CorpusLayout layout) {
  if (!fs::is_directory(root)) throw IoError("corpus root does not exist: " + root.string());
  Corpus corpus;
  if (layout == CorpusLayout::PairedDirs) {
    if (!fs::is_directory(root / "clean") || !fs::is_directory(root / "noisy")) {
      throw IoError("paired-dirs corpus needs clean/ and noisy/ under " + root.string());
    }
    pair_dirs(root / "clean", root / "noisy", corpus.test.pairs, corpus.unmatched);
  } else {
    fs::path train_clean, train_noisy, test_clean, test_noisy;
    if (fs::is_directory(root / "train" / "clean")) {
      train_clean = root / "train" / "clean";
      train_noisy = root / "train" / "noisy";
      test_clean = root / "test" / "clean";
      test_noisy = root / "test" / "noisy";
    } else {
      train_clean = find_prefixed(root, "clean_trainset");
      train_noisy = find_prefixed(root, "noisy_trainset");
      test_clean = find_prefixed(root, "clean_testset");
      test_noisy = find_prefixed(root, "noisy_testset");
    }
    if (train_clean.empty() && test_clean.empty()) {
      throw IoError("no VoiceBank-style directories under " + root.string() + " (corpus is empty)");
    }
    std::vector<CorpusEntry> train;
    if (!train_clean.empty()) pair_dirs(train_clean, train_noisy, train, corpus.unmatched);
    if (!test_clean.empty()) pair_dirs(test_clean, test_noisy, corpus.test.pairs, corpus.unmatched);
    const std::set<std::string> held_out(kValidationSpeakers.begin(), kValidationSpeakers.end());
    for (auto& e : train) {
      (held_out.contains(e.speaker_id) ? corpus.val.pairs : corpus.train.pairs).push_back(e);
    }
  }
  sort_manifest(corpus.train);
  sort_manifest(corpus.val);
  sort_manifest(corpus.test);
  std::sort(corpus.unmatched.begin(), corpus.unmatched.end());
  if (corpus.train.pairs.empty() && corpus.val.pairs.empty() && corpus.test.pairs.empty()) {
    throw IoError("corpus is empty: no matched clean/noisy pairs under " + root.string());
  }
  return corpus;
}

Waveform resample(const Waveform& in, int target_rate) {
  if (target_rate <= 0 || in.sample_rate <= 0) throw InvalidInput("sample rates must be positive");
  if (in.sample_rate == target_rate) return in;
  const long g = std::gcd(in.sample_rate, target_rate);
  const long up = target_rate / g;
  const long down = in.sample_rate / g;
  const double cutoff = 0.95 * std::min(1.0, static_cast<double>(up) / down);
  constexpr double kBeta = 8.6;
  constexpr double kZeros = 16.0;
  const double half_width = kZeros / cutoff;  // in input samples
  const double i0_beta = bessel_i0(kBeta);

  const std::size_t n_in = in.samples.size();
  const auto n_out = static_cast<std::size_t>((n_in * up + down - 1) / down);

  // One kernel per phase: output m sits at input time m * down / up, whose
  // fractional part is ((m * down) mod up) / up.
  const long first_tap = -static_cast<long>(std::floor(half_width));
  const long taps = 2 * static_cast<long>(std::floor(half_width)) + 2;
  std::vector<std::vector<double>> table(up, std::vector<double>(taps));
  for (long phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / up;
    for (long j = 0; j < taps; ++j) {
      const double x = static_cast<double>(first_tap + j) - frac;
      double v = 0.0;
      if (std::abs(x) <= half_width) {
        const double arg = std::numbers::pi * cutoff * x;
        const double sinc = x == 0.0 ? 1.0 : std::sin(arg) / arg;
        const double r = x / half_width;
        const double win = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
        v = cutoff * sinc * win;
      }
      table[phase][j] = v;
    }
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t m = 0; m < n_out; ++m) {
    const long num = static_cast<long>(m) * down;
    const long base = num / up;
    const std::vector<double>& h = table[num % up];
    double acc = 0.0;
    for (long j = 0; j < taps; ++j) {
      const long k = base + first_tap + j;
      if (k >= 0 && k < static_cast<long>(n_in)) acc += in.samples[k] * h[j];
    }
    out.samples[m] = acc;
  }
  return out;
}

std::pair<Waveform, Waveform> load_pair(const CorpusEntry& entry, int target_rate) {
  Waveform clean = resample(read_wav(entry.clean_path), target_rate);
  Waveform noisy = resample(read_wav(entry.noisy_path), target_rate);
  if (clean.size() != noisy.size()) {
    const std::size_t n = std::min(clean.size(), noisy.size());
    std::cerr << "load_pair: " << entry.utterance_id << " length mismatch (" << clean.size()
              << " clean vs " << noisy.size() << " noisy), truncating to " << n << "\n";
    clean.samples.resize(n);
    noisy.samples.resize(n);
  }
  return {std::move(clean), std::move(noisy)};
}

double snr_db(std::span<const double> clean, std::span<const double> noisy) {
  if (clean.size() != noisy.size()) throw InvalidInput("snr_db: length mismatch");
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ps += clean[i] * clean[i];
    const double d = noisy[i] - clean[i];
    pn += d * d;
  }
  return 10.0 * std::log10(ps / pn);
}

std::vector<SynthUtterance> synth_corpus(const fs::path& root, const SynthOptions& o) {
  if (o.n_utts < 1) throw InvalidInput("synth_corpus: n_utts must be >= 1");
  if (o.n_val < 0 || o.n_val > o.n_utts) throw InvalidInput("synth_corpus: bad n_val");
  if (!(o.duration_s > 0.0)) throw InvalidInput("synth_corpus: duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(o.duration_s * o.sample_rate));
  Rng rng(o.seed);
  std::vector<SynthUtterance> made;
  for (int u = 0; u < o.n_utts; ++u) {
    char id[32];
    if (u < o.n_val) {
      std::snprintf(id, sizeof id, "%s_%03d", kValidationSpeakers[u % 2].c_str(), u);
    } else {
      std::snprintf(id, sizeof id, "p9%02d_%03d", u % 10, u);
    }

    const double f0 = rng.uniform(100.0, 300.0);
    const int harmonics = 2 + static_cast<int>(rng.next_u64() % 3);
    std::vector<double> amp(harmonics), phase(harmonics);
    for (int h = 0; h < harmonics; ++h) {
      amp[h] = rng.uniform(0.3, 1.0) / (h + 1);
      phase[h] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    const double env_rate = rng.uniform(0.5, 2.0);
    const double env_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> clean(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / o.sample_rate;
      double v = 0.0;
      for (int h = 0; h < harmonics; ++h) {
        v += amp[h] * std::sin(2.0 * std::numbers::pi * f0 * (h + 1) * t + phase[h]);
      }
      v *= 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * env_rate * t + env_phase);
      clean[i] = v;
      peak = std::max(peak, std::abs(v));
    }
    for (double& v : clean) v *= 0.5 / peak;

    const double snr = rng.uniform(o.snr_min_db, o.snr_max_db);
    const double pole = rng.uniform(0.3, 0.9);
    std::vector<double> noise(n);
    double state = 0.0;
    for (double& v : noise) {
      state = pole * state + rng.normal();
      v = state;
    }
    double pc = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pc += clean[i] * clean[i];
      pn += noise[i] * noise[i];
    }
    const double gain = std::sqrt(pc / (pn * std::pow(10.0, snr / 10.0)));
    Waveform cw{clean, o.sample_rate};
    Waveform nw{clean, o.sample_rate};
    for (std::size_t i = 0; i < n; ++i) nw.samples[i] += gain * noise[i];

    write_wav(root / "train" / "clean" / (std::string(id) + ".wav"), cw);
    write_wav(root / "train" / "noisy" / (std::string(id) + ".wav"), nw);
    made.push_back({id, snr});
  }
  return made;
}

nlohmann::json to_json(const CorpusManifest& m) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& e : m.pairs) {
    pairs.push_back({{"clean", e.clean_path.string()},
                     {"noisy", e.noisy_path.string()},
                     {"speaker", e.speaker_id},
                     {"utterance", e.utterance_id}});
  }
  return {{"split", to_string(m.split)}, {"pairs", pairs}};
}

CorpusManifest manifest_from_json(const nlohmann::json& j) {
  CorpusManifest m;
  m.split = parse_split(j.at("split").get<std::string>());
  for (const auto& p : j.at("pairs")) {
    m.pairs.push_back({p.at("clean").get<std::string>(), p.at("noisy").get<std::string>(),
                       p.at("speaker").get<std::string>(), p.at("utterance").get<std::string>()});
  }
  return m;
}

}  // namespace fmse
