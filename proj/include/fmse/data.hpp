#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmse/spectral.hpp"

namespace fmse {

enum class Split { Train, Val, Test };
enum class CorpusLayout { VoiceBank, PairedDirs };

std::string to_string(Split split);
Split parse_split(std::string_view text);
std::string to_string(CorpusLayout layout);
CorpusLayout parse_layout(std::string_view text);

struct CorpusEntry {
  std::filesystem::path clean_path;
  std::filesystem::path noisy_path;
  std::string speaker_id;
  std::string utterance_id;

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

struct CorpusManifest {
  Split split = Split::Train;
  std::vector<CorpusEntry> pairs;
};

/// Result of scanning a corpus directory: one manifest per split plus the
/// files that had no counterpart.
struct Corpus {
  CorpusManifest train{Split::Train, {}};
  CorpusManifest val{Split::Val, {}};
  CorpusManifest test{Split::Test, {}};
  std::vector<std::filesystem::path> unmatched;

  const CorpusManifest& manifest(Split split) const;
};

/// Speakers held out of training for validation under the VoiceBank layout.
inline const std::vector<std::string> kValidationSpeakers = {"p226", "p287"};

/// Layouts:
///  voicebank  - root/{train,test}/{clean,noisy}/<speaker>_<utt>.wav, or the
///               original clean_trainset*_wav / noisy_trainset*_wav /
///               clean_testset*_wav / noisy_testset*_wav directories.
///               Speakers p226 and p287 move from train to val.
///  paired-dirs - root/{clean,noisy}/*.wav, everything in the test split.
/// Manifests are sorted by utterance id. Throws IoError when the corpus is
/// empty or the expected directories are missing.
Corpus scan_corpus(const std::filesystem::path& root, CorpusLayout layout);

/// Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel
/// (beta 8.6, 16 zero crossings at the lower Nyquist rate, cutoff at 95%
/// of it). Equal rates pass through unchanged.
Waveform resample(const Waveform& in, int target_rate);

/// Reads, resamples and length-matches one pair (truncating to the shorter
/// signal; the truncation is logged to stderr). No level normalization.
std::pair<Waveform, Waveform> load_pair(const CorpusEntry& entry, int target_rate = 16000);

struct SynthOptions {
  int n_utts = 10;
  std::uint64_t seed = 0;
  double duration_s = 2.0;
  /// Utterances assigned to the validation speakers (p226 / p287). The rest
  /// get training speaker ids.
  int n_val = 0;
  int sample_rate = 16000;
  double snr_min_db = 0.0;
  double snr_max_db = 10.0;
};

struct SynthUtterance {
  std::string utterance_id;
  double target_snr_db = 0.0;
};

/// Writes a harmonic-tone corpus in the voicebank layout under `root`:
/// clean = 2-4 harmonics of f0 in [100, 300] Hz under a slow envelope,
/// noisy = clean + low-pass coloured Gaussian noise scaled to an SNR drawn
/// uniformly from [snr_min_db, snr_max_db]. Files are 32-bit float WAV and
/// depend only on the options.
std::vector<SynthUtterance> synth_corpus(const std::filesystem::path& root,
                                         const SynthOptions& options);

double snr_db(std::span<const double> clean, std::span<const double> noisy);

nlohmann::json to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const nlohmann::json& j);

}  // namespace fmse
