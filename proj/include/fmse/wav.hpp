#pragma once

#include <filesystem>

#include "fmse/spectral.hpp"

namespace fmse {

enum class WavEncoding { Pcm16, Float32 };

/// Reads a mono RIFF/WAVE file (16-bit PCM or 32-bit IEEE float).
/// Multichannel files are rejected with InvalidInput; malformed or unreadable
/// files raise IoError naming the path.
Waveform read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::Float32);

}  // namespace fmse
