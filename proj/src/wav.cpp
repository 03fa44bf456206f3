#include "fmse/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fmse {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open WAV file: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  auto corrupt = [&](const std::string& why) {
    return IoError("corrupt WAV file " + path.string() + ": " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw corrupt("missing RIFF/WAVE header");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_pos = 0, data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto len = read_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (len < 16 || body + len > buf.size()) throw corrupt("short fmt chunk");
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible && len >= 26) format = read_le<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data_pos = body;
      data_len = std::min<std::size_t>(len, buf.size() - body);
      break;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw corrupt("no fmt chunk");
  if (data_pos == 0) throw corrupt("no data chunk");
  if (channels != 1) {
    throw InvalidInput(path.string() + ": " + std::to_string(channels) +
                       "-channel audio is not supported; provide mono WAV");
  }
  if (rate == 0) throw corrupt("zero sample rate");

  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_len / 2;
    wave.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      wave.samples[i] = read_le<std::int16_t>(buf, data_pos + 2 * i) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_len / 4;
    wave.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) wave.samples[i] = read_le<float>(buf, data_pos + 4 * i);
  } else {
    throw corrupt("unsupported encoding (format " + std::to_string(format) + ", " +
                  std::to_string(bits) + " bits)");
  }
  for (double s : wave.samples) {
    if (!std::isfinite(s)) throw corrupt("non-finite sample");
  }
  return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave, WavEncoding encoding) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write WAV file: " + path.string());
  const bool is_float = encoding == WavEncoding::Float32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint16_t block = bits / 8;
  const auto data_len = static_cast<std::uint32_t>(wave.samples.size() * block);

  os.write("RIFF", 4);
  put_le<std::uint32_t>(os, 36 + data_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_le<std::uint32_t>(os, 16);
  put_le<std::uint16_t>(os, is_float ? kFormatFloat : kFormatPcm);
  put_le<std::uint16_t>(os, 1);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(wave.sample_rate));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(wave.sample_rate) * block);
  put_le<std::uint16_t>(os, block);
  put_le<std::uint16_t>(os, bits);
  os.write("data", 4);
  put_le<std::uint32_t>(os, data_len);
  for (double s : wave.samples) {
    if (is_float) {
      put_le<float>(os, static_cast<float>(s));
    } else {
      const double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
      put_le<std::int16_t>(os, static_cast<std::int16_t>(std::lround(clipped * 32768.0)));
    }
  }
  if (!os) throw IoError("failed writing WAV file: " + path.string());
}

}  // namespace fmse
