#include "speechyolo/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "speechyolo/error.hpp"
#include "speechyolo/io_util.hpp"

namespace speechyolo {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

namespace {

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  out.append(bytes, sizeof(T));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open WAV file " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) {
    throw FormatError(path.string() + ": " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }

  int format = 0, channels = 0, bits = 0;
  WavData wav;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    std::string id(buf.data() + pos, 4);
    auto size = read_le<std::uint32_t>(buf, pos + 4);
    std::size_t body = pos + 8;
    if (body + size > buf.size()) fail("truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) fail("short fmt chunk");
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      wav.sample_rate = static_cast<int>(read_le<std::uint32_t>(buf, body + 4));
      bits = read_le<std::uint16_t>(buf, body + 14);
      // WAVE_FORMAT_EXTENSIBLE: the subformat tag lives at offset 24.
      if (format == 0xFFFE && size >= 26) {
        format = read_le<std::uint16_t>(buf, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail("data chunk before fmt chunk");
      if (channels != 1) fail("only mono audio is supported");
      if (format == 1 && bits == 16) {
        std::size_t n = size / 2;
        wav.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          wav.samples[i] = read_le<std::int16_t>(buf, body + 2 * i) / 32768.0f;
        }
      } else if (format == 3 && bits == 32) {
        std::size_t n = size / 4;
        wav.samples.resize(n);
        std::memcpy(wav.samples.data(), buf.data() + body, n * 4);
      } else {
        fail("unsupported sample format (need 16-bit PCM or 32-bit float)");
      }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  fail("no data chunk");
  return wav;
}

void write_wav(const std::filesystem::path& path, const WavData& wav,
               WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(wav.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  append_le<std::uint32_t>(out, 36 + data_bytes);
  out.append("WAVEfmt ");
  append_le<std::uint32_t>(out, 16);
  append_le<std::uint16_t>(out, pcm ? 1 : 3);
  append_le<std::uint16_t>(out, 1);
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(wav.sample_rate));
  append_le<std::uint32_t>(out,
                           static_cast<std::uint32_t>(wav.sample_rate) * bits / 8);
  append_le<std::uint16_t>(out, bits / 8);
  append_le<std::uint16_t>(out, bits);
  out.append("data");
  append_le<std::uint32_t>(out, data_bytes);
  for (float s : wav.samples) {
    if (pcm) {
      float c = std::clamp(s, -1.0f, 1.0f);
      append_le<std::int16_t>(
          out, static_cast<std::int16_t>(std::lround(std::min(c * 32768.0f, 32767.0f))));
    } else {
      append_le<float>(out, s);
    }
  }
  write_file_atomic(path, out);
}

}  // namespace speechyolo
