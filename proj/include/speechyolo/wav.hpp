#pragma once

#include <filesystem>
#include <vector>

namespace speechyolo {

using Waveform = std::vector<float>;

struct WavData {
  int sample_rate = 0;
  Waveform samples;  // mono, nominal range [-1, 1]
};

enum class WavEncoding { kPcm16, kFloat32 };

// Reads a mono RIFF/WAVE file, 16-bit PCM or 32-bit IEEE float.
// Multi-channel and other sample formats raise FormatError.
WavData read_wav(const std::filesystem::path& path);

// Writes atomically (temp file + rename). PCM16 output is clamped to
// [-1, 1] before quantization.
void write_wav(const std::filesystem::path& path, const WavData& wav,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace speechyolo
