#include "speechyolo/corpus.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

#include "speechyolo/error.hpp"

namespace speechyolo {

namespace {

double rms(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return v.empty() ? 0.0 : std::sqrt(sum / v.size());
}

std::vector<double> unit_normal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  const double r = rms(v);
  if (r > 0) {
    for (auto& x : v) x /= r;
  }
  return v;
}

// RBJ band-pass biquad (constant peak gain).
struct BandPass {
  double b0, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  BandPass(double center, double q, int sample_rate) {
    const double w = 2.0 * std::numbers::pi * center / sample_rate;
    const double alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w) / a0;
    a2 = (1.0 - alpha) / a0;
  }
  double operator()(double x) {
    const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "babble") return NoiseKind::kBabble;
  if (name == "gaussian") return NoiseKind::kGaussian;
  if (name == "speckle") return NoiseKind::kSpeckle;
  throw InvalidInput("unknown noise kind '" + name + "' (expected babble, gaussian, speckle)");
}

std::string noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kBabble: return "babble";
    case NoiseKind::kGaussian: return "gaussian";
    case NoiseKind::kSpeckle: return "speckle";
  }
  return "unknown";
}

Waveform inject_noise(const Waveform& waveform, NoiseKind kind, double alpha,
                      std::uint64_t seed) {
  if (!(alpha >= 0)) throw InvalidInput("noise alpha must be non-negative");
  if (alpha == 0.0 || waveform.empty()) return waveform;
  std::mt19937_64 rng(seed);
  const std::size_t n = waveform.size();
  std::vector<double> noise;
  switch (kind) {
    case NoiseKind::kGaussian:
    case NoiseKind::kSpeckle:
      noise = unit_normal(n, rng);
      break;
    case NoiseKind::kBabble: {
      const Waveform& tex = babble_texture();
      const std::size_t start = std::uniform_int_distribution<std::size_t>(0, tex.size() - 1)(rng);
      noise.resize(n);
      for (std::size_t i = 0; i < n; ++i) noise[i] = tex[(start + i) % tex.size()];
      const double r = rms(noise);
      if (r > 0) {
        for (auto& x : noise) x /= r;
      }
      break;
    }
  }
  Waveform out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = waveform[i];
    const double added = kind == NoiseKind::kSpeckle ? x * noise[i] : noise[i];
    out[i] = static_cast<float>(x + alpha * added);
  }
  return out;
}

Waveform make_babble_texture(int sample_rate, double seconds, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(std::lround(seconds * sample_rate));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> white(0.0, 1.0);
  std::vector<double> mix(n, 0.0);
  constexpr int kVoices = 8;
  for (int v = 0; v < kVoices; ++v) {
    // Two formant-like resonances per voice and a syllable-rate envelope.
    BandPass f1(300.0 + 500.0 * unit(rng), 4.0, sample_rate);
    BandPass f2(1000.0 + 1500.0 * unit(rng), 6.0, sample_rate);
    const double rate = 3.0 + 3.0 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = white(rng);
      const double t = static_cast<double>(i) / sample_rate;
      const double env = std::pow(std::max(0.0, std::sin(2.0 * std::numbers::pi * rate * t + phase)), 2);
      mix[i] += env * (f1(w) + 0.6 * f2(w));
    }
  }
  const double r = rms(mix);
  Waveform out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(0.1 * mix[i] / r);
  return out;
}

const Waveform& babble_texture() {
  static std::once_flag once;
  static Waveform texture;
  std::call_once(once, [] {
    texture = read_wav(std::filesystem::path(SPEECHYOLO_DATA_DIR) / "babble_texture.wav").samples;
    if (texture.empty()) throw FormatError("babble texture is empty");
  });
  return texture;
}

}  // namespace speechyolo
