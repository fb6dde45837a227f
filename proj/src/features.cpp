#include "speechyolo/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "speechyolo/error.hpp"

namespace speechyolo {

namespace {

// FFTW's planner is not reentrant; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

struct PlanDeleter {
  void operator()(fftw_plan p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace

int FeatureConfig::window_samples() const {
  return static_cast<int>(std::lround(window_len * sample_rate));
}

int FeatureConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_len * sample_rate));
}

int FeatureConfig::clip_samples() const {
  return static_cast<int>(std::lround(clip_duration * sample_rate));
}

int FeatureConfig::num_frames() const {
  return 1 + (clip_samples() - window_samples()) / hop_samples();
}

void FeatureConfig::validate() const {
  if (sample_rate <= 0) throw InvalidInput("sample_rate must be positive");
  if (!(hop_len > 0) || !(window_len >= hop_len)) {
    throw InvalidInput("feature config requires window_len >= hop_len > 0");
  }
  if (hop_samples() < 1) throw InvalidInput("hop shorter than one sample");
  if (fft_size < window_samples()) {
    throw InvalidInput("fft_size must cover the analysis window");
  }
  if (!(clip_duration > 0)) throw InvalidInput("clip_duration must be positive");
  if (clip_samples() < window_samples()) {
    throw InvalidInput("clip_duration shorter than one analysis window");
  }
}

Waveform fit_duration(const Waveform& waveform, const FeatureConfig& cfg) {
  if (waveform.empty()) throw InvalidInput("fit_duration: empty waveform");
  Waveform out(waveform.begin(),
               waveform.begin() + std::min<std::size_t>(waveform.size(),
                                                        cfg.clip_samples()));
  out.resize(cfg.clip_samples(), 0.0f);
  return out;
}

FeatureMatrix stft_features(const Waveform& waveform, const FeatureConfig& cfg) {
  cfg.validate();
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  const int n = cfg.fft_size;
  if (static_cast<int>(waveform.size()) < win) {
    throw InvalidInput("stft_features: waveform shorter than one window");
  }
  const int frames = 1 + (static_cast<int>(waveform.size()) - win) / hop;
  const int bins = cfg.num_bins();

  // Periodic Hann, the usual choice for spectral analysis.
  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);
  }

  std::unique_ptr<double, FftwFree> in(
      static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE));
  }

  FeatureMatrix features(bins, frames);
  for (int f = 0; f < frames; ++f) {
    const float* frame = waveform.data() + static_cast<std::size_t>(f) * hop;
    for (int i = 0; i < win; ++i) in.get()[i] = frame[i] * window[i];
    for (int i = win; i < n; ++i) in.get()[i] = 0.0;
    fftw_execute(plan.get());
    for (int b = 0; b < bins; ++b) {
      double mag = std::hypot(out.get()[b][0], out.get()[b][1]);
      features(b, f) = static_cast<float>(cfg.log_compress ? std::log1p(mag) : mag);
    }
  }
  return features;
}

FeatureMatrix clip_features(const Waveform& waveform, const FeatureConfig& cfg) {
  return stft_features(fit_duration(waveform, cfg), cfg);
}

FeatureMatrix normalize_features(const FeatureMatrix& features) {
  const double count = static_cast<double>(features.size());
  if (count == 0) return features;
  double mean = features.cast<double>().sum() / count;
  double var = (features.cast<double>().array() - mean).square().sum() / count;
  double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
  return ((features.cast<double>().array() - mean) * inv).cast<float>().matrix();
}

}  // namespace speechyolo
