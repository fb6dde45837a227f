#pragma once

#include <Eigen/Core>

#include "speechyolo/wav.hpp"

namespace speechyolo {

// Frequency bins along rows, frames along columns.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureConfig {
  int sample_rate = 16000;
  double window_len = 0.020;  // seconds
  double hop_len = 0.010;     // seconds
  int fft_size = 512;
  bool log_compress = true;   // log(1 + |X|)
  double clip_duration = 1.0; // seconds; equals GridConfig::duration

  int window_samples() const;
  int hop_samples() const;
  int clip_samples() const;
  int num_bins() const { return fft_size / 2 + 1; }
  int num_frames() const;  // frames produced for a clip of clip_duration

  // Throws InvalidInput when any invariant is violated.
  void validate() const;
};

// Zero-pads or truncates at the tail to exactly clip_samples().
Waveform fit_duration(const Waveform& waveform, const FeatureConfig& cfg);

// Hann-windowed STFT magnitudes, num_bins() x frames.
FeatureMatrix stft_features(const Waveform& waveform, const FeatureConfig& cfg);

// fit_duration followed by stft_features.
FeatureMatrix clip_features(const Waveform& waveform, const FeatureConfig& cfg);

// Per-utterance mean/variance normalization. Constant input maps to zeros.
FeatureMatrix normalize_features(const FeatureMatrix& features);

}  // namespace speechyolo
