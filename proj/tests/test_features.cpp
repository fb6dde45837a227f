#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "speechyolo/error.hpp"
#include "speechyolo/features.hpp"
#include "test_util.hpp"

using namespace speechyolo;

namespace {

// Frame count by walking window start positions one at a time.
int enumerate_frames(int length, int win, int hop) {
  int frames = 0;
  for (int start = 0; start + win <= length; start += hop) ++frames;
  return frames;
}

// Textbook DFT magnitude of one Hann-windowed frame, zero-padded to n.
std::vector<double> direct_dft(const Waveform& x, int offset, int win, int n) {
  std::vector<double> mags(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < win; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);
      acc += x[offset + i] * w * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
    }
    mags[k] = std::abs(acc);
  }
  return mags;
}

Waveform sine(double freq, int samples, int sr, double amp = 0.5) {
  Waveform w(samples);
  for (int i = 0; i < samples; ++i) {
    w[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * i / sr));
  }
  return w;
}

}  // namespace

TEST(FitDuration, IdentityPadAndTruncate) {
  FeatureConfig cfg;
  Waveform exact(16000);
  for (int i = 0; i < 16000; ++i) exact[i] = static_cast<float>(i % 7) * 0.1f;
  EXPECT_EQ(fit_duration(exact, cfg), exact);

  Waveform half(8000, 0.25f);
  Waveform padded = fit_duration(half, cfg);
  ASSERT_EQ(padded.size(), 16000u);
  for (int i = 0; i < 8000; ++i) EXPECT_EQ(padded[i], 0.25f);
  for (int i = 8000; i < 16000; ++i) EXPECT_EQ(padded[i], 0.0f);

  Waveform long_input(20000);
  for (int i = 0; i < 20000; ++i) long_input[i] = static_cast<float>(i);
  Waveform cut = fit_duration(long_input, cfg);
  ASSERT_EQ(cut.size(), 16000u);
  EXPECT_TRUE(std::equal(cut.begin(), cut.end(), long_input.begin()));
}

TEST(FitDuration, EmptyInputRejected) {
  EXPECT_THROW(fit_duration({}, FeatureConfig{}), InvalidInput);
}

TEST(Stft, ShapeMatchesEnumeration) {
  FeatureConfig cfg;
  FeatureMatrix m = stft_features(Waveform(16000, 0.0f), cfg);
  EXPECT_EQ(m.rows(), 257);
  EXPECT_EQ(m.cols(), enumerate_frames(16000, 320, 160));
  EXPECT_EQ(m.cols(), 99);
  EXPECT_EQ(cfg.num_frames(), 99);

  // Other lengths and hops agree with the enumeration too.
  oracle::Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    FeatureConfig c;
    c.sample_rate = 8000;
    c.window_len = 0.004 * gen.integer(2, 8);
    c.hop_len = 0.001 * gen.integer(1, 8);
    c.fft_size = 256;
    c.clip_duration = 0.05 * gen.integer(1, 6);
    if (c.hop_len > c.window_len) continue;
    const int len = gen.integer(c.window_samples(), 2000);
    FeatureMatrix f = stft_features(Waveform(len, 0.1f), c);
    EXPECT_EQ(f.cols(), enumerate_frames(len, c.window_samples(), c.hop_samples()));
    EXPECT_EQ(f.rows(), 129);
  }
}

TEST(Stft, ZeroInputGivesZeros) {
  FeatureMatrix m = stft_features(Waveform(16000, 0.0f), FeatureConfig{});
  EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Stft, MatchesDirectDft) {
  FeatureConfig cfg;
  cfg.log_compress = false;
  oracle::Gen gen(5);
  Waveform x(16000);
  for (auto& v : x) v = static_cast<float>(gen.uniform(-0.5, 0.5));
  FeatureMatrix m = stft_features(x, cfg);
  for (int frame : {0, 17, 98}) {
    auto ref = direct_dft(x, frame * 160, 320, 512);
    for (int k = 0; k < 257; ++k) {
      EXPECT_NEAR(m(k, frame), ref[k], 1e-4 * (1.0 + ref[k])) << "frame " << frame << " bin " << k;
    }
  }
}

TEST(Stft, BinCenterSinusoidPeaksAtItsBin) {
  FeatureConfig cfg;
  for (int bin : {10, 40, 100, 200}) {
    const double freq = bin * 16000.0 / 512.0;
    Waveform x = sine(freq, 16000, 16000);
    FeatureMatrix m = stft_features(x, cfg);
    auto ref = direct_dft(x, 0, 320, 512);
    const int ref_peak =
        static_cast<int>(std::max_element(ref.begin(), ref.end()) - ref.begin());
    EXPECT_EQ(ref_peak, bin);
    for (int f = 0; f < m.cols(); ++f) {
      Eigen::Index peak;
      m.col(f).maxCoeff(&peak);
      EXPECT_EQ(peak, bin) << "frame " << f;
    }
  }
}

TEST(Stft, ScalingIsMonotoneAndLinear) {
  oracle::Gen gen(3);
  Waveform x(16000), x2(16000);
  for (int i = 0; i < 16000; ++i) {
    x[i] = static_cast<float>(gen.uniform(-0.3, 0.3));
    x2[i] = 2.0f * x[i];
  }
  FeatureConfig log_cfg;
  FeatureMatrix a = stft_features(x, log_cfg), b = stft_features(x2, log_cfg);
  EXPECT_TRUE(((b - a).array() >= 0.0f).all());

  FeatureConfig lin = log_cfg;
  lin.log_compress = false;
  FeatureMatrix la = stft_features(x, lin), lb = stft_features(x2, lin);
  EXPECT_LE((lb - 2.0f * la).cwiseAbs().maxCoeff(), 1e-5f * (1.0f + lb.maxCoeff()));
}

TEST(Stft, ShapeIndependentOfContentAndDeterministic) {
  FeatureConfig cfg;
  oracle::Gen gen(9);
  Waveform noise(12000);
  for (auto& v : noise) v = static_cast<float>(gen.uniform(-1, 1));
  FeatureMatrix a = clip_features(noise, cfg);
  FeatureMatrix b = clip_features(sine(440, 30000, 16000), cfg);
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.cols(), b.cols());
  EXPECT_EQ(a.cols(), cfg.num_frames());
  FeatureMatrix again = clip_features(noise, cfg);
  EXPECT_EQ(std::memcmp(a.data(), again.data(), sizeof(float) * a.size()), 0);
  EXPECT_TRUE((a.array() >= 0.0f).all());
}

TEST(Stft, ShortInputRejected) {
  EXPECT_THROW(stft_features(Waveform(100, 0.0f), FeatureConfig{}), InvalidInput);
}

TEST(FeatureConfig, InvariantsEnforced) {
  FeatureConfig c;
  c.hop_len = 0.03;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = FeatureConfig{};
  c.fft_size = 256;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = FeatureConfig{};
  c.clip_duration = 0.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  EXPECT_NO_THROW(FeatureConfig{}.validate());
}

TEST(NormalizeFeatures, ZeroMeanUnitVariance) {
  FeatureMatrix m(3, 4);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  FeatureMatrix n = normalize_features(m);
  EXPECT_NEAR(n.mean(), 0.0, 1e-6);
  EXPECT_NEAR((n.array() * n.array()).mean(), 1.0, 1e-5);
  FeatureMatrix flat = FeatureMatrix::Constant(3, 4, 2.5f);
  EXPECT_EQ(normalize_features(flat).cwiseAbs().maxCoeff(), 0.0f);
}
