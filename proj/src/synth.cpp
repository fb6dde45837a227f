#include "speechyolo/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "speechyolo/error.hpp"

namespace speechyolo {

namespace {

// Event boundaries sit on a 0.5 ms grid: whole samples at 16 kHz and exact
// in the 4-decimal alignment format.
constexpr double kBoundaryGrid = 0.0005;

double snap(double t) { return std::round(t / kBoundaryGrid) * kBoundaryGrid; }

std::uint64_t clip_seed(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint64_t out[1];
  seq.generate(reinterpret_cast<std::uint32_t*>(out), reinterpret_cast<std::uint32_t*>(out) + 2);
  return out[0];
}

}  // namespace

Waveform keyword_template(int keyword, double seconds, int sample_rate) {
  if (keyword < 0) throw InvalidInput("keyword index must be non-negative");
  const int n = static_cast<int>(std::lround(seconds * sample_rate));
  const double nyquist = sample_rate / 2.0;
  // Fundamentals spread geometrically; odd keywords sweep up 15%, even sweep
  // down 15%, so the swept bands of different keywords never overlap.
  const double f0 = 400.0 * std::pow(1.6, keyword);
  const double f1 = f0 * (keyword % 2 ? 1.15 : 0.85);
  if (std::max(f0, f1) >= 0.95 * nyquist) {
    throw InvalidInput("too many keywords for this sample rate");
  }
  const int ramp = std::max(1, static_cast<int>(0.005 * sample_rate));

  Waveform out(n);
  double phase = 0.0;
  for (int i = 0; i < n; ++i) {
    const double frac = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    const double freq = f0 + (f1 - f0) * frac;
    phase += 2.0 * std::numbers::pi * freq / sample_rate;
    const double v = 0.5 * std::sin(phase);
    double env = 1.0;
    if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
    if (n - 1 - i < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / ramp));
    out[i] = static_cast<float>(v * env);
  }
  return out;
}

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.n_keywords < 1) throw InvalidInput("synth_corpus needs at least one keyword");
  if (cfg.n_clips < 0) throw InvalidInput("n_clips must be non-negative");
  if (cfg.min_events < 0 || cfg.max_events < cfg.min_events) {
    throw InvalidInput("bad event count range");
  }
  if (!(cfg.min_word > 0) || cfg.max_word < cfg.min_word ||
      cfg.max_events * cfg.max_word > cfg.duration) {
    throw InvalidInput("keyword durations do not fit in the clip");
  }
  // Validates the keyword count against the sample rate up front.
  keyword_template(cfg.n_keywords - 1, cfg.min_word, cfg.sample_rate);

  SynthCorpus corpus;
  std::vector<std::string> words;
  for (int k = 0; k < cfg.n_keywords; ++k) words.push_back("kw" + std::to_string(k));
  corpus.lexicon = Lexicon(std::move(words));

  const int samples = static_cast<int>(std::lround(cfg.duration * cfg.sample_rate));
  for (int c = 0; c < cfg.n_clips; ++c) {
    std::mt19937_64 rng(clip_seed(cfg.seed, c));
    std::uniform_int_distribution<int> count_dist(cfg.min_events, cfg.max_events);
    std::uniform_int_distribution<int> kw_dist(0, cfg.n_keywords - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.noise_floor);

    SynthClip clip;
    char id[32];
    std::snprintf(id, sizeof(id), "clip_%05d", c);
    clip.clip_id = id;
    clip.samples.resize(samples);
    for (auto& s : clip.samples) s = static_cast<float>(noise(rng));

    const int wanted = count_dist(rng);
    for (int attempt = 0; static_cast<int>(clip.events.size()) < wanted && attempt < 1000;
         ++attempt) {
      const double len = snap(cfg.min_word + (cfg.max_word - cfg.min_word) * unit(rng));
      const double start = snap((cfg.duration - len) * unit(rng));
      Event e{kw_dist(rng), start, std::min(cfg.duration, start + len)};
      bool overlaps = std::any_of(clip.events.begin(), clip.events.end(), [&](const Event& o) {
        return e.t_start < o.t_end && o.t_start < e.t_end;
      });
      if (overlaps) continue;
      clip.events.push_back(e);
    }
    std::sort(clip.events.begin(), clip.events.end(),
              [](const Event& a, const Event& b) { return a.t_start < b.t_start; });

    for (const Event& e : clip.events) {
      const auto first = static_cast<int>(std::lround(e.t_start * cfg.sample_rate));
      const auto last = static_cast<int>(std::lround(e.t_end * cfg.sample_rate));
      Waveform tmpl = keyword_template(e.keyword, (last - first) / static_cast<double>(cfg.sample_rate),
                                       cfg.sample_rate);
      for (int i = 0; i < static_cast<int>(tmpl.size()) && first + i < samples; ++i) {
        clip.samples[first + i] += tmpl[i];
      }
    }
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

}  // namespace speechyolo
