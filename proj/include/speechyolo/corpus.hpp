#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "speechyolo/grid.hpp"
#include "speechyolo/lexicon.hpp"
#include "speechyolo/wav.hpp"

namespace speechyolo {

// One aligned word of an utterance, times in seconds.
struct AlignmentRecord {
  std::string utt_id;
  std::string word;
  double t_start = 0.0;
  double t_end = 0.0;
  bool operator==(const AlignmentRecord&) const = default;
};

// Headered CSV "utt_id,word,start,end". Words are case-folded with
// punctuation removed (apostrophes kept). Throws FormatError naming the
// offending line for malformed rows, non-positive durations, and words that
// overlap or go backwards within an utterance.
std::vector<AlignmentRecord> parse_alignments(std::string_view csv_text);
std::string format_alignments(std::span<const AlignmentRecord> records);

std::string normalize_word(std::string_view word);

// Top-L words by count; equal counts in lexicographic order. Throws
// InvalidInput when fewer than L distinct words exist.
Lexicon build_lexicon(std::span<const AlignmentRecord> alignments, int vocab_size);

struct AudioSource {
  std::string utt_id;
  std::filesystem::path audio;
  double duration = 0.0;  // seconds
};

// A fixed-duration window of an utterance with clip-local events.
struct ClipExample {
  std::string clip_id;
  std::string utt_id;
  std::filesystem::path audio;
  double offset = 0.0;  // seconds into the source
  std::vector<Event> events;
  bool operator==(const ClipExample&) const = default;
};

// Windows of cfg.duration every `stride` seconds while they fit inside the
// audio; audio shorter than one window yields a single (zero-padded) clip.
// A word becomes an event iff it is in the lexicon and its whole span lies
// inside the window.
std::vector<ClipExample> extract_clips(std::span<const AlignmentRecord> alignments,
                                       std::span<const AudioSource> sources,
                                       const Lexicon& lexicon, const GridConfig& cfg,
                                       double stride);

// Utterance manifest: JSON array of {"utt_id", "audio"}. Relative audio
// paths resolve against `base_dir`.
std::vector<AudioSource> parse_manifest(std::string_view json_text,
                                        const std::filesystem::path& base_dir);
std::string format_manifest(std::span<const AudioSource> sources,
                            const std::filesystem::path& base_dir);

// Clip manifest: {"version", "duration", "clips": [...]} with keyword
// strings in the events. Audio paths are written relative to `base_dir`
// when possible and resolved against it when read.
std::string format_clip_manifest(std::span<const ClipExample> clips, const Lexicon& lexicon,
                                 double duration, const std::filesystem::path& base_dir);
std::vector<ClipExample> parse_clip_manifest(std::string_view json_text, const Lexicon& lexicon,
                                             const std::filesystem::path& base_dir);

// Reads clip audio (cached per source file) and cuts the clip window,
// zero-padding past the end of the source. Throws FormatError on a sample
// rate mismatch.
class AudioCache {
 public:
  explicit AudioCache(int sample_rate) : sample_rate_(sample_rate) {}
  const Waveform& source(const std::filesystem::path& path);
  Waveform clip(const ClipExample& clip, double duration);

 private:
  int sample_rate_;
  std::map<std::filesystem::path, Waveform> cache_;
};

// ----------------------------------------------------------- synthetic

struct SynthConfig {
  int n_clips = 400;
  int n_keywords = 3;
  double duration = 1.0;
  int sample_rate = 16000;
  std::uint64_t seed = 7;
  int min_events = 0;
  int max_events = 2;
  double min_word = 0.15;  // seconds
  double max_word = 0.30;
  double noise_floor = 0.01;  // RMS of the background noise
};

struct SynthClip {
  std::string clip_id;
  Waveform samples;
  std::vector<Event> events;  // exact by construction, sorted by start
};

struct SynthCorpus {
  std::vector<SynthClip> clips;
  Lexicon lexicon;  // "kw0", "kw1", ...
};

// Keyword k's signature: a tone chirping over the word's duration.
Waveform keyword_template(int keyword, double seconds, int sample_rate);

// Clip i depends only on (seed, i).
SynthCorpus synth_corpus(const SynthConfig& cfg);

// -------------------------------------------------------------- noise

enum class NoiseKind { kBabble, kGaussian, kSpeckle };

// "babble" (coffee-shop surrogate), "gaussian", or "speckle".
NoiseKind parse_noise_kind(const std::string& name);
std::string noise_kind_name(NoiseKind kind);

// gaussian: x + a*n; speckle: x + a*x*n; babble: x + a*b. n and b are
// scaled to unit RMS over the clip. alpha = 0 returns the input unchanged.
Waveform inject_noise(const Waveform& waveform, NoiseKind kind, double alpha,
                      std::uint64_t seed);

// Deterministic multi-talker-like texture: band-limited noise voices with
// syllable-rate amplitude modulation.
Waveform make_babble_texture(int sample_rate, double seconds, std::uint64_t seed);

// The shipped texture (data/babble_texture.wav), loaded once.
const Waveform& babble_texture();

}  // namespace speechyolo
