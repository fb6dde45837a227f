#include "speechyolo/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include <json.hpp>

#include "speechyolo/csv.hpp"
#include "speechyolo/error.hpp"

namespace speechyolo {

namespace {

constexpr double kTimeEps = 1e-9;

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string audio_ref(const std::filesystem::path& audio, const std::filesystem::path& base) {
  if (base.empty()) return audio.generic_string();
  auto rel = audio.lexically_relative(base);
  return rel.empty() ? audio.generic_string() : rel.generic_string();
}

std::filesystem::path resolve(const std::string& ref, const std::filesystem::path& base) {
  std::filesystem::path p(ref);
  if (p.is_absolute() || base.empty()) return p.lexically_normal();
  return (base / p).lexically_normal();
}

}  // namespace

std::string normalize_word(std::string_view word) {
  std::string out;
  for (char c : word) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u) && c != '\'') continue;
    if (std::isspace(u)) continue;
    out += static_cast<char>(std::tolower(u));
  }
  return out;
}

std::vector<AlignmentRecord> parse_alignments(std::string_view csv_text) {
  auto rows = parse_csv(csv_text);
  std::vector<AlignmentRecord> out;
  if (rows.empty()) return out;
  const std::vector<std::string> header{"utt_id", "word", "start", "end"};
  if (rows.front().fields != header) {
    throw FormatError("alignment CSV header must be 'utt_id,word,start,end'", rows.front().line);
  }
  std::unordered_map<std::string, double> last_end;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != 4) {
      throw FormatError("expected 4 fields, got " +
                            std::to_string(row.fields.size()),
                        row.line);
    }
    AlignmentRecord rec;
    rec.utt_id = row.fields[0];
    rec.word = normalize_word(row.fields[1]);
    try {
      rec.t_start = parse_double(row.fields[2], row.line);
      rec.t_end = parse_double(row.fields[3], row.line);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), row.line);
    }
    if (rec.utt_id.empty() || rec.word.empty()) {
      throw FormatError("empty utt_id or word", row.line);
    }
    if (!(rec.t_start >= 0) || !(rec.t_end > rec.t_start)) {
      throw FormatError("need 0 <= start < end", row.line);
    }
    auto it = last_end.find(rec.utt_id);
    if (it != last_end.end() && rec.t_start < it->second - kTimeEps) {
      throw FormatError("words overlap or are out of order within " + rec.utt_id,
                        row.line);
    }
    last_end[rec.utt_id] = rec.t_end;
    out.push_back(std::move(rec));
  }
  return out;
}

std::string format_alignments(std::span<const AlignmentRecord> records) {
  std::string out = "utt_id,word,start,end\n";
  for (const auto& r : records) {
    out += csv_escape(r.utt_id) + "," + csv_escape(r.word) + "," + fixed4(r.t_start) + "," +
           fixed4(r.t_end) + "\n";
  }
  return out;
}

Lexicon build_lexicon(std::span<const AlignmentRecord> alignments, int vocab_size) {
  if (vocab_size < 1) throw InvalidInput("lexicon size must be >= 1");
  std::unordered_map<std::string, long> counts;
  for (const auto& a : alignments) ++counts[a.word];
  if (static_cast<int>(counts.size()) < vocab_size) {
    throw InvalidInput("only " + std::to_string(counts.size()) + " distinct words, need " +
                       std::to_string(vocab_size));
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words;
  for (int i = 0; i < vocab_size; ++i) words.push_back(ranked[i].first);
  return Lexicon(std::move(words));
}

std::vector<ClipExample> extract_clips(std::span<const AlignmentRecord> alignments,
                                       std::span<const AudioSource> sources,
                                       const Lexicon& lexicon, const GridConfig& cfg,
                                       double stride) {
  if (!(stride > 0)) throw InvalidInput("clip stride must be positive");
  std::unordered_map<std::string, std::vector<const AlignmentRecord*>> by_utt;
  for (const auto& a : alignments) by_utt[a.utt_id].push_back(&a);

  std::vector<ClipExample> clips;
  for (const AudioSource& src : sources) {
    std::vector<double> offsets;
    if (src.duration < cfg.duration + kTimeEps) {
      offsets.push_back(0.0);
    } else {
      for (long k = 0;; ++k) {
        const double start = k * stride;
        if (start + cfg.duration > src.duration + kTimeEps) break;
        offsets.push_back(start);
      }
    }
    const auto words = by_utt.find(src.utt_id);
    for (double offset : offsets) {
      ClipExample clip;
      clip.utt_id = src.utt_id;
      clip.audio = src.audio;
      clip.offset = offset;
      char id[64];
      std::snprintf(id, sizeof(id), "_%08.3f", offset);
      clip.clip_id = src.utt_id + id;
      if (words != by_utt.end()) {
        for (const AlignmentRecord* w : words->second) {
          auto k = lexicon.index(w->word);
          if (!k) continue;
          if (w->t_start < offset - kTimeEps || w->t_end > offset + cfg.duration + kTimeEps) {
            continue;
          }
          clip.events.push_back({*k, std::max(0.0, w->t_start - offset),
                                 std::min(cfg.duration, w->t_end - offset)});
        }
      }
      clips.push_back(std::move(clip));
    }
  }
  return clips;
}

std::vector<AudioSource> parse_manifest(std::string_view json_text,
                                        const std::filesystem::path& base_dir) {
  std::vector<AudioSource> out;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& entry : j) {
      AudioSource src;
      src.utt_id = entry.at("utt_id").get<std::string>();
      src.audio = resolve(entry.at("audio").get<std::string>(), base_dir);
      src.duration = entry.value("duration", 0.0);
      out.push_back(std::move(src));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
  return out;
}

std::string format_manifest(std::span<const AudioSource> sources,
                            const std::filesystem::path& base_dir) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : sources) {
    j.push_back({{"utt_id", s.utt_id}, {"audio", audio_ref(s.audio, base_dir)}});
  }
  return j.dump(1) + "\n";
}

std::string format_clip_manifest(std::span<const ClipExample> clips, const Lexicon& lexicon,
                                 double duration, const std::filesystem::path& base_dir) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : clips) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : c.events) {
      events.push_back({{"keyword", lexicon.word(e.keyword)},
                        {"start", std::stod(fixed4(e.t_start))},
                        {"end", std::stod(fixed4(e.t_end))}});
    }
    list.push_back({{"clip_id", c.clip_id},
                    {"utt_id", c.utt_id},
                    {"audio", audio_ref(c.audio, base_dir)},
                    {"offset", std::stod(fixed4(c.offset))},
                    {"events", events}});
  }
  nlohmann::json doc = {{"version", 1}, {"duration", duration}, {"clips", list}};
  return doc.dump(1) + "\n";
}

std::vector<ClipExample> parse_clip_manifest(std::string_view json_text, const Lexicon& lexicon,
                                             const std::filesystem::path& base_dir) {
  std::vector<ClipExample> out;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    for (const auto& c : doc.at("clips")) {
      ClipExample clip;
      clip.clip_id = c.at("clip_id").get<std::string>();
      clip.utt_id = c.at("utt_id").get<std::string>();
      clip.audio = resolve(c.at("audio").get<std::string>(), base_dir);
      clip.offset = c.at("offset").get<double>();
      for (const auto& e : c.at("events")) {
        const auto word = e.at("keyword").get<std::string>();
        auto k = lexicon.index(word);
        if (!k) throw FormatError("clip " + clip.clip_id + " uses unknown keyword '" + word + "'");
        clip.events.push_back({*k, e.at("start").get<double>(), e.at("end").get<double>()});
      }
      out.push_back(std::move(clip));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad clip manifest: ") + e.what());
  }
  return out;
}

const Waveform& AudioCache::source(const std::filesystem::path& path) {
  auto it = cache_.find(path);
  if (it != cache_.end()) return it->second;
  WavData wav = read_wav(path);
  if (wav.sample_rate != sample_rate_) {
    throw FormatError(path.string() + ": sample rate " + std::to_string(wav.sample_rate) +
                      " Hz, expected " + std::to_string(sample_rate_) + " Hz");
  }
  return cache_.emplace(path, std::move(wav.samples)).first->second;
}

Waveform AudioCache::clip(const ClipExample& clip, double duration) {
  const Waveform& src = source(clip.audio);
  const auto begin = static_cast<std::size_t>(std::lround(clip.offset * sample_rate_));
  const auto length = static_cast<std::size_t>(std::lround(duration * sample_rate_));
  Waveform out(length, 0.0f);
  for (std::size_t i = 0; i < length && begin + i < src.size(); ++i) out[i] = src[begin + i];
  return out;
}

}  // namespace speechyolo
