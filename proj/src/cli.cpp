#include "speechyolo/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>
#include <json.hpp>

#include "speechyolo/checkpoint.hpp"
#include "speechyolo/config.hpp"
#include "speechyolo/corpus.hpp"
#include "speechyolo/detection_io.hpp"
#include "speechyolo/error.hpp"
#include "speechyolo/evaluation.hpp"
#include "speechyolo/csv.hpp"
#include "speechyolo/io_util.hpp"

namespace speechyolo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by every command. Command-line values override the config
// file, which overrides built-in defaults.
struct Common {
  std::string config;
  std::vector<std::string> sets;  // "section.key=value"
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> theta;
  bool sweep = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "TOML-style run configuration file");
  app->add_option("--set", c.sets, "Override a config key, e.g. --set optimizer.epochs=5");
  app->add_option("--seed", c.seed, "Seed for all randomness");
  app->add_option("--out", c.out, "Output path");
}

void add_theta(CLI::App* app, Common& c) {
  app->add_option("--theta", c.theta, "Detection threshold on p_c * p_b");
  app->add_flag("--sweep", c.sweep, "Pick the max-F1 threshold from the default grid");
}

RunConfig load_config(const Common& c) {
  KeyValueConfig kv = c.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config);
  for (const auto& s : c.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  RunConfig cfg = RunConfig::from(kv);
  if (c.seed) cfg.optimizer.seed = *c.seed;
  return cfg;
}

std::string require(const std::string& value, const std::string& what) {
  if (value.empty()) throw InvalidInput("missing required " + what);
  return value;
}

// Clip list with audio loaded.
struct Corpus {
  std::vector<ClipExample> clips;
  std::vector<EvalClip> audio;
};

Corpus load_corpus(const fs::path& clips_path, const Lexicon& lexicon, const FeatureConfig& fc) {
  Corpus corpus;
  corpus.clips = parse_clip_manifest(read_file(clips_path), lexicon, clips_path.parent_path());
  AudioCache cache(fc.sample_rate);
  for (const auto& c : corpus.clips) {
    corpus.audio.push_back({c.clip_id, cache.clip(c, fc.clip_duration), c.events});
  }
  return corpus;
}

// The last round(fraction * n) clips form the held-out split.
std::pair<std::size_t, std::size_t> split_range(std::size_t n, double holdout,
                                                const std::string& split) {
  const auto held = static_cast<std::size_t>(std::lround(holdout * static_cast<double>(n)));
  const std::size_t cut = n - std::min(held, n);
  if (split == "all") return {0, n};
  if (split == "train") return {0, cut};
  if (split == "holdout") return {cut, n};
  throw InvalidInput("unknown split '" + split + "' (expected all, train, holdout)");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(parse_double(item, 0));
  }
  return out;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ------------------------------------------------------------------ synth

struct SynthOpts {
  Common common;
  int clips = 400;
  int keywords = 3;
  bool single_event = false;
};

int cmd_synth(const SynthOpts& o, std::ostream& out) {
  RunConfig cfg = load_config(o.common);
  const fs::path dir = require(o.common.out, "--out directory");
  SynthConfig sc;
  sc.n_clips = o.clips;
  sc.n_keywords = o.keywords;
  sc.duration = cfg.grid.duration;
  sc.sample_rate = cfg.features.sample_rate;
  sc.seed = cfg.optimizer.seed;
  if (o.single_event) sc.min_events = sc.max_events = 1;
  SynthCorpus corpus = synth_corpus(sc);

  fs::create_directories(dir / "audio");
  std::vector<AlignmentRecord> alignments;
  std::vector<AudioSource> sources;
  for (const auto& clip : corpus.clips) {
    const fs::path audio = dir / "audio" / (clip.clip_id + ".wav");
    write_wav(audio, {sc.sample_rate, clip.samples});
    sources.push_back({clip.clip_id, audio, sc.duration});
    for (const auto& e : clip.events) {
      alignments.push_back({clip.clip_id, corpus.lexicon.word(e.keyword), e.t_start, e.t_end});
    }
  }
  GridConfig grid = cfg.grid;
  grid.keywords = corpus.lexicon.size();
  auto clips = extract_clips(alignments, sources, corpus.lexicon, grid, grid.duration);

  write_file_atomic(dir / "alignments.csv", format_alignments(alignments));
  write_file_atomic(dir / "manifest.json", format_manifest(sources, dir));
  corpus.lexicon.save(dir / "lexicon.txt");
  write_file_atomic(dir / "clips.json",
                    format_clip_manifest(clips, corpus.lexicon, grid.duration, dir));
  out << json{{"command", "synth"},
              {"clips", corpus.clips.size()},
              {"events", alignments.size()},
              {"keywords", corpus.lexicon.size()},
              {"seed", sc.seed},
              {"out", dir.string()}}
             .dump()
      << "\n";
  return kOk;
}

// ---------------------------------------------------------------- prepare

struct PrepareOpts {
  Common common;
  std::string manifest, alignments, lexicon;
  int vocab_size = 0;
  std::optional<double> stride;
};

int cmd_prepare(const PrepareOpts& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(o.common);
  const fs::path manifest_path =
      require(o.manifest.empty() ? cfg.paths.manifest : o.manifest, "--manifest");
  const fs::path align_path =
      require(o.alignments.empty() ? cfg.paths.alignments : o.alignments, "--alignments");
  const fs::path dir = require(o.common.out.empty() ? cfg.paths.report_dir : o.common.out,
                               "--out directory");
  const double stride = o.stride.value_or(cfg.stride);

  auto sources = parse_manifest(read_file(manifest_path), manifest_path.parent_path());
  std::vector<AlignmentRecord> alignments;
  try {
    alignments = parse_alignments(read_file(align_path));
  } catch (const FormatError& e) {
    throw FormatError(align_path.string() + ":" + std::to_string(e.line()) + ": " + e.what(),
                      e.line());
  }

  const std::string lex_path = o.lexicon.empty() ? cfg.paths.lexicon : o.lexicon;
  Lexicon lexicon;
  if (!lex_path.empty()) {
    lexicon = Lexicon::load(lex_path);
  } else if (!alignments.empty()) {
    std::set<std::string> distinct;
    for (const auto& a : alignments) distinct.insert(a.word);
    const int size = o.vocab_size > 0 ? o.vocab_size : static_cast<int>(distinct.size());
    lexicon = build_lexicon(alignments, size);
  }

  if (sources.empty()) err << "warning: manifest " << manifest_path.string() << " is empty\n";
  for (auto& src : sources) {
    WavData wav = read_wav(src.audio);
    if (wav.sample_rate != cfg.features.sample_rate) {
      throw FormatError(src.audio.string() + ": sample rate " + std::to_string(wav.sample_rate) +
                        " Hz, expected " + std::to_string(cfg.features.sample_rate) + " Hz");
    }
    src.duration = static_cast<double>(wav.samples.size()) / wav.sample_rate;
  }
  GridConfig grid = cfg.grid;
  grid.keywords = std::max(1, lexicon.size());
  auto clips = extract_clips(alignments, sources, lexicon, grid, stride);

  write_file_atomic(dir / "clips.json", format_clip_manifest(clips, lexicon, grid.duration, dir));
  lexicon.save(dir / "lexicon.txt");
  out << json{{"command", "prepare"},
              {"utterances", sources.size()},
              {"clips", clips.size()},
              {"lexicon_size", lexicon.size()},
              {"out", dir.string()}}
             .dump()
      << "\n";
  return kOk;
}

// --------------------------------------------------------- pretrain/train

struct TrainOpts {
  Common common;
  std::string clips, lexicon, init_from, log;
  std::optional<int> epochs, batch_size;
  std::optional<double> lr, holdout;
  std::optional<std::string> backbone;
  bool resume = false;
};

struct TrainSetup {
  RunConfig cfg;
  fs::path clips_path;
  Lexicon lexicon;
  fs::path out;
};

TrainSetup train_setup(const TrainOpts& o) {
  TrainSetup s;
  s.cfg = load_config(o.common);
  if (o.epochs) s.cfg.optimizer.epochs = *o.epochs;
  if (o.batch_size) s.cfg.optimizer.batch_size = *o.batch_size;
  if (o.lr) s.cfg.optimizer.learning_rate = *o.lr;
  if (o.holdout) s.cfg.holdout_fraction = *o.holdout;
  if (o.backbone) s.cfg.backbone = *o.backbone;
  s.cfg.validate();
  s.clips_path = require(o.clips.empty() ? s.cfg.paths.clips : o.clips, "--clips");
  fs::path lex = o.lexicon.empty() ? s.cfg.paths.lexicon : o.lexicon;
  if (lex.empty()) lex = s.clips_path.parent_path() / "lexicon.txt";
  s.lexicon = Lexicon::load(lex);
  if (s.lexicon.size() == 0) throw InvalidInput("lexicon " + lex.string() + " is empty");
  s.out = require(o.common.out.empty() ? s.cfg.paths.checkpoint : o.common.out,
                  "--out checkpoint path");
  return s;
}

json run_info(const RunConfig& cfg) {
  return {{"seed", cfg.optimizer.seed},
          {"backbone", cfg.backbone},
          {"learning_rate", cfg.optimizer.learning_rate},
          {"batch_size", cfg.optimizer.batch_size},
          {"epochs", cfg.optimizer.epochs},
          {"holdout", cfg.holdout_fraction},
          {"loss_mode", cfg.loss_mode == LossMode::kYolo ? "yolo" : "paper_literal"},
          {"assign", cfg.assign_mode == AssignMode::kCenter ? "center" : "paper_literal"},
          {"lambda_center", cfg.loss.lambda_center},
          {"lambda_duration", cfg.loss.lambda_duration},
          {"lambda_noobj", cfg.loss.lambda_noobj}};
}

int cmd_pretrain(const TrainOpts& o, std::ostream& out) {
  TrainSetup s = train_setup(o);
  const RunConfig& cfg = s.cfg;
  FeatureConfig fc = cfg.features;
  fc.clip_duration = cfg.grid.duration;
  Corpus corpus = load_corpus(s.clips_path, s.lexicon, fc);

  std::vector<LabeledExample> labeled;
  for (const auto& clip : corpus.audio) {
    if (clip.events.size() != 1) continue;
    labeled.push_back({clip_features(clip.samples, fc), clip.events.front().keyword});
  }
  if (labeled.empty()) throw InvalidInput("no single-keyword clips to pretrain on");

  Model model(BackboneSpec::preset(cfg.backbone, fc.num_bins(), fc.num_frames()),
              ModelHead::classification(s.lexicon.size()), cfg.optimizer.seed,
              cfg.normalize_input);
  PretrainReport report =
      pretrain_classifier(model, labeled, cfg.optimizer.epochs, cfg.optimizer);

  json meta = run_info(cfg);
  meta["kind"] = "pretrain";
  meta["accuracy"] = report.accuracy;
  Checkpoint ckpt{std::move(model), s.lexicon, fc, {}, meta};
  save_checkpoint(s.out, ckpt);
  out << json{{"command", "pretrain"},
              {"examples", labeled.size()},
              {"epochs", cfg.optimizer.epochs},
              {"accuracy", report.accuracy},
              {"final_loss", report.final_loss},
              {"backbone_checksum", ckpt.model.backbone_checksum()},
              {"seed", cfg.optimizer.seed}}
             .dump()
      << "\n";
  return kOk;
}

int cmd_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
  TrainSetup s = train_setup(o);
  const RunConfig& cfg = s.cfg;
  FeatureConfig fc = cfg.features;
  fc.clip_duration = cfg.grid.duration;
  GridConfig grid = cfg.grid;
  grid.keywords = s.lexicon.size();

  Corpus corpus = load_corpus(s.clips_path, s.lexicon, fc);
  auto [b, e] = split_range(corpus.audio.size(), cfg.holdout_fraction, "train");
  auto [hb, he] = split_range(corpus.audio.size(), cfg.holdout_fraction, "holdout");
  auto to_example = [&](const EvalClip& clip) {
    return DetectionExample{clip_features(clip.samples, fc),
                            encode_targets(clip.events, grid, cfg.assign_mode), clip.events};
  };
  std::vector<DetectionExample> train, heldout;
  int collisions = 0;
  for (std::size_t i = b; i < e; ++i) {
    train.push_back(to_example(corpus.audio[i]));
    collisions += train.back().target.collisions;
  }
  for (std::size_t i = hb; i < he; ++i) heldout.push_back(to_example(corpus.audio[i]));
  if (train.empty()) throw InvalidInput("no training clips after the held-out split");

  std::optional<Checkpoint> ckpt;
  if (o.resume && fs::exists(s.out)) {
    ckpt.emplace(load_checkpoint(s.out));
    if (!(ckpt->lexicon == s.lexicon)) throw InvalidInput("resume: lexicon differs from checkpoint");
  } else if (!o.init_from.empty()) {
    Checkpoint base = load_checkpoint(o.init_from);
    if (base.model.spec().input_bins != fc.num_bins() ||
        base.model.spec().input_frames != fc.num_frames()) {
      throw InvalidInput("--init-from: backbone input shape does not match the features");
    }
    const auto before = base.model.backbone_checksum();
    replace_head(base.model, grid);
    if (base.model.backbone_checksum() != before) throw std::logic_error("head swap touched backbone");
    json meta = run_info(cfg);
    meta["init_from"] = o.init_from;
    meta["init_backbone_checksum"] = before;
    ckpt.emplace(Checkpoint{std::move(base.model), s.lexicon, fc, {}, meta});
  } else {
    Model model(BackboneSpec::preset(cfg.backbone, fc.num_bins(), fc.num_frames()),
                ModelHead::detection(grid), cfg.optimizer.seed, cfg.normalize_input);
    ckpt.emplace(Checkpoint{std::move(model), s.lexicon, fc, {}, run_info(cfg)});
  }
  ckpt->metadata["kind"] = "detector";
  ckpt->metadata["holdout"] = cfg.holdout_fraction;
  ckpt->metadata["seed"] = cfg.optimizer.seed;
  if (!(ckpt->model.head().grid == grid)) throw InvalidInput("checkpoint grid does not match config");

  const fs::path log_path = o.log.empty() ? fs::path(s.out.string() + ".log.jsonl") : fs::path(o.log);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  const bool append = o.resume && ckpt->state.epochs_done > 0;
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw FormatError("cannot write training log " + log_path.string());

  if (ckpt->state.epochs_done == 0) save_checkpoint(s.out, *ckpt);

  json epochs = json::array();
  TrainHooks hooks;
  long step = 0;
  hooks.on_step = [&](const LossBreakdown& lb) {
    log << lb.to_json() << "\n";
    ++step;
  };
  hooks.on_epoch = [&](const EpochLog& entry, const Model&, const TrainState& state) {
    log.flush();
    ckpt->state = state;
    save_checkpoint(s.out, *ckpt);
    json row = {{"epoch", entry.epoch}, {"loss", json::parse(entry.mean_loss.to_json())}};
    row["heldout_f1"] = entry.heldout_f1 ? json(*entry.heldout_f1) : json(nullptr);
    row["heldout_theta"] = entry.heldout_theta;
    epochs.push_back(row);
    err << "epoch " << entry.epoch << " loss " << entry.mean_loss.total;
    if (entry.heldout_f1) err << " heldout_f1 " << *entry.heldout_f1;
    err << "\n";
  };

  try {
    train_detector(ckpt->model, train, heldout, cfg.loss, cfg.loss_mode, cfg.optimizer,
                   ckpt->state, hooks);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "; last good checkpoint kept at " << s.out.string() << "\n";
    return kDiverged;
  }

  out << json{{"command", "train"},
              {"train_clips", train.size()},
              {"heldout_clips", heldout.size()},
              {"target_collisions", collisions},
              {"epochs_done", ckpt->state.epochs_done},
              {"steps_logged", step},
              {"epochs", epochs},
              {"seed", cfg.optimizer.seed},
              {"checkpoint", s.out.string()}}
             .dump()
      << "\n";
  return kOk;
}

// --------------------------------------------------------------- evaluate

struct EvalOpts {
  Common common;
  std::string checkpoint, clips, lexicon, detections, split = "all";
  std::optional<double> holdout;
  // noise-eval
  std::string kind = "gaussian";
  std::string alphas = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
};

struct EvalInputs {
  RunConfig cfg;
  std::optional<Checkpoint> ckpt;
  Lexicon lexicon;
  Corpus corpus;
  std::size_t begin = 0, end = 0;
  double holdout = 0.0;
};

EvalInputs eval_inputs(const EvalOpts& o, bool need_checkpoint) {
  EvalInputs in;
  in.cfg = load_config(o.common);
  const fs::path ckpt_path = o.checkpoint.empty() ? in.cfg.paths.checkpoint : o.checkpoint;
  FeatureConfig fc = in.cfg.features;
  fc.clip_duration = in.cfg.grid.duration;
  in.holdout = in.cfg.holdout_fraction;
  if (!ckpt_path.empty()) {
    in.ckpt.emplace(load_checkpoint(ckpt_path));
    if (in.ckpt->model.head().kind != ModelHead::Kind::kDetection) {
      throw InvalidInput("checkpoint " + ckpt_path.string() + " has no detection head");
    }
    in.lexicon = in.ckpt->lexicon;
    fc = in.ckpt->features;
    in.holdout = in.ckpt->metadata.value("holdout", in.holdout);
    if (in.ckpt->model.head().grid.keywords != in.lexicon.size()) {
      throw InvalidInput("checkpoint grid does not match its lexicon size");
    }
  } else if (need_checkpoint) {
    throw InvalidInput("missing required --checkpoint");
  }
  if (o.holdout) in.holdout = *o.holdout;

  const std::string lex_path = o.lexicon.empty() ? in.cfg.paths.lexicon : o.lexicon;
  if (!lex_path.empty()) {
    Lexicon given = Lexicon::load(lex_path);
    if (in.ckpt && !(given == in.lexicon)) {
      throw InvalidInput("lexicon mismatch: " + lex_path + " differs from the checkpoint lexicon");
    }
    in.lexicon = given;
  }
  if (!in.ckpt && lex_path.empty()) throw InvalidInput("need --checkpoint or --lexicon");

  const fs::path clips_path = require(o.clips.empty() ? in.cfg.paths.clips : o.clips, "--clips");
  try {
    in.corpus = load_corpus(clips_path, in.lexicon, fc);
  } catch (const FormatError& e) {
    throw FormatError(std::string("lexicon mismatch or bad clip manifest: ") + e.what());
  }
  std::tie(in.begin, in.end) = split_range(in.corpus.audio.size(), in.holdout, o.split);
  return in;
}

std::vector<ScoredUtterance> scored_from_detections(const EvalInputs& in, const fs::path& path) {
  const std::string text = read_file(path);
  const auto format = path.extension() == ".csv" ? DetectionFormat::kCsv : DetectionFormat::kJsonLines;
  auto dets = parse_detections(text, in.lexicon, format);
  std::vector<ScoredUtterance> scored;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = in.begin; i < in.end; ++i) {
    index[in.corpus.audio[i].clip_id] = scored.size();
    scored.push_back({in.corpus.audio[i].clip_id, {}, in.corpus.audio[i].events});
  }
  for (const auto& d : dets) {
    auto it = index.find(d.utt_id);
    if (it != index.end()) scored[it->second].detections.push_back(d.record);
  }
  return scored;
}

int cmd_evaluate(const EvalOpts& o, std::ostream& out) {
  EvalInputs in = eval_inputs(o, o.detections.empty());
  const fs::path dir = require(o.common.out.empty() ? in.cfg.paths.report_dir : o.common.out,
                               "--out directory");
  std::span<const EvalClip> clips(in.corpus.audio.data() + in.begin, in.end - in.begin);
  std::vector<ScoredUtterance> scored =
      o.detections.empty() ? score_clips(in.ckpt->model, in.ckpt->features, clips)
                           : scored_from_detections(in, o.detections);

  const auto thetas = default_theta_grid();
  std::optional<double> fixed = o.common.sweep ? std::nullopt : o.common.theta;
  const double duration = in.ckpt ? in.ckpt->features.clip_duration : in.cfg.grid.duration;
  const TwvConfig twv = TwvConfig::nist(static_cast<double>(clips.size()) * duration);
  EvaluationReport report = evaluate_corpus(scored, fixed, thetas, twv);

  json j = report.to_json(in.lexicon);
  j["seed"] = in.cfg.optimizer.seed;
  j["split"] = o.split;
  j["clips"] = clips.size();
  j["source"] = o.detections.empty() ? "checkpoint" : "detections";
  write_json(dir / "report.json", j);
  write_file_atomic(dir / "curves.csv", report.curve_csv());
  out << j.dump() << "\n";
  return kOk;
}

int cmd_noise_eval(const EvalOpts& o, std::ostream& out) {
  EvalInputs in = eval_inputs(o, true);
  const fs::path path = require(o.common.out.empty()
                                    ? (in.cfg.paths.report_dir.empty()
                                           ? std::string()
                                           : (fs::path(in.cfg.paths.report_dir) / "noise.csv").string())
                                    : o.common.out,
                                "--out CSV path");
  const NoiseKind kind = parse_noise_kind(o.kind);
  const auto alphas = parse_list(o.alphas);
  std::span<const EvalClip> clips(in.corpus.audio.data() + in.begin, in.end - in.begin);

  double theta = 0.0;
  if (o.common.theta && !o.common.sweep) {
    theta = *o.common.theta;
  } else {
    auto clean = score_clips(in.ckpt->model, in.ckpt->features, clips);
    const auto thetas = default_theta_grid();
    theta = sweep_threshold(clean, thetas).best_theta;
  }
  auto rows = noise_robustness_curve(in.ckpt->model, in.ckpt->features, clips, kind, alphas,
                                     theta, in.cfg.optimizer.seed);
  write_file_atomic(path, noise_curve_csv(rows, kind));
  out << json{{"command", "noise-eval"}, {"kind", o.kind}, {"theta", theta},
              {"rows", rows.size()}, {"seed", in.cfg.optimizer.seed}, {"out", path.string()}}
             .dump()
      << "\n";
  return kOk;
}

// ----------------------------------------------------------------- decode

struct DecodeOpts {
  Common common;
  std::string checkpoint;
  std::string format = "csv";
  std::vector<std::string> files;
};

int cmd_decode(const DecodeOpts& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(o.common);
  const std::string ckpt_path = require(o.checkpoint.empty() ? cfg.paths.checkpoint : o.checkpoint,
                                        "--checkpoint");
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.model.head().kind != ModelHead::Kind::kDetection) {
    throw InvalidInput("checkpoint has no detection head");
  }
  const FeatureConfig& fc = ckpt.features;
  const GridConfig& grid = ckpt.model.head().grid;
  const double theta = o.common.theta.value_or(0.4);
  DetectionFormat format;
  if (o.format == "csv") {
    format = DetectionFormat::kCsv;
  } else if (o.format == "jsonl") {
    format = DetectionFormat::kJsonLines;
  } else {
    throw InvalidInput("--format must be csv or jsonl");
  }
  if (o.files.empty()) throw InvalidInput("no audio files given");

  std::vector<UttDetection> all;
  std::size_t failures = 0;
  for (const auto& file : o.files) {
    WavData wav;
    try {
      wav = read_wav(file);
      if (wav.sample_rate != fc.sample_rate) {
        throw FormatError(file + ": sample rate " + std::to_string(wav.sample_rate) +
                          " Hz, expected " + std::to_string(fc.sample_rate) + " Hz");
      }
      if (wav.samples.empty()) throw FormatError(file + ": no samples");
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      ++failures;
      continue;
    }
    const double seconds = static_cast<double>(wav.samples.size()) / wav.sample_rate;
    const double stride = grid.duration / 2.0;
    std::vector<double> offsets{0.0};
    while (offsets.back() + grid.duration < seconds - 1e-9) {
      offsets.push_back(std::min(offsets.back() + stride, seconds - grid.duration));
    }
    std::vector<DetectionRecord> records;
    for (double offset : offsets) {
      const auto first = static_cast<std::size_t>(std::lround(offset * wav.sample_rate));
      Waveform window(wav.samples.begin() + std::min(first, wav.samples.size()), wav.samples.end());
      if (window.empty()) continue;
      for (auto r : decode(ckpt.model.forward(clip_features(window, fc)), theta, grid)) {
        r.interval.start += offset;
        r.interval.end += offset;
        records.push_back(r);
      }
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const DetectionRecord& a, const DetectionRecord& b) {
                       return a.interval.start < b.interval.start;
                     });
    for (const auto& r : records) all.push_back({file, r});
  }
  if (failures == o.files.size()) return kFailure;

  const std::string text = format_detections(all, ckpt.lexicon, format);
  if (o.common.out.empty()) {
    out << text;
  } else {
    write_file_atomic(o.common.out, text);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grid-based keyword detection and localization", "speechyolo"};
  app.require_subcommand(1);

  SynthOpts synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic keyword corpus");
  add_common(synth_cmd, synth.common);
  synth_cmd->add_option("--clips", synth.clips, "Number of clips")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--keywords", synth.keywords, "Number of keywords")->check(CLI::PositiveNumber);
  synth_cmd->add_flag("--single-event", synth.single_event, "Exactly one keyword per clip");

  PrepareOpts prep;
  auto* prep_cmd = app.add_subcommand("prepare", "Build the lexicon and clip manifest");
  add_common(prep_cmd, prep.common);
  prep_cmd->add_option("--manifest", prep.manifest, "Utterance manifest JSON");
  prep_cmd->add_option("--alignments", prep.alignments, "Word alignment CSV");
  prep_cmd->add_option("--lexicon", prep.lexicon, "Use this lexicon instead of building one");
  prep_cmd->add_option("--vocab-size", prep.vocab_size, "Lexicon size (0 = every word)");
  prep_cmd->add_option("--stride", prep.stride, "Clip stride in seconds");

  auto add_train = [](CLI::App* cmd, TrainOpts& t) {
    add_common(cmd, t.common);
    cmd->add_option("--clips", t.clips, "Clip manifest JSON");
    cmd->add_option("--lexicon", t.lexicon, "Lexicon file (default: next to the clips)");
    cmd->add_option("--epochs", t.epochs, "Training epochs");
    cmd->add_option("--batch-size", t.batch_size, "Mini-batch size");
    cmd->add_option("--lr", t.lr, "Adam learning rate");
    cmd->add_option("--backbone", t.backbone, "tiny, vgg11star or vgg19star");
  };
  TrainOpts pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "Pretrain the backbone as a keyword classifier");
  add_train(pre_cmd, pre);

  TrainOpts train;
  auto* train_cmd = app.add_subcommand("train", "Train the detector");
  add_train(train_cmd, train);
  train_cmd->add_option("--holdout", train.holdout, "Fraction of clips held out (tail)");
  train_cmd->add_option("--init-from", train.init_from, "Pretrained checkpoint; its head is replaced");
  train_cmd->add_flag("--resume", train.resume, "Continue from the checkpoint at --out");
  train_cmd->add_option("--log", train.log, "Per-step loss log (default: <out>.log.jsonl)");

  EvalOpts eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint or a detections file");
  add_common(eval_cmd, eval.common);
  add_theta(eval_cmd, eval.common);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Detector checkpoint");
  eval_cmd->add_option("--detections", eval.detections, "Detections (.csv or .jsonl) instead of a model");
  eval_cmd->add_option("--clips", eval.clips, "Clip manifest JSON");
  eval_cmd->add_option("--lexicon", eval.lexicon, "Lexicon file");
  eval_cmd->add_option("--split", eval.split, "all, train or holdout");
  eval_cmd->add_option("--holdout", eval.holdout, "Held-out fraction (default: from checkpoint)");

  EvalOpts noise;
  auto* noise_cmd = app.add_subcommand("noise-eval", "F1/Actual under injected noise");
  add_common(noise_cmd, noise.common);
  add_theta(noise_cmd, noise.common);
  noise_cmd->add_option("--checkpoint", noise.checkpoint, "Detector checkpoint");
  noise_cmd->add_option("--clips", noise.clips, "Clip manifest JSON");
  noise_cmd->add_option("--lexicon", noise.lexicon, "Lexicon file");
  noise_cmd->add_option("--split", noise.split, "all, train or holdout");
  noise_cmd->add_option("--holdout", noise.holdout, "Held-out fraction (default: from checkpoint)");
  noise_cmd->add_option("--kind", noise.kind, "babble, gaussian or speckle");
  noise_cmd->add_option("--alphas", noise.alphas, "Comma-separated noise amplitudes, ascending");

  DecodeOpts dec;
  auto* dec_cmd = app.add_subcommand("decode", "Detect keywords in WAV files");
  add_common(dec_cmd, dec.common);
  add_theta(dec_cmd, dec.common);
  dec_cmd->add_option("--checkpoint", dec.checkpoint, "Detector checkpoint");
  dec_cmd->add_option("--format", dec.format, "csv or jsonl");
  dec_cmd->add_option("files", dec.files, "Audio files");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*prep_cmd) return cmd_prepare(prep, out, err);
    if (*pre_cmd) return cmd_pretrain(pre, out);
    if (*train_cmd) return cmd_train(train, out, err);
    if (*eval_cmd) return cmd_evaluate(eval, out);
    if (*noise_cmd) return cmd_noise_eval(noise, out);
    if (*dec_cmd) return cmd_decode(dec, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace speechyolo::cli
