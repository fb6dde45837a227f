#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "speechyolo/checkpoint.hpp"
#include "speechyolo/cli.hpp"
#include "speechyolo/config.hpp"
#include "speechyolo/corpus.hpp"
#include "speechyolo/detection_io.hpp"
#include "speechyolo/error.hpp"
#include "speechyolo/io_util.hpp"
#include "speechyolo/metrics.hpp"
#include "test_util.hpp"

using namespace speechyolo;
using speechyolo::testing::TempDir;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "speechyolo");
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Every regular file below `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

std::vector<float> trainable(const Model& m) {
  std::vector<float> out;
  for (const nn::Param* p : m.params()) {
    if (p->trainable) out.insert(out.end(), p->value.begin(), p->value.end());
  }
  return out;
}

std::vector<float> all_params(const Model& m) {
  std::vector<float> out;
  for (const nn::Param* p : m.params()) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

// Small synthetic corpus shared by the tests below.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = dir_ / "synth";
    CliResult r = run({"synth", "--clips", "12", "--keywords", "2", "--seed", "3", "--out", data_.string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  TempDir dir_;
  fs::path data_;
};

}  // namespace

TEST_F(CliTest, SynthIsReproducible) {
  const fs::path again = dir_ / "again";
  ASSERT_EQ(run({"synth", "--clips", "12", "--keywords", "2", "--seed", "3", "--out", again.string()}).code, 0);
  EXPECT_EQ(tree(data_), tree(again));
  auto files = tree(data_);
  EXPECT_TRUE(files.count("manifest.json"));
  EXPECT_TRUE(files.count("alignments.csv"));
  EXPECT_TRUE(files.count("lexicon.txt"));
  EXPECT_TRUE(files.count("clips.json"));
  EXPECT_TRUE(files.count("audio/clip_00011.wav"));
  EXPECT_EQ(files["lexicon.txt"], "kw0\nkw1\n");
  json summary = json::parse(run({"synth", "--clips", "1", "--seed", "9", "--out", (dir_ / "s9").string()}).out);
  EXPECT_EQ(summary["seed"], 9);
}

TEST_F(CliTest, SynthWithNoClips) {
  const fs::path empty = dir_ / "empty";
  CliResult r = run({"synth", "--clips", "0", "--out", empty.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(read_file(empty / "manifest.json")), json::array());
  EXPECT_TRUE(json::parse(read_file(empty / "clips.json"))["clips"].empty());
}

TEST_F(CliTest, SynthOutputLoadsBackThroughPrepare) {
  const fs::path prepared = dir_ / "prepared";
  // synth cuts one window per clip, which is what stride T gives.
  CliResult r = run({"prepare", "--manifest", (data_ / "manifest.json").string(), "--alignments",
               (data_ / "alignments.csv").string(), "--lexicon", (data_ / "lexicon.txt").string(),
               "--stride", "1.0", "--out", prepared.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  Lexicon lex = Lexicon::load(data_ / "lexicon.txt");
  EXPECT_EQ(Lexicon::load(prepared / "lexicon.txt"), lex);
  EXPECT_EQ(parse_clip_manifest(read_file(prepared / "clips.json"), lex, prepared),
            parse_clip_manifest(read_file(data_ / "clips.json"), lex, data_));
}

TEST_F(CliTest, PrepareIsIdempotent) {
  std::vector<std::string> args{"prepare", "--manifest", (data_ / "manifest.json").string(),
                                "--alignments", (data_ / "alignments.csv").string(), "--out",
                                (dir_ / "p1").string()};
  ASSERT_EQ(run(args).code, 0);
  auto first = tree(dir_ / "p1");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(tree(dir_ / "p1"), first);
  // Default stride T/2 on 1 s files still gives one window each.
  EXPECT_EQ(json::parse(first["clips.json"])["clips"].size(), 12u);
}

TEST_F(CliTest, PrepareReportsMalformedRowLine) {
  std::string csv = read_file(data_ / "alignments.csv");
  csv += "clip_00003,kw1,0.5000\n";
  const auto bad_line = std::count(csv.begin(), csv.end(), '\n');
  write_file_atomic(dir_ / "bad.csv", csv);
  CliResult r = run({"prepare", "--manifest", (data_ / "manifest.json").string(), "--alignments",
               (dir_ / "bad.csv").string(), "--out", (dir_ / "p").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find(":" + std::to_string(bad_line) + ":"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "p" / "clips.json"));
}

TEST_F(CliTest, PrepareEmptyManifestWarns) {
  write_file_atomic(dir_ / "m.json", "[]");
  write_file_atomic(dir_ / "a.csv", "utt_id,word,start,end\n");
  CliResult r = run({"prepare", "--manifest", (dir_ / "m.json").string(), "--alignments",
               (dir_ / "a.csv").string(), "--out", (dir_ / "p").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_TRUE(json::parse(read_file(dir_ / "p" / "clips.json"))["clips"].empty());
}

TEST_F(CliTest, ZeroLearningRateCheckpointEqualsInitialization) {
  const fs::path ckpt = dir_ / "lr0.ckpt";
  CliResult r = run({"train", "--clips", (data_ / "clips.json").string(), "--epochs", "2", "--lr", "0",
               "--batch-size", "4", "--seed", "11", "--out", ckpt.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  Checkpoint c = load_checkpoint(ckpt);
  EXPECT_EQ(c.state.epochs_done, 2);
  Model fresh(BackboneSpec::preset("tiny", 257, 99), ModelHead::detection({1.0, 6, 2, 2}), 11);
  EXPECT_EQ(trainable(c.model), trainable(fresh));

  // One loss line per step: ceil(10 / 4) steps per epoch after a 2-clip holdout.
  std::ifstream log(ckpt.string() + ".log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    json j = json::parse(line);
    for (const char* key : {"center", "duration", "obj_conf", "noobj_conf", "class", "total"}) {
      EXPECT_TRUE(j.contains(key));
    }
    ++lines;
  }
  EXPECT_EQ(lines, 2 * 3);
}

TEST_F(CliTest, ZeroEpochsWritesInitialization) {
  const fs::path ckpt = dir_ / "e0.ckpt";
  ASSERT_EQ(run({"train", "--clips", (data_ / "clips.json").string(), "--epochs", "0", "--seed",
                 "4", "--out", ckpt.string()}).code, 0);
  Model fresh(BackboneSpec::preset("tiny", 257, 99), ModelHead::detection({1.0, 6, 2, 2}), 4);
  EXPECT_EQ(all_params(load_checkpoint(ckpt).model), all_params(fresh));
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  const std::string clips = (data_ / "clips.json").string();
  const fs::path straight = dir_ / "straight.ckpt", resumed = dir_ / "resumed.ckpt";
  ASSERT_EQ(run({"train", "--clips", clips, "--epochs", "2", "--batch-size", "4", "--out",
                 straight.string()}).code, 0);
  ASSERT_EQ(run({"train", "--clips", clips, "--epochs", "1", "--batch-size", "4", "--out",
                 resumed.string()}).code, 0);
  CliResult r = run({"train", "--clips", clips, "--epochs", "2", "--batch-size", "4", "--resume",
               "--out", resumed.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  Checkpoint a = load_checkpoint(straight), b = load_checkpoint(resumed);
  EXPECT_EQ(a.state.epochs_done, 2);
  EXPECT_EQ(b.state.epochs_done, 2);
  EXPECT_EQ(all_params(a.model), all_params(b.model));
  EXPECT_EQ(read_file(straight.string() + ".log.jsonl"), read_file(resumed.string() + ".log.jsonl"));
}

TEST_F(CliTest, ConfigFileAndOverrides) {
  write_file_atomic(dir_ / "run.toml",
                    "# tiny run\n[optimizer]\nepochs = 1\nbatch_size = 5\nseed = 21\n"
                    "[paths]\nclips = \"" + (data_ / "clips.json").string() + "\"\n");
  const fs::path ckpt = dir_ / "cfg.ckpt";
  CliResult r = run({"train", "--config", (dir_ / "run.toml").string(), "--set", "optimizer.epochs=2",
               "--out", ckpt.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  Checkpoint c = load_checkpoint(ckpt);
  EXPECT_EQ(c.state.epochs_done, 2);
  EXPECT_EQ(c.metadata["seed"], 21);
  EXPECT_EQ(c.metadata["batch_size"], 5);

  write_file_atomic(dir_ / "typo.toml", "[optimizer]\nepoch = 1\n");
  EXPECT_NE(run({"train", "--config", (dir_ / "typo.toml").string(), "--out", ckpt.string()}).code, 0);
}

TEST(Config, ParsesSectionsAndValidates) {
  auto kv = KeyValueConfig::parse(
      "[grid]\ncells = 4  # comment\nduration = 2.0\n[loss]\nmode = \"paper_literal\"\n"
      "[model]\nbackbone = vgg11star\n");
  RunConfig cfg = RunConfig::from(kv);
  EXPECT_EQ(cfg.grid.cells, 4);
  EXPECT_EQ(cfg.grid.duration, 2.0);
  EXPECT_EQ(cfg.loss_mode, LossMode::kPaperLiteral);
  EXPECT_EQ(cfg.backbone, "vgg11star");
  EXPECT_EQ(cfg.stride, 1.0);  // defaults to half the clip
  EXPECT_THROW(RunConfig::from(KeyValueConfig::parse("[grid]\ncells = many\n")), InvalidInput);
  EXPECT_THROW(RunConfig::from(KeyValueConfig::parse("[nope]\nx = 1\n")), InvalidInput);
  EXPECT_THROW(parse_loss_mode("l1"), InvalidInput);
}

TEST_F(CliTest, EvaluateOracleDetections) {
  Lexicon lex = Lexicon::load(data_ / "lexicon.txt");
  auto clips = parse_clip_manifest(read_file(data_ / "clips.json"), lex, data_);
  std::vector<UttDetection> dets;
  for (const auto& c : clips) {
    for (const auto& e : c.events) dets.push_back({c.clip_id, {e.keyword, e.interval(), 1.0, 0, 0}});
  }
  write_file_atomic(dir_ / "oracle.csv", format_detections(dets, lex, DetectionFormat::kCsv));
  std::vector<std::string> args{"evaluate", "--detections", (dir_ / "oracle.csv").string(),
                                "--lexicon", (data_ / "lexicon.txt").string(), "--clips",
                                (data_ / "clips.json").string(), "--sweep", "--out",
                                (dir_ / "report").string()};
  CliResult r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  json rep = json::parse(read_file(dir_ / "report" / "report.json"));
  EXPECT_EQ(rep["precision"], 1.0);
  EXPECT_EQ(rep["recall"], 1.0);
  EXPECT_EQ(rep["f1"], 1.0);
  EXPECT_EQ(rep["actual"], 1.0);
  EXPECT_EQ(rep["mean_iou"], 1.0);
  EXPECT_EQ(rep["mtwv"]["value"], 1.0);
  EXPECT_EQ(rep["atwv"], 1.0);
  auto grid = default_theta_grid();
  const double theta = rep["theta"].get<double>();
  EXPECT_TRUE(std::any_of(grid.begin(), grid.end(), [&](double t) { return t == theta; }));
  EXPECT_TRUE(rep.contains("seed"));
  const std::string first = read_file(dir_ / "report" / "report.json");
  const std::string curves = read_file(dir_ / "report" / "curves.csv");
  EXPECT_EQ(curves.substr(0, curves.find('\n')), "theta,precision,recall,f1,actual,twv");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(read_file(dir_ / "report" / "report.json"), first);

  // The same detections as JSON lines give the same measures.
  write_file_atomic(dir_ / "oracle.jsonl", format_detections(dets, lex, DetectionFormat::kJsonLines));
  args[2] = (dir_ / "oracle.jsonl").string();
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(json::parse(read_file(dir_ / "report" / "report.json"))["f1"], 1.0);
}

TEST_F(CliTest, EvaluateRejectsLexiconMismatch) {
  const fs::path ckpt = dir_ / "m.ckpt";
  ASSERT_EQ(run({"train", "--clips", (data_ / "clips.json").string(), "--epochs", "0", "--out",
                 ckpt.string()}).code, 0);
  Lexicon({"kw1", "kw0"}).save(dir_ / "swapped.txt");
  CliResult r = run({"evaluate", "--checkpoint", ckpt.string(), "--lexicon", (dir_ / "swapped.txt").string(),
               "--clips", (data_ / "clips.json").string(), "--out", (dir_ / "rep").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("lexicon"), std::string::npos) << r.err;

  const fs::path other = dir_ / "three";
  ASSERT_EQ(run({"synth", "--clips", "2", "--keywords", "3", "--out", other.string()}).code, 0);
  r = run({"evaluate", "--checkpoint", ckpt.string(), "--clips", (other / "clips.json").string(),
           "--out", (dir_ / "rep").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(fs::exists(dir_ / "rep" / "report.json"));
}

TEST_F(CliTest, DecodeOrderingAndFailures) {
  const fs::path ckpt = dir_ / "d.ckpt";
  ASSERT_EQ(run({"train", "--clips", (data_ / "clips.json").string(), "--epochs", "0", "--out",
                 ckpt.string()}).code, 0);
  // A 2.3 s file exercises the sliding windows and the tail window.
  SynthConfig sc;
  sc.n_clips = 3;
  sc.n_keywords = 2;
  Waveform longer;
  for (const auto& c : synth_corpus(sc).clips) longer.insert(longer.end(), c.samples.begin(), c.samples.end());
  longer.resize(36800);
  write_wav(dir_ / "long.wav", {16000, longer});
  const std::string wav = (dir_ / "long.wav").string();

  CliResult r = run({"decode", "--checkpoint", ckpt.string(), "--theta", "0", wav, wav});
  ASSERT_EQ(r.code, 0) << r.err;
  Lexicon lex = Lexicon::load(data_ / "lexicon.txt");
  auto dets = parse_detections(r.out, lex, DetectionFormat::kCsv);
  ASSERT_FALSE(dets.empty());
  ASSERT_EQ(dets.size() % 2, 0u);
  const std::size_t half = dets.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    EXPECT_EQ(dets[i].record, dets[i + half].record);
    if (i > 0) EXPECT_LE(dets[i - 1].record.interval.start, dets[i].record.interval.start);
    EXPECT_LE(dets[i].record.interval.end, 2.3 + 1e-9);
  }
  // Windows at 0, 0.5, 1.0 and the 1.3 s tail, six cells each.
  EXPECT_EQ(half, 24u);

  CliResult jl = run({"decode", "--checkpoint", ckpt.string(), "--theta", "0", "--format", "jsonl", wav});
  EXPECT_EQ(parse_detections(jl.out, lex, DetectionFormat::kJsonLines).size(), half);

  CliResult partial = run({"decode", "--checkpoint", ckpt.string(), (dir_ / "missing.wav").string(), wav});
  EXPECT_EQ(partial.code, 0);
  EXPECT_NE(partial.err.find("missing.wav"), std::string::npos);
  CliResult none = run({"decode", "--checkpoint", ckpt.string(), (dir_ / "missing.wav").string()});
  EXPECT_NE(none.code, 0);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"synth", "--clips", "x"}).code, cli::kUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
  EXPECT_NE(run({"train"}).code, cli::kOk);
  EXPECT_NE(run({"noise-eval", "--kind", "pink", "--checkpoint", "/nonexistent"}).code, cli::kOk);
}
