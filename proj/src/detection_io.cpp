#include "speechyolo/detection_io.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "speechyolo/csv.hpp"
#include "speechyolo/error.hpp"

namespace speechyolo {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

int keyword_index(const Lexicon& lexicon, const std::string& word, std::size_t line) {
  auto k = lexicon.index(word);
  if (!k) throw FormatError("unknown keyword '" + word + "'", line);
  return *k;
}

}  // namespace

std::string format_detections(const std::vector<UttDetection>& dets, const Lexicon& lexicon,
                              DetectionFormat format) {
  std::string out;
  if (format == DetectionFormat::kCsv) out += "utt_id,keyword,start_s,end_s,score,cell\n";
  for (const auto& d : dets) {
    const auto& r = d.record;
    if (format == DetectionFormat::kCsv) {
      out += csv_escape(d.utt_id) + "," + csv_escape(lexicon.word(r.keyword)) + "," +
             fixed(r.interval.start, 4) + "," + fixed(r.interval.end, 4) + "," +
             fixed(r.score, 6) + "," + std::to_string(r.cell) + "\n";
    } else {
      // Numbers are emitted as literal fixed-point tokens.
      out += "{\"utt_id\":" + nlohmann::json(d.utt_id).dump() +
             ",\"keyword\":" + nlohmann::json(lexicon.word(r.keyword)).dump() +
             ",\"start_s\":" + fixed(r.interval.start, 4) +
             ",\"end_s\":" + fixed(r.interval.end, 4) + ",\"score\":" + fixed(r.score, 6) +
             ",\"cell\":" + std::to_string(r.cell) + "}\n";
    }
  }
  return out;
}

std::vector<UttDetection> parse_detections(const std::string& text, const Lexicon& lexicon,
                                           DetectionFormat format) {
  std::vector<UttDetection> out;
  if (format == DetectionFormat::kCsv) {
    auto rows = parse_csv(text);
    if (rows.empty()) return out;
    const std::vector<std::string> header{"utt_id", "keyword", "start_s", "end_s", "score", "cell"};
    if (rows.front().fields != header) throw FormatError("bad detections CSV header", 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.fields.size() != 6) {
        throw FormatError("expected 6 fields in detections row", row.line);
      }
      UttDetection d;
      d.utt_id = row.fields[0];
      d.record.keyword = keyword_index(lexicon, row.fields[1], row.line);
      d.record.interval = {parse_double(row.fields[2], row.line),
                           parse_double(row.fields[3], row.line)};
      d.record.score = parse_double(row.fields[4], row.line);
      d.record.cell = static_cast<int>(parse_double(row.fields[5], row.line));
      out.push_back(std::move(d));
    }
    return out;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      UttDetection d;
      d.utt_id = j.at("utt_id").get<std::string>();
      d.record.keyword = keyword_index(lexicon, j.at("keyword").get<std::string>(), lineno);
      d.record.interval = {j.at("start_s").get<double>(), j.at("end_s").get<double>()};
      d.record.score = j.at("score").get<double>();
      d.record.cell = j.at("cell").get<int>();
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad detection record: ") + e.what(), lineno);
    }
  }
  return out;
}

}  // namespace speechyolo
