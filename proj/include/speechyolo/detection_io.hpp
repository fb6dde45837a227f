#pragma once

#include <string>
#include <vector>

#include "speechyolo/grid.hpp"
#include "speechyolo/lexicon.hpp"

namespace speechyolo {

struct UttDetection {
  std::string utt_id;
  DetectionRecord record;
};

enum class DetectionFormat { kCsv, kJsonLines };

// Columns: utt_id, keyword, start_s (4 decimals), end_s (4 decimals),
// score (6 decimals), cell. CSV output starts with a header line.
std::string format_detections(const std::vector<UttDetection>& dets, const Lexicon& lexicon,
                              DetectionFormat format);

// Inverse of format_detections up to the printed precision. The box index
// is not serialized and reads back as 0.
std::vector<UttDetection> parse_detections(const std::string& text, const Lexicon& lexicon,
                                           DetectionFormat format);

}  // namespace speechyolo
