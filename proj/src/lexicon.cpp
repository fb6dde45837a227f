#include "speechyolo/lexicon.hpp"

#include <sstream>

#include "speechyolo/error.hpp"
#include "speechyolo/io_util.hpp"

namespace speechyolo {

Lexicon::Lexicon(std::vector<std::string> words) : words_(std::move(words)) {
  for (int i = 0; i < size(); ++i) {
    if (words_[i].empty()) throw InvalidInput("lexicon entries must be non-empty");
    if (!index_.emplace(words_[i], i).second) {
      throw InvalidInput("duplicate lexicon entry '" + words_[i] + "'");
    }
  }
}

std::optional<int> Lexicon::index(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Lexicon::to_text() const {
  std::string out;
  for (const auto& w : words_) out += w + "\n";
  return out;
}

Lexicon Lexicon::from_text(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return Lexicon(std::move(words));
}

void Lexicon::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_text());
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  return from_text(read_file(path));
}

}  // namespace speechyolo
