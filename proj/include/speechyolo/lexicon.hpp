#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace speechyolo {

// Ordered keyword list with its inverse map; index = position.
class Lexicon {
 public:
  Lexicon() = default;
  // Throws InvalidInput on duplicate or empty words.
  explicit Lexicon(std::vector<std::string> words);

  int size() const { return static_cast<int>(words_.size()); }
  const std::string& word(int index) const { return words_.at(index); }
  std::optional<int> index(const std::string& word) const;
  const std::vector<std::string>& words() const { return words_; }

  // One word per line; line number (0-based) is the index.
  std::string to_text() const;
  static Lexicon from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Lexicon load(const std::filesystem::path& path);

  bool operator==(const Lexicon& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace speechyolo
