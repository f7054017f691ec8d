#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mdvc {

// Lowercases, detaches punctuation into standalone tokens and splits on
// whitespace. Apostrophes and hyphens stay inside words.
std::vector<std::string> tokenize(std::string_view text);

// tokenize() joined by single spaces.
std::string normalize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kStart = 1;
  static constexpr std::size_t kEnd = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();

  // Words seen at least min_freq times, most frequent first (ties
  // alphabetical), after the four reserved entries.
  static Vocabulary build(const std::vector<std::string>& corpus, std::size_t min_freq = 1);
  // Full id-ordered token list including the reserved entries.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(std::string_view text) const;
  std::vector<std::size_t> encode_tokens(const std::vector<std::string>& tokens) const;
  // Drops pad/start/end ids and joins the rest with single spaces.
  std::string decode(std::span<const std::size_t> ids) const;
  std::vector<std::string> decode_tokens(std::span<const std::size_t> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mdvc
