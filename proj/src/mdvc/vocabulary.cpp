#include "mdvc/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "mdvc/error.hpp"

namespace mdvc {

namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kTokens = {"<pad>", "<s>", "</s>", "<unk>"};
  return kTokens;
}

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c == '-' || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::string normalize(std::string_view text) {
  std::string out;
  for (const auto& tok : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

Vocabulary::Vocabulary() : tokens_(reserved_tokens()) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus, std::size_t min_freq) {
  if (corpus.empty()) fail(ErrorCode::kInvalidArgument, "vocabulary: corpus is empty");
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus) {
    for (auto& tok : tokenize(line)) ++counts[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  const auto& reserved = reserved_tokens();
  for (auto& [tok, n] : counts) {
    if (n >= std::max<std::size_t>(min_freq, 1) &&
        std::find(reserved.begin(), reserved.end(), tok) == reserved.end()) {
      kept.emplace_back(tok, n);
    }
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = reserved;
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < kReserved || !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    fail(ErrorCode::kConfig, "vocabulary: token list must begin with <pad> <s> </s> <unk>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second) {
      fail(ErrorCode::kConfig, "vocabulary: duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) {
    fail(ErrorCode::kIndex, "vocabulary: id " + std::to_string(id) + " >= size " + std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

std::vector<std::size_t> Vocabulary::encode(std::string_view text) const { return encode_tokens(tokenize(text)); }

std::vector<std::size_t> Vocabulary::encode_tokens(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode_tokens(std::span<const std::size_t> ids) const {
  std::vector<std::string> out;
  for (std::size_t id : ids) {
    if (id == kPad || id == kStart || id == kEnd) continue;
    out.push_back(token(id));
  }
  return out;
}

std::string Vocabulary::decode(std::span<const std::size_t> ids) const {
  std::string out;
  for (const auto& tok : decode_tokens(ids)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace mdvc
