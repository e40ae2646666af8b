#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace exposcope {

using TokenId = std::uint32_t;

// Id 0 separates documents and is never assigned to a word.
inline constexpr TokenId kSeparator = 0;
// Stand-in for a query word missing from the vocabulary; never occurs in a corpus.
inline constexpr TokenId kUnknownToken = 0xFFFFFFFFu;

struct TokenizerConfig {
  bool case_fold = true;
  bool strip_punctuation = true;

  bool operator==(const TokenizerConfig&) const = default;
};

void to_json(nlohmann::json& j, const TokenizerConfig& cfg);
void from_json(const nlohmann::json& j, TokenizerConfig& cfg);

// Splits on Unicode whitespace, optionally lowercases and trims punctuation
// from both ends of each word, and drops words that end up empty.
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg);

class Vocabulary {
 public:
  // Id of `token`, assigning the next dense id when unseen.
  TokenId intern(std::string_view token);
  // Id of `token`, or kUnknownToken.
  TokenId lookup(std::string_view token) const;
  const std::string& token(TokenId id) const;

  // Number of ids including the separator.
  std::size_t size() const { return tokens_.size() + 1; }
  std::size_t word_count() const { return tokens_.size(); }

  // One token per line; line i (0-based) holds id i + 1.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace exposcope
