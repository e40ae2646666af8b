#include "exposcope/tokenizer.hpp"

#include <json.hpp>

#include "exposcope/error.hpp"

namespace exposcope {

void to_json(nlohmann::json& j, const TokenizerConfig& cfg) {
  j = nlohmann::json{{"case_fold", cfg.case_fold}, {"strip_punctuation", cfg.strip_punctuation}};
}

void from_json(const nlohmann::json& j, TokenizerConfig& cfg) {
  cfg.case_fold = j.value("case_fold", true);
  cfg.strip_punctuation = j.value("strip_punctuation", true);
}

namespace {

struct Decoded {
  char32_t cp;
  std::size_t len;
};

// Invalid bytes decode as themselves with length 1 so that no input is lost.
Decoded decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
  }
  return {b0, 1};
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  switch (cp) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011);
}

// Simple one-to-one lowercase mapping for Latin, Greek and Cyrillic letters.
char32_t fold(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x100 && cp <= 0x17F) {
    // Latin Extended-A alternates upper/lower, with a parity flip in 0x139..0x148 and 0x179..0x17E.
    const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
    if (cp == 0x178) return 0xFF;
    if (cp == 0x130 || cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
    const bool upper = odd_upper ? (cp % 2 == 1) : (cp % 2 == 0);
    return upper ? cp + 1 : cp;
  }
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

std::string finish_word(std::string_view raw, const TokenizerConfig& cfg) {
  std::vector<char32_t> cps;
  for (std::size_t i = 0; i < raw.size();) {
    const auto d = decode_utf8(raw, i);
    cps.push_back(d.cp);
    i += d.len;
  }
  std::size_t lo = 0, hi = cps.size();
  if (cfg.strip_punctuation) {
    while (lo < hi && is_punct(cps[lo])) ++lo;
    while (hi > lo && is_punct(cps[hi - 1])) --hi;
  }
  std::string out;
  out.reserve(raw.size());
  for (std::size_t k = lo; k < hi; ++k) append_utf8(out, cfg.case_fold ? fold(cps[k]) : cps[k]);
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg) {
  std::vector<std::string> out;
  std::size_t start = std::string_view::npos;
  std::size_t i = 0;
  auto flush = [&](std::size_t end) {
    if (start == std::string_view::npos) return;
    auto w = finish_word(text.substr(start, end - start), cfg);
    if (!w.empty()) out.push_back(std::move(w));
    start = std::string_view::npos;
  };
  while (i < text.size()) {
    const auto d = decode_utf8(text, i);
    if (is_space(d.cp)) {
      flush(i);
    } else if (start == std::string_view::npos) {
      start = i;
    }
    i += d.len;
  }
  flush(text.size());
  return out;
}

TokenId Vocabulary::intern(std::string_view token) {
  auto it = ids_.find(std::string(token));
  if (it != ids_.end()) return it->second;
  if (tokens_.size() + 1 >= kUnknownToken) throw DomainError("vocabulary exceeds 32-bit id space");
  const auto id = static_cast<TokenId>(tokens_.size() + 1);
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

TokenId Vocabulary::lookup(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknownToken : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id == kSeparator || id > tokens_.size()) throw DomainError("token id out of range");
  return tokens_[id - 1];
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out.push_back('\n');
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  Vocabulary v;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw IntegrityError("vocabulary not newline-terminated");
    auto tok = text.substr(pos, nl - pos);
    if (tok.empty()) throw IntegrityError("empty vocabulary entry");
    const auto before = v.word_count();
    v.intern(tok);
    if (v.word_count() == before) throw IntegrityError("duplicate vocabulary entry: " + std::string(tok));
    pos = nl + 1;
  }
  return v;
}

}  // namespace exposcope
