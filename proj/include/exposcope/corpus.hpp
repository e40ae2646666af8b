#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "exposcope/tokenizer.hpp"

namespace exposcope {

// Documents joined by kSeparator, with no leading or trailing separator.
struct TokenizedCorpus {
  std::vector<TokenId> tokens;
  std::vector<std::uint64_t> doc_starts;  // strictly increasing offsets into `tokens`
  std::vector<std::string> doc_ids;
  std::vector<std::string> skipped_ids;   // documents with no tokens

  std::size_t doc_count() const { return doc_starts.size(); }
  // Word tokens only; separators excluded.
  std::uint64_t token_count() const;
  std::uint64_t doc_length(std::size_t doc) const;

  // FNV-1a over the token stream and document boundaries.
  std::string checksum() const;
};

struct Document {
  std::string id;
  std::string text;
};

// Streaming tokenization; `finish` yields the corpus and its vocabulary.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(TokenizerConfig cfg) : cfg_(cfg) {}

  // Returns false when the document produced no tokens and was skipped.
  bool add(std::string_view id, std::string_view text);

  const TokenizerConfig& config() const { return cfg_; }
  TokenizedCorpus& corpus() { return corpus_; }
  Vocabulary& vocabulary() { return vocab_; }

 private:
  TokenizerConfig cfg_;
  TokenizedCorpus corpus_;
  Vocabulary vocab_;
};

struct TokenizeResult {
  TokenizedCorpus corpus;
  Vocabulary vocabulary;
};

TokenizeResult tokenize_corpus(const std::vector<Document>& docs, const TokenizerConfig& cfg);

// Newline-delimited JSON objects with string fields `id` and `text`; gzip accepted.
// Malformed records raise IoError naming the line (and id, when readable).
void read_corpus_jsonl(const std::filesystem::path& path,
                       const std::function<void(Document&&)>& sink);

TokenizeResult tokenize_corpus_file(const std::filesystem::path& path, const TokenizerConfig& cfg);

}  // namespace exposcope
