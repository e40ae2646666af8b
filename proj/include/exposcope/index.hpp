#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exposcope/corpus.hpp"
#include "exposcope/mapped_file.hpp"
#include "exposcope/tokenizer.hpp"

namespace exposcope {

// Non-empty token sequence without separators.
class PhraseQuery {
 public:
  explicit PhraseQuery(std::vector<TokenId> tokens);

  std::span<const TokenId> tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

  auto operator<=>(const PhraseQuery&) const = default;

 private:
  std::vector<TokenId> tokens_;
};

// An entity name and its aliases; any one matching counts.
class DisjunctiveQuery {
 public:
  explicit DisjunctiveQuery(std::vector<PhraseQuery> phrases);

  const std::vector<PhraseQuery>& phrases() const { return phrases_; }

 private:
  std::vector<PhraseQuery> phrases_;
};

struct CnfQuery {
  std::vector<DisjunctiveQuery> clauses;
};

// Token span [start, end) inside one document; offsets are relative to the document.
struct MatchInterval {
  std::uint64_t document = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  auto operator<=>(const MatchInterval&) const = default;
};

struct ShardInfo {
  std::uint32_t id = 0;
  std::uint64_t first_document = 0;
  std::uint64_t documents = 0;
  std::uint64_t tokens = 0;  // words, separators excluded
  std::string tokens_checksum;
  std::string sa_checksum;
  std::string docs_checksum;
};

// One contiguous run of documents with its own suffix array. Storage is
// either owned (freshly built) or memory-mapped (opened from disk).
class Shard {
 public:
  Shard(ShardInfo info, std::vector<TokenId> tokens, std::vector<std::uint64_t> sa,
        std::vector<std::uint64_t> doc_starts);
  Shard(ShardInfo info, MappedFile tokens, MappedFile sa, MappedFile doc_starts);

  const ShardInfo& info() const { return info_; }
  std::span<const TokenId> tokens() const { return tokens_; }
  std::span<const std::uint64_t> suffix_array() const { return sa_; }
  std::span<const std::uint64_t> doc_starts() const { return doc_starts_; }

  // Local document index containing token position `pos`.
  std::size_t document_at(std::uint64_t pos) const;

 private:
  ShardInfo info_;
  std::vector<TokenId> owned_tokens_;
  std::vector<std::uint64_t> owned_sa_;
  std::vector<std::uint64_t> owned_docs_;
  MappedFile mapped_tokens_, mapped_sa_, mapped_docs_;
  std::span<const TokenId> tokens_;
  std::span<const std::uint64_t> sa_;
  std::span<const std::uint64_t> doc_starts_;
};

struct OpenOptions {
  bool verify_checksums = true;
};

class SuffixArrayIndex {
 public:
  // Partitions documents into `shard_count` contiguous runs balanced by token
  // count and builds each shard's suffix array, in parallel when threads allow.
  static SuffixArrayIndex build(const TokenizedCorpus& corpus, Vocabulary vocabulary,
                                const TokenizerConfig& tokenizer, std::size_t shard_count,
                                unsigned threads = 0);

  // Writes the index atomically: everything lands in a temp directory that is
  // renamed into place once the manifest is written.
  void write(const std::filesystem::path& dir, bool force = false) const;

  static SuffixArrayIndex open(const std::filesystem::path& dir, OpenOptions options = {});

  const Vocabulary& vocabulary() const { return vocab_; }
  const TokenizerConfig& tokenizer() const { return tokenizer_; }
  const std::vector<Shard>& shards() const { return shards_; }
  std::uint64_t token_count() const;
  std::uint64_t document_count() const;
  const std::string& checksum() const { return checksum_; }

  // Tokenizes `text` with the index's tokenizer and maps words to ids; unknown
  // words map to kUnknownToken. nullopt when the text yields no tokens.
  std::optional<PhraseQuery> encode(std::string_view text) const;

 private:
  SuffixArrayIndex() = default;

  Vocabulary vocab_;
  TokenizerConfig tokenizer_;
  std::vector<Shard> shards_;
  std::string checksum_;
};

// Occurrences of `q`, overlapping ones included.
std::uint64_t count_phrase(const SuffixArrayIndex& index, const PhraseQuery& q);

// First `limit` occurrences ordered by (document, start).
std::vector<MatchInterval> find_matches(const SuffixArrayIndex& index, const PhraseQuery& q,
                                        std::uint64_t limit);

// Matches of all phrases, with intervals that share a token position merged
// transitively; returns the number of merged intervals. Adjacent intervals
// stay separate.
std::uint64_t exposure_count(const SuffixArrayIndex& index, const DisjunctiveQuery& q);

// Documents in which every clause has at least one matching phrase.
std::uint64_t cnf_doc_count(const SuffixArrayIndex& index, const CnfQuery& q);

}  // namespace exposcope
