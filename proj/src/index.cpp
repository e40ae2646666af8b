#include "exposcope/index.hpp"

#include <algorithm>
#include <atomic>
#include <iterator>
#include <bit>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "exposcope/checksum.hpp"
#include "exposcope/error.hpp"
#include "exposcope/io.hpp"
#include "exposcope/suffix_array.hpp"

static_assert(std::endian::native == std::endian::little,
              "index files are little-endian and are mapped without byte swapping");

namespace exposcope {

namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

std::string shard_dir_name(std::uint32_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shard-%04u", id);
  return buf;
}

template <typename T>
std::string bytes_checksum(std::span<const T> values) {
  Fnv1a64 h;
  h.update_values(values);
  return h.hex();
}

template <typename T>
void write_binary(const fs::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw IoError("write failed for " + path.string());
}

// Contiguous document runs whose word counts approach total / k.
std::vector<std::size_t> partition_documents(const TokenizedCorpus& corpus, std::size_t k) {
  const std::size_t docs = corpus.doc_count();
  const double total = static_cast<double>(corpus.token_count());
  std::vector<std::size_t> first(k);
  std::size_t doc = 0;
  double cumulative = 0;
  for (std::size_t s = 0; s < k; ++s) {
    first[s] = doc;
    const double target = total * static_cast<double>(s + 1) / static_cast<double>(k);
    // Each shard takes at least one document and leaves one for each later shard.
    do {
      cumulative += static_cast<double>(corpus.doc_length(doc));
      ++doc;
    } while (doc < docs - (k - s - 1) &&
             cumulative + static_cast<double>(corpus.doc_length(doc)) / 2 <= target);
    if (s + 1 == k) doc = docs;
  }
  return first;
}

}  // namespace

PhraseQuery::PhraseQuery(std::vector<TokenId> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw ConfigError("phrase query is empty");
  if (std::find(tokens_.begin(), tokens_.end(), kSeparator) != tokens_.end()) {
    throw ConfigError("phrase query contains the document separator");
  }
}

DisjunctiveQuery::DisjunctiveQuery(std::vector<PhraseQuery> phrases) : phrases_(std::move(phrases)) {
  if (phrases_.empty()) throw ConfigError("disjunctive query has no phrases");
  std::set<PhraseQuery> seen(phrases_.begin(), phrases_.end());
  if (seen.size() != phrases_.size()) throw ConfigError("disjunctive query repeats a phrase");
}

Shard::Shard(ShardInfo info, std::vector<TokenId> tokens, std::vector<std::uint64_t> sa,
             std::vector<std::uint64_t> doc_starts)
    : info_(std::move(info)),
      owned_tokens_(std::move(tokens)),
      owned_sa_(std::move(sa)),
      owned_docs_(std::move(doc_starts)),
      tokens_(owned_tokens_),
      sa_(owned_sa_),
      doc_starts_(owned_docs_) {}

Shard::Shard(ShardInfo info, MappedFile tokens, MappedFile sa, MappedFile doc_starts)
    : info_(std::move(info)),
      mapped_tokens_(std::move(tokens)),
      mapped_sa_(std::move(sa)),
      mapped_docs_(std::move(doc_starts)),
      tokens_(mapped_tokens_.as<TokenId>()),
      sa_(mapped_sa_.as<std::uint64_t>()),
      doc_starts_(mapped_docs_.as<std::uint64_t>()) {}

std::size_t Shard::document_at(std::uint64_t pos) const {
  const auto it = std::upper_bound(doc_starts_.begin(), doc_starts_.end(), pos);
  return static_cast<std::size_t>(it - doc_starts_.begin()) - 1;
}

SuffixArrayIndex SuffixArrayIndex::build(const TokenizedCorpus& corpus, Vocabulary vocabulary,
                                         const TokenizerConfig& tokenizer, std::size_t shard_count,
                                         unsigned threads) {
  if (shard_count == 0) throw ConfigError("shard count must be positive");
  if (corpus.doc_count() == 0) throw ConfigError("corpus has no documents");
  if (shard_count > corpus.doc_count()) {
    throw ConfigError("shard count " + std::to_string(shard_count) + " exceeds document count " +
                      std::to_string(corpus.doc_count()));
  }

  const auto first = partition_documents(corpus, shard_count);

  struct Pending {
    ShardInfo info;
    std::vector<TokenId> tokens;
    std::vector<std::uint64_t> sa;
    std::vector<std::uint64_t> docs;
  };
  std::vector<Pending> pending(shard_count);
  for (std::size_t s = 0; s < shard_count; ++s) {
    const std::size_t d0 = first[s];
    const std::size_t d1 = s + 1 < shard_count ? first[s + 1] : corpus.doc_count();
    const std::uint64_t begin = corpus.doc_starts[d0];
    const std::uint64_t end = d1 < corpus.doc_count() ? corpus.doc_starts[d1] - 1 : corpus.tokens.size();
    auto& p = pending[s];
    p.tokens.assign(corpus.tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                    corpus.tokens.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t d = d0; d < d1; ++d) p.docs.push_back(corpus.doc_starts[d] - begin);
    p.info.id = static_cast<std::uint32_t>(s);
    p.info.first_document = d0;
    p.info.documents = d1 - d0;
    p.info.tokens = p.tokens.size() - (p.docs.size() - 1);
  }

  auto build_one = [&](std::size_t s) {
    auto& p = pending[s];
    p.sa = build_suffix_array(p.tokens);
    p.info.tokens_checksum = bytes_checksum(std::span<const TokenId>(p.tokens));
    p.info.sa_checksum = bytes_checksum(std::span<const std::uint64_t>(p.sa));
    p.info.docs_checksum = bytes_checksum(std::span<const std::uint64_t>(p.docs));
  };
  unsigned workers = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, shard_count));
  if (workers <= 1) {
    for (std::size_t s = 0; s < shard_count; ++s) build_one(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t s = next++; s < shard_count; s = next++) build_one(s);
      });
    }
  }

  SuffixArrayIndex index;
  index.vocab_ = std::move(vocabulary);
  index.tokenizer_ = tokenizer;
  index.checksum_ = corpus.checksum();
  index.shards_.reserve(shard_count);
  for (auto& p : pending) {
    index.shards_.emplace_back(std::move(p.info), std::move(p.tokens), std::move(p.sa), std::move(p.docs));
  }
  return index;
}

std::uint64_t SuffixArrayIndex::token_count() const {
  std::uint64_t n = 0;
  for (const auto& s : shards_) n += s.info().tokens;
  return n;
}

std::uint64_t SuffixArrayIndex::document_count() const {
  std::uint64_t n = 0;
  for (const auto& s : shards_) n += s.info().documents;
  return n;
}

std::optional<PhraseQuery> SuffixArrayIndex::encode(std::string_view text) const {
  const auto words = tokenize(text, tokenizer_);
  if (words.empty()) return std::nullopt;
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab_.lookup(w));
  return PhraseQuery(std::move(ids));
}

void SuffixArrayIndex::write(const fs::path& dir, bool force) const {
  ensure_writable(dir, force);
  auto tmp = dir;
  tmp += ".partial";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  try {
    fs::create_directories(tmp);
    nlohmann::json shards = nlohmann::json::array();
    for (const auto& s : shards_) {
      const auto sub = tmp / shard_dir_name(s.info().id);
      fs::create_directories(sub);
      write_binary(sub / "tokens.bin", s.tokens());
      write_binary(sub / "sa.bin", s.suffix_array());
      write_binary(sub / "docs.bin", s.doc_starts());
      const auto& i = s.info();
      shards.push_back({{"id", i.id},
                        {"dir", shard_dir_name(i.id)},
                        {"first_document", i.first_document},
                        {"documents", i.documents},
                        {"tokens", i.tokens},
                        {"length", s.tokens().size()},
                        {"checksums", {{"tokens", i.tokens_checksum}, {"sa", i.sa_checksum}, {"docs", i.docs_checksum}}}});
    }
    {
      std::ofstream out(tmp / "vocab.txt", std::ios::binary);
      const auto v = vocab_.serialize();
      out.write(v.data(), static_cast<std::streamsize>(v.size()));
      if (!out) throw IoError("write failed for vocab.txt");
    }
    const nlohmann::json manifest = {{"format", "exposcope-index"},
                                     {"version", kFormatVersion},
                                     {"vocabulary", "vocab.txt"},
                                     {"vocabulary_size", vocab_.size()},
                                     {"total_tokens", token_count()},
                                     {"documents", document_count()},
                                     {"checksum", checksum_},
                                     {"tokenizer", tokenizer_},
                                     {"shards", shards}};
    write_file_atomic(tmp / "manifest.json", manifest.dump(2) + "\n");
    if (fs::exists(dir)) fs::remove_all(dir);
    fs::rename(tmp, dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(tmp, ec);
    throw IoError(std::string("index write failed: ") + e.what());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

SuffixArrayIndex SuffixArrayIndex::open(const fs::path& dir, OpenOptions options) {
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw ConfigError("no index manifest in " + dir.string());
  auto manifest = nlohmann::json::parse(read_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || manifest.value("format", "") != "exposcope-index") {
    throw IntegrityError("unreadable index manifest " + manifest_path.string());
  }
  if (manifest.value("version", 0) != kFormatVersion) {
    throw IntegrityError("unsupported index version in " + manifest_path.string());
  }

  SuffixArrayIndex index;
  try {
    index.tokenizer_ = manifest.at("tokenizer").get<TokenizerConfig>();
    index.checksum_ = manifest.at("checksum").get<std::string>();
    index.vocab_ = Vocabulary::parse(read_file(dir / manifest.at("vocabulary").get<std::string>()));
    for (const auto& js : manifest.at("shards")) {
      ShardInfo info;
      info.id = js.at("id").get<std::uint32_t>();
      info.first_document = js.at("first_document").get<std::uint64_t>();
      info.documents = js.at("documents").get<std::uint64_t>();
      info.tokens = js.at("tokens").get<std::uint64_t>();
      info.tokens_checksum = js.at("checksums").at("tokens").get<std::string>();
      info.sa_checksum = js.at("checksums").at("sa").get<std::string>();
      info.docs_checksum = js.at("checksums").at("docs").get<std::string>();
      const auto sub = dir / js.at("dir").get<std::string>();
      const auto length = js.at("length").get<std::uint64_t>();
      MappedFile tok(sub / "tokens.bin"), sa(sub / "sa.bin"), docs(sub / "docs.bin");
      const auto where = " in shard " + std::to_string(info.id);
      if (tok.size() != length * sizeof(TokenId) || sa.size() != length * sizeof(std::uint64_t) ||
          docs.size() != info.documents * sizeof(std::uint64_t) || info.documents == 0) {
        throw IntegrityError("file sizes disagree with manifest" + where);
      }
      if (options.verify_checksums) {
        if (bytes_checksum(tok.bytes()) != info.tokens_checksum) throw IntegrityError("tokens.bin checksum mismatch" + where);
        if (bytes_checksum(sa.bytes()) != info.sa_checksum) throw IntegrityError("sa.bin checksum mismatch" + where);
        if (bytes_checksum(docs.bytes()) != info.docs_checksum) throw IntegrityError("docs.bin checksum mismatch" + where);
      }
      index.shards_.emplace_back(std::move(info), std::move(tok), std::move(sa), std::move(docs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed index manifest: " + std::string(e.what()));
  }
  if (index.shards_.empty()) throw IntegrityError("index has no shards");

  std::uint64_t expected_doc = 0;
  for (const auto& s : index.shards_) {
    if (s.info().first_document != expected_doc) throw IntegrityError("shards are not contiguous");
    expected_doc += s.info().documents;
  }
  if (manifest.value("total_tokens", std::uint64_t{0}) != index.token_count()) {
    throw IntegrityError("total token count disagrees with shard sums");
  }

  if (options.verify_checksums) {
    // Reassemble the corpus stream to check the corpus checksum.
    Fnv1a64 h;
    const TokenId sep = kSeparator;
    for (std::size_t i = 0; i < index.shards_.size(); ++i) {
      if (i > 0) h.update_values(std::span<const TokenId>(&sep, 1));
      h.update_values(index.shards_[i].tokens());
    }
    std::uint64_t base = 0;
    for (const auto& s : index.shards_) {
      for (auto start : s.doc_starts()) {
        const std::uint64_t global = base + start;
        h.update_values(std::span<const std::uint64_t>(&global, 1));
      }
      base += s.tokens().size() + 1;
    }
    if (h.hex() != index.checksum_) throw IntegrityError("corpus checksum mismatch in " + dir.string());
  }
  return index;
}

std::uint64_t count_phrase(const SuffixArrayIndex& index, const PhraseQuery& q) {
  std::uint64_t n = 0;
  for (const auto& s : index.shards()) n += find_range(s.tokens(), s.suffix_array(), q.tokens()).size();
  return n;
}

std::vector<MatchInterval> find_matches(const SuffixArrayIndex& index, const PhraseQuery& q,
                                        std::uint64_t limit) {
  if (limit == 0) throw ConfigError("match limit must be positive");
  std::vector<MatchInterval> out;
  for (const auto& s : index.shards()) {
    const auto r = find_range(s.tokens(), s.suffix_array(), q.tokens());
    std::vector<std::uint64_t> pos(s.suffix_array().begin() + static_cast<std::ptrdiff_t>(r.lo),
                                   s.suffix_array().begin() + static_cast<std::ptrdiff_t>(r.hi));
    std::sort(pos.begin(), pos.end());
    for (auto p : pos) {
      if (out.size() == limit) return out;
      const auto doc = s.document_at(p);
      const auto start = p - s.doc_starts()[doc];
      out.push_back({s.info().first_document + doc, start, start + q.size()});
    }
  }
  return out;
}

std::uint64_t exposure_count(const SuffixArrayIndex& index, const DisjunctiveQuery& q) {
  std::uint64_t merged = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  for (const auto& s : index.shards()) {
    spans.clear();
    for (const auto& phrase : q.phrases()) {
      const auto r = find_range(s.tokens(), s.suffix_array(), phrase.tokens());
      for (auto k = r.lo; k < r.hi; ++k) {
        const auto p = s.suffix_array()[k];
        spans.emplace_back(p, p + phrase.size());
      }
    }
    // Spans never cross separators, so shard-level positions merge correctly.
    std::sort(spans.begin(), spans.end());
    std::uint64_t cur_end = 0;
    bool open = false;
    for (const auto& [b, e] : spans) {
      if (open && b < cur_end) {
        cur_end = std::max(cur_end, e);
      } else {
        ++merged;
        cur_end = e;
        open = true;
      }
    }
  }
  return merged;
}

std::uint64_t cnf_doc_count(const SuffixArrayIndex& index, const CnfQuery& q) {
  if (q.clauses.empty()) throw ConfigError("CNF query has no clauses");
  std::uint64_t total = 0;
  for (const auto& s : index.shards()) {
    std::vector<std::size_t> acc;
    for (std::size_t c = 0; c < q.clauses.size(); ++c) {
      std::vector<std::size_t> docs;
      for (const auto& phrase : q.clauses[c].phrases()) {
        const auto r = find_range(s.tokens(), s.suffix_array(), phrase.tokens());
        for (auto k = r.lo; k < r.hi; ++k) docs.push_back(s.document_at(s.suffix_array()[k]));
      }
      std::sort(docs.begin(), docs.end());
      docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
      if (c == 0) {
        acc = std::move(docs);
      } else {
        std::vector<std::size_t> both;
        std::set_intersection(acc.begin(), acc.end(), docs.begin(), docs.end(), std::back_inserter(both));
        acc = std::move(both);
      }
      if (acc.empty()) break;
    }
    total += acc.size();
  }
  return total;
}

}  // namespace exposcope
