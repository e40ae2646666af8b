#include "exposcope/corpus.hpp"

#include <json.hpp>

#include "exposcope/checksum.hpp"
#include "exposcope/error.hpp"
#include "exposcope/io.hpp"

namespace exposcope {

std::uint64_t TokenizedCorpus::token_count() const {
  const std::uint64_t seps = doc_starts.empty() ? 0 : doc_starts.size() - 1;
  return tokens.size() - seps;
}

std::uint64_t TokenizedCorpus::doc_length(std::size_t doc) const {
  const std::uint64_t end = doc + 1 < doc_starts.size() ? doc_starts[doc + 1] - 1 : tokens.size();
  return end - doc_starts[doc];
}

std::string TokenizedCorpus::checksum() const {
  Fnv1a64 h;
  h.update_values(std::span<const TokenId>(tokens));
  h.update_values(std::span<const std::uint64_t>(doc_starts));
  return h.hex();
}

bool CorpusBuilder::add(std::string_view id, std::string_view text) {
  auto words = tokenize(text, cfg_);
  if (words.empty()) {
    corpus_.skipped_ids.emplace_back(id);
    return false;
  }
  if (!corpus_.doc_starts.empty()) corpus_.tokens.push_back(kSeparator);
  corpus_.doc_starts.push_back(corpus_.tokens.size());
  corpus_.doc_ids.emplace_back(id);
  for (const auto& w : words) corpus_.tokens.push_back(vocab_.intern(w));
  return true;
}

TokenizeResult tokenize_corpus(const std::vector<Document>& docs, const TokenizerConfig& cfg) {
  if (docs.empty()) throw ConfigError("document stream is empty");
  CorpusBuilder b(cfg);
  for (const auto& d : docs) b.add(d.id, d.text);
  return {std::move(b.corpus()), std::move(b.vocabulary())};
}

void read_corpus_jsonl(const std::filesystem::path& path,
                       const std::function<void(Document&&)>& sink) {
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) return;
    auto j = nlohmann::json::parse(line, nullptr, false);
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object()) throw IoError("malformed corpus record at " + where);
    auto id = j.find("id");
    auto text = j.find("text");
    if (id == j.end() || !id->is_string()) throw IoError("corpus record without string id at " + where);
    if (text == j.end() || !text->is_string()) {
      throw IoError("corpus record " + id->get<std::string>() + " without string text at " + where);
    }
    sink(Document{id->get<std::string>(), text->get<std::string>()});
  });
}

TokenizeResult tokenize_corpus_file(const std::filesystem::path& path, const TokenizerConfig& cfg) {
  CorpusBuilder b(cfg);
  std::size_t seen = 0;
  read_corpus_jsonl(path, [&](Document&& d) {
    ++seen;
    b.add(d.id, d.text);
  });
  if (seen == 0) throw ConfigError("corpus is empty: " + path.string());
  return {std::move(b.corpus()), std::move(b.vocabulary())};
}

}  // namespace exposcope
