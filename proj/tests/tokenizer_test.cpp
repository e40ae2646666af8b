#include <gtest/gtest.h>

#include <random>

#include "exposcope/corpus.hpp"
#include "exposcope/error.hpp"
#include "exposcope/tokenizer.hpp"
#include "support/oracles.hpp"

using namespace exposcope;

TEST(Tokenizer, LowercasesAndSplits) {
  const auto t = tokenize("United States of America", {});
  EXPECT_EQ(t, (std::vector<std::string>{"united", "states", "of", "america"}));
}

TEST(Tokenizer, StripsEdgePunctuationOnly) {
  const auto t = tokenize("\"Hello,\" said U.S.A. (again)!", {});
  EXPECT_EQ(t, (std::vector<std::string>{"hello", "said", "u.s.a", "again"}));
}

TEST(Tokenizer, DropsPunctuationOnlyWords) {
  EXPECT_TRUE(tokenize(" -- ... !! ", {}).empty());
}

TEST(Tokenizer, UnicodeWhitespaceAndCase) {
  // NBSP, em space and ideographic space separate words; Ä and Ж fold.
  const auto t = tokenize("\xC3\x84pfel\xC2\xA0X\xE2\x80\x83\xD0\x96\xE3\x80\x80\xE2\x80\x9Cquoted\xE2\x80\x9D", {});
  EXPECT_EQ(t, (std::vector<std::string>{"\xC3\xA4pfel", "x", "\xD0\xB6", "quoted"}));
}

TEST(Tokenizer, CaseSensitiveMode) {
  TokenizerConfig cfg;
  cfg.case_fold = false;
  EXPECT_EQ(tokenize("Paris paris", cfg), (std::vector<std::string>{"Paris", "paris"}));
}

TEST(Tokenizer, MatchesReferenceOnRandomAscii) {
  std::mt19937_64 rng(7);
  const std::string alphabet = "abcXYZ019 .,;:!?'\"()-_\t\n";
  std::vector<Document> docs;
  for (int d = 0; d < 1000; ++d) {
    std::string text;
    const auto len = rng() % 80;
    for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    docs.push_back({"d" + std::to_string(d), text});
  }
  const auto res = tokenize_corpus(docs, {});
  std::size_t expected_tokens = 0, expected_skips = 0;
  std::size_t doc = 0;
  for (const auto& d : docs) {
    const auto ref = oracle::reference_tokenize(d.text);
    if (ref.empty()) {
      ++expected_skips;
      continue;
    }
    expected_tokens += ref.size();
    ASSERT_EQ(res.corpus.doc_length(doc), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(res.vocabulary.token(res.corpus.tokens[res.corpus.doc_starts[doc] + i]), ref[i]);
    }
    ++doc;
  }
  EXPECT_EQ(res.corpus.token_count(), expected_tokens);
  EXPECT_EQ(res.corpus.skipped_ids.size(), expected_skips);
}

TEST(Corpus, SingleDocumentLayout) {
  const auto res = tokenize_corpus({{"d1", "United States of America"}}, {});
  EXPECT_EQ(res.corpus.doc_count(), 1u);
  EXPECT_EQ(res.corpus.token_count(), 4u);
  EXPECT_EQ(res.vocabulary.token(res.corpus.tokens[0]), "united");
}

TEST(Corpus, BlankDocumentIsSkipped) {
  const auto res = tokenize_corpus({{"d1", "  "}}, {});
  EXPECT_EQ(res.corpus.doc_count(), 0u);
  ASSERT_EQ(res.corpus.skipped_ids.size(), 1u);
  EXPECT_EQ(res.corpus.skipped_ids[0], "d1");
}

TEST(Corpus, SeparatorOnlyBetweenDocuments) {
  const auto res = tokenize_corpus({{"a", "x y"}, {"b", ""}, {"c", "y z"}}, {});
  const auto& c = res.corpus;
  ASSERT_EQ(c.doc_count(), 2u);
  EXPECT_EQ(c.tokens.size(), 5u);
  EXPECT_EQ(c.tokens[2], kSeparator);
  EXPECT_EQ(c.doc_starts, (std::vector<std::uint64_t>{0, 3}));
  EXPECT_EQ(c.doc_ids, (std::vector<std::string>{"a", "c"}));
}

TEST(Corpus, EmptyStreamIsConfigError) {
  EXPECT_THROW(tokenize_corpus({}, {}), ConfigError);
}

TEST(Vocabulary, DenseIdsAndRoundTrip) {
  Vocabulary v;
  EXPECT_EQ(v.intern("a"), 1u);
  EXPECT_EQ(v.intern("b"), 2u);
  EXPECT_EQ(v.intern("a"), 1u);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.lookup("zzz"), kUnknownToken);
  const auto back = Vocabulary::parse(v.serialize());
  EXPECT_EQ(back.lookup("b"), 2u);
  EXPECT_EQ(back.serialize(), v.serialize());
  EXPECT_THROW(Vocabulary::parse("a\na\n"), IntegrityError);
}
