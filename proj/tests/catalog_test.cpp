#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include <json.hpp>

#include "exposcope/alias_validation.hpp"
#include "exposcope/corpus.hpp"
#include "exposcope/entity.hpp"
#include "exposcope/error.hpp"
#include "exposcope/exposure.hpp"
#include "exposcope/wikidata.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace exposcope;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

EntityRecord entity(std::string qid, std::string label, EntityType type = EntityType::Person,
                    std::vector<std::string> aliases = {}) {
  EntityRecord e;
  e.qid = std::move(qid);
  e.label = std::move(label);
  e.type = type;
  e.aliases = std::move(aliases);
  return e;
}

// Reference reservoir sampler: same stream definition, written out again.
std::uint64_t ref_splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<std::string> ref_reservoir(const std::vector<std::string>& items, std::size_t k, std::uint64_t seed,
                                       int type_ordinal) {
  std::mt19937_64 rng(ref_splitmix(seed ^ ref_splitmix(static_cast<std::uint64_t>(type_ordinal) + 1)));
  std::vector<std::string> res;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (res.size() < k) {
      res.push_back(items[i]);
      continue;
    }
    const std::uint64_t bound = i + 1;
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t x;
    do x = rng();
    while (x >= max - max % bound);
    if (x % bound < k) res[x % bound] = items[i];
  }
  std::sort(res.begin(), res.end());
  return res;
}

json dump_entity(const std::string& id, const std::string& label, const std::string& cls,
                 std::vector<std::string> aliases = {}, int sitelinks = 1) {
  json al = json::array();
  for (const auto& a : aliases) al.push_back({{"language", "en"}, {"value", a}});
  json links = json::object();
  for (int i = 0; i < sitelinks; ++i) links["wiki" + std::to_string(i)] = {{"site", "x"}, {"title", label}};
  return {{"type", "item"},
          {"id", id},
          {"labels", {{"en", {{"language", "en"}, {"value", label}}}}},
          {"descriptions", {{"en", {{"language", "en"}, {"value", "ignored"}}}}},
          {"aliases", {{"en", al}}},
          {"claims",
           {{"P31", json::array({{{"mainsnak", {{"snaktype", "value"}, {"datavalue", {{"value", {{"id", cls}}}}}}}}})},
            {"P569", json::array({{{"mainsnak", {{"snaktype", "somevalue"}}}}})}}},
          {"sitelinks", links}};
}

TypeMappingConfig mapping() {
  TypeMappingConfig m;
  m.classes = {{"Q5", EntityType::Person}, {"Q515", EntityType::Location}, {"Q43229", EntityType::Organization},
               {"Q11424", EntityType::Art}, {"Q2424752", EntityType::Product}};
  return m;
}

}  // namespace

// ---- records ----

TEST(Entity, JsonRoundTrip) {
  auto e = entity("Q30", "United States of America", EntityType::Location, {"USA", "us", "America"});
  e.validated_aliases = std::vector<std::string>{"USA"};
  e.exposure = 42;
  e.stratum = Stratum::Popular;
  const auto back = entity_from_json(to_json(e));
  EXPECT_EQ(back.qid, e.qid);
  EXPECT_EQ(back.aliases, e.aliases);
  EXPECT_EQ(back.validated_aliases, e.validated_aliases);
  EXPECT_EQ(back.exposure, e.exposure);
  EXPECT_EQ(back.stratum, e.stratum);
}

TEST(Entity, ValidatedAliasesMustBeSubset) {
  json j = {{"qid", "Q1"}, {"label", "x"}, {"type", "Person"}, {"aliases", {"a"}}, {"validated_aliases", {"b"}}};
  EXPECT_ANY_THROW(entity_from_json(j));
}

TEST(Entity, TypeNamesParseCaseInsensitively) {
  for (auto t : kEntityTypes) {
    std::string lower(to_string(t));
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    EXPECT_EQ(parse_entity_type(lower), t);
  }
  EXPECT_FALSE(parse_entity_type("Event"));
}

TEST(Entity, CleanAliasesDropsLabelAndDuplicates) {
  EXPECT_EQ(clean_aliases("Paris", {"Paris", "City of Light", "City of Light", "Lutetia"}),
            (std::vector<std::string>{"City of Light", "Lutetia"}));
}

TEST(Entity, CatalogFileRoundTripAndDuplicates) {
  fixture::TempDir dir("catalog");
  Catalog c;
  c.seed = 9;
  c.entities = {entity("Q2", "b", EntityType::Art), entity("Q1", "a")};
  normalize_catalog(c);
  EXPECT_EQ(c.entities.front().qid, "Q1");
  write_catalog(dir.path() / "c.jsonl", c);
  const auto back = read_catalog(dir.path() / "c.jsonl");
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(serialize_catalog(back), serialize_catalog(c));
  c.entities.push_back(entity("Q1", "dup"));
  EXPECT_THROW(normalize_catalog(c), ConfigError);
}

// ---- ingestion ----

TEST(Ingest, DeterministicUnderSeed) {
  fixture::TempDir dir("ingest");
  const auto path = dir.path() / "dump.json";
  {
    std::ofstream out(path);
    out << "[\n";
    for (int i = 0; i < 10; ++i) out << dump_entity("Q" + std::to_string(1000 + i), "person " + std::to_string(i), "Q5") << ",\n";
    out << "]\n";
  }
  IngestOptions opt;
  opt.types = {EntityType::Person};
  const auto a = ingest_wikidata(path, mapping(), 5, 42, opt);
  const auto b = ingest_wikidata(path, mapping(), 5, 42, opt);
  ASSERT_EQ(a.entities.size(), 5u);
  EXPECT_EQ(serialize_catalog(a), serialize_catalog(b));
}

TEST(Ingest, ParsesDumpFieldsAndSkipsMalformed) {
  fixture::TempDir dir("ingest");
  const auto path = dir.path() / "dump.json";
  {
    std::ofstream out(path);
    out << "[\n" << dump_entity("Q30", "United States of America", "Q515", {"USA", "United States of America", "us"})
        << ",\n{not json\n"
        << dump_entity("Q99", "unmapped thing", "Q999") << ",\n]\n";
  }
  IngestOptions opt;
  opt.types = {EntityType::Location};
  IngestStats stats;
  const auto c = ingest_wikidata(path, mapping(), 1, 1, opt, &stats);
  ASSERT_EQ(c.entities.size(), 1u);
  EXPECT_EQ(c.entities[0].label, "United States of America");
  EXPECT_EQ(c.entities[0].aliases, (std::vector<std::string>{"USA", "us"}));
  EXPECT_EQ(stats.malformed, 1u);
  EXPECT_EQ(stats.unmapped, 1u);
}

TEST(Ingest, TooFewCandidatesNamesType) {
  fixture::TempDir dir("ingest");
  const auto path = dir.path() / "dump.json";
  {
    std::ofstream out(path);
    for (int i = 0; i < 3; ++i) out << dump_entity("Q" + std::to_string(i + 1), "film " + std::to_string(i), "Q11424") << "\n";
  }
  IngestOptions opt;
  opt.types = {EntityType::Art};
  try {
    ingest_wikidata(path, mapping(), 5, 0, opt);
    FAIL() << "expected an error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("Art"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
}

TEST(Ingest, SitelinkFilter) {
  fixture::TempDir dir("ingest");
  const auto path = dir.path() / "dump.json";
  {
    std::ofstream out(path);
    for (int i = 0; i < 6; ++i) out << dump_entity("Q" + std::to_string(i + 1), "p" + std::to_string(i), "Q5", {}, i) << "\n";
  }
  IngestOptions opt;
  opt.types = {EntityType::Person};
  opt.min_sitelinks = 3;
  IngestStats stats;
  const auto c = ingest_wikidata(path, mapping(), 3, 0, opt, &stats);
  std::set<std::string> ids;
  for (const auto& e : c.entities) ids.insert(e.qid);
  EXPECT_EQ(ids, (std::set<std::string>{"Q4", "Q5", "Q6"}));
}

TEST(Ingest, MatchesReferenceReservoir) {
  fixture::TempDir dir("ingest");
  const auto path = dir.path() / "entities.jsonl";
  std::map<EntityType, std::vector<std::string>> by_type;
  std::mt19937_64 rng(5);
  {
    std::ofstream out(path);
    for (int i = 0; i < 1000; ++i) {
      const auto type = kEntityTypes[rng() % 5];
      const auto qid = "Q" + std::to_string(10000 + i);
      by_type[type].push_back(qid);
      out << json{{"qid", qid}, {"label", "e" + std::to_string(i)}, {"type", std::string(to_string(type))}, {"aliases", json::array()}}
                 .dump()
          << "\n";
    }
  }
  for (std::uint64_t seed : {0ull, 1ull, 77ull}) {
    const auto c = ingest_wikidata(path, mapping(), 100, seed);
    for (auto t : kEntityTypes) {
      std::vector<std::string> got;
      for (const auto& e : c.entities) {
        if (e.type == t) got.push_back(e.qid);
      }
      EXPECT_EQ(got, ref_reservoir(by_type[t], 100, seed, static_cast<int>(t))) << to_string(t) << " seed " << seed;
    }
  }
}

TEST(Ingest, FullScaleCatalogSize) {
  fixture::TempDir dir("ingest");
  const auto path = dir.path() / "entities.jsonl";
  {
    std::ofstream out(path);
    for (auto t : kEntityTypes) {
      for (int i = 0; i < 5200; ++i) {
        out << json{{"qid", "Q" + std::to_string(static_cast<int>(t) * 100000 + i)},
                    {"label", "x" + std::to_string(i)},
                    {"type", std::string(to_string(t))},
                    {"aliases", json::array()}}
                   .dump()
            << "\n";
      }
    }
  }
  const auto c = ingest_wikidata(path, mapping(), 5000, 3);
  EXPECT_EQ(c.entities.size(), 25000u);
  for (const auto& [t, n] : c.per_type_counts()) EXPECT_EQ(n, 5000u) << to_string(t);
}

// ---- alias validation ----

TEST(AliasValidation, KeepsOnlyApprovedOptions) {
  auto e = entity("Q30", "United States of America", EntityType::Location, {"USA", "us", "America"});
  ScriptedLlmClient client(std::vector<ScriptedLlmClient::Rule>{{"Target entity", {"[1]"}}});
  const auto r = validate_aliases(e, client);
  EXPECT_EQ(r.validated, std::vector<std::string>{"USA"});
}

TEST(AliasValidation, IdentityAndOutOfRange) {
  auto e = entity("Q1", "x", EntityType::Art, {"a", "b", "c"});
  ScriptedLlmClient all(std::vector<ScriptedLlmClient::Rule>{{"", {"[1,2,3]"}}});
  EXPECT_EQ(validate_aliases(e, all).validated, e.aliases);
  ScriptedLlmClient odd(std::vector<ScriptedLlmClient::Rule>{{"", {"Answer: [3, 7, 0]"}}});
  const auto r = validate_aliases(e, odd);
  EXPECT_EQ(r.validated, std::vector<std::string>{"c"});
  EXPECT_EQ(r.dropped_indices, (std::vector<long long>{7, 0}));
  ScriptedLlmClient none(std::vector<ScriptedLlmClient::Rule>{{"", {"[]"}}});
  EXPECT_TRUE(validate_aliases(e, none).validated.empty());
}

TEST(AliasValidation, NoAliasesIsAPreconditionFailure) {
  ScriptedLlmClient client(std::vector<ScriptedLlmClient::Rule>{{"", {"[1]"}}});
  EXPECT_THROW(validate_aliases(entity("Q1", "x"), client), ConfigError);
}

TEST(AliasValidation, RetriesThenFails) {
  int calls = 0;
  FunctionLlmClient flaky([&](const ChatRequest& r) {
    ++calls;
    return r.attempt < 2 ? std::string("I am not sure") : std::string("[2]");
  });
  auto e = entity("Q1", "x", EntityType::Art, {"a", "b"});
  EXPECT_EQ(validate_aliases(e, flaky).validated, std::vector<std::string>{"b"});
  EXPECT_EQ(calls, 3);

  FunctionLlmClient hopeless([](const ChatRequest&) { return std::string("no"); });
  AliasValidationOptions opts;
  opts.retries = 2;
  EXPECT_THROW(validate_aliases(e, hopeless, opts), DomainError);
}

TEST(AliasValidation, OutputIsSubsetForAnyResponse) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> aliases;
    const auto n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) aliases.push_back("alias" + std::to_string(i));
    std::string response = "[";
    const auto picks = rng() % 8;
    for (std::size_t i = 0; i < picks; ++i) response += (i ? "," : "") + std::to_string(static_cast<int>(rng() % 10) - 2);
    response += "]";
    ScriptedLlmClient client(std::vector<ScriptedLlmClient::Rule>{{"", {response}}});
    const auto r = validate_aliases(entity("Q1", "label", EntityType::Person, aliases), client);
    for (const auto& v : r.validated) {
      EXPECT_NE(std::find(aliases.begin(), aliases.end(), v), aliases.end()) << response;
    }
  }
}

TEST(AliasValidation, CatalogSummary) {
  Catalog c;
  c.entities = {entity("Q1", "a", EntityType::Person, {"x", "y"}), entity("Q2", "b"),
                entity("Q3", "c", EntityType::Person, {"z"})};
  FunctionLlmClient client([](const ChatRequest& r) {
    return r.prompt.find("Target entity: c") != std::string::npos ? std::string("garbage") : std::string("[2]");
  });
  AliasValidationOptions opts;
  opts.retries = 0;
  const auto s = validate_catalog_aliases(c, client, opts);
  EXPECT_EQ(s.validated, 1u);
  EXPECT_EQ(s.without_aliases, 1u);
  EXPECT_EQ(s.failed, std::vector<std::string>{"Q3"});
  EXPECT_EQ(c.entities[0].validated_aliases, std::vector<std::string>{"y"});
  EXPECT_FALSE(c.entities[2].validated_aliases);
}

// ---- exposure scoring and strata ----

namespace {

SuffixArrayIndex text_index(const std::vector<std::string>& texts, std::size_t shards = 1) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < texts.size(); ++i) docs.push_back({"d" + std::to_string(i), texts[i]});
  auto tok = tokenize_corpus(docs, TokenizerConfig{});
  return SuffixArrayIndex::build(tok.corpus, std::move(tok.vocabulary), TokenizerConfig{}, shards);
}

}  // namespace

TEST(Exposure, LabelOnlyAndContainedAlias) {
  const auto index = text_index({"paris is big. paris, again", "I love Paris", "the city of paris"});
  Catalog c;
  c.entities = {entity("Q90", "Paris", EntityType::Location), entity("Q1", "City of Paris", EntityType::Location, {"Paris"})};
  c.entities[0].validated_aliases.emplace();
  c.entities[1].validated_aliases = std::vector<std::string>{};
  score_exposure(c, index, TokenizerConfig{});
  EXPECT_EQ(c.entities[0].exposure, 4u);

  // An alias that only ever occurs inside the label adds nothing.
  const auto index2 = text_index({"new york city is here", "new york city again"});
  Catalog d;
  d.entities = {entity("Q60", "New York City", EntityType::Location, {"New York"})};
  d.entities[0].validated_aliases = std::vector<std::string>{"New York"};
  score_exposure(d, index2, TokenizerConfig{});
  EXPECT_EQ(d.entities[0].exposure, 2u);
}

TEST(Exposure, UnscoreableAndTokenizerMismatch) {
  const auto index = text_index({"a b c"});
  Catalog c;
  c.entities = {entity("Q1", "!!!"), entity("Q2", "a")};
  const auto s = score_exposure(c, index, TokenizerConfig{});
  EXPECT_EQ(s.unscoreable, std::vector<std::string>{"Q1"});
  EXPECT_TRUE(c.entities[0].unscoreable);
  EXPECT_FALSE(c.entities[0].exposure);
  EXPECT_EQ(s.unvalidated, 2u);
  TokenizerConfig other;
  other.case_fold = false;
  EXPECT_THROW(score_exposure(c, index, other), ConfigError);
}

TEST(Exposure, MatchesIntervalMergeOracle) {
  std::mt19937_64 rng(21);
  const std::size_t vocab = 60;
  const auto docs = oracle::random_docs(rng, 100000, vocab);
  const auto index =
      SuffixArrayIndex::build(oracle::make_corpus(docs), oracle::make_vocab(vocab), TokenizerConfig{}, 3);
  auto words = [](const std::vector<TokenId>& ids) {
    std::string s;
    for (auto id : ids) s += (s.empty() ? "w" : " w") + std::to_string(id);
    return s;
  };
  Catalog c;
  std::vector<std::vector<std::vector<TokenId>>> phrases;
  for (int i = 0; i < 50; ++i) {
    const auto label = oracle::random_phrase(rng, docs, vocab, 1, 3);
    std::vector<std::vector<TokenId>> ph{label};
    std::vector<std::string> aliases;
    for (int a = 0; a < 3; ++a) {
      auto alias = oracle::random_phrase(rng, docs, vocab, 1, 3);
      if (std::find(ph.begin(), ph.end(), alias) != ph.end()) continue;
      ph.push_back(alias);
      aliases.push_back(words(alias));
    }
    auto e = entity("Q" + std::to_string(i + 1), words(label), kEntityTypes[i % 5], aliases);
    e.validated_aliases = aliases;
    c.entities.push_back(e);
    phrases.push_back(ph);
  }
  score_exposure(c, index, TokenizerConfig{}, 2);
  for (std::size_t i = 0; i < c.entities.size(); ++i) {
    EXPECT_EQ(c.entities[i].exposure, oracle::naive_exposure(docs, phrases[i])) << c.entities[i].label;
  }

  // Alias order does not matter.
  for (auto& e : c.entities) std::reverse(e.validated_aliases->begin(), e.validated_aliases->end());
  auto copy = c;
  score_exposure(copy, index, TokenizerConfig{});
  for (std::size_t i = 0; i < c.entities.size(); ++i) EXPECT_EQ(copy.entities[i].exposure, c.entities[i].exposure);
}

namespace {

Catalog scored(const std::vector<std::uint64_t>& exposures, EntityType type = EntityType::Person) {
  Catalog c;
  for (std::size_t i = 0; i < exposures.size(); ++i) {
    auto e = entity("Q" + std::to_string(i + 1), "e" + std::to_string(i), type);
    e.exposure = exposures[i];
    c.entities.push_back(e);
  }
  return c;
}

std::set<std::string> with_stratum(const Catalog& c, Stratum s) {
  std::set<std::string> out;
  for (const auto& e : c.entities) {
    if (e.stratum == s) out.insert(e.qid);
  }
  return out;
}

}  // namespace

TEST(Strata, BottomAndTopK) {
  auto c = scored({1, 2, 3, 4});
  select_strata(c, 1);
  EXPECT_EQ(with_stratum(c, Stratum::Sparse), std::set<std::string>{"Q1"});
  EXPECT_EQ(with_stratum(c, Stratum::Popular), std::set<std::string>{"Q4"});
  EXPECT_EQ(with_stratum(c, Stratum::Unselected), (std::set<std::string>{"Q2", "Q3"}));
}

TEST(Strata, TiesBrokenById) {
  auto c = scored({5, 5, 5, 5});
  select_strata(c, 2);
  EXPECT_EQ(with_stratum(c, Stratum::Sparse), (std::set<std::string>{"Q1", "Q2"}));
  EXPECT_EQ(with_stratum(c, Stratum::Popular), (std::set<std::string>{"Q3", "Q4"}));
}

TEST(Strata, TooFewNamesType) {
  auto c = scored({1, 2, 3}, EntityType::Product);
  try {
    select_strata(c, 2);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("Product"), std::string::npos);
  }
}

TEST(Strata, FullScaleSelectsTwoThousand) {
  Catalog c;
  std::mt19937_64 rng(1);
  for (auto t : kEntityTypes) {
    for (int i = 0; i < 5000; ++i) {
      auto e = entity("Q" + std::to_string(static_cast<int>(t) * 10000 + i), "x", t);
      e.exposure = rng() % 100000;
      c.entities.push_back(e);
    }
  }
  select_strata(c, 200);
  EXPECT_EQ(with_stratum(c, Stratum::Sparse).size() + with_stratum(c, Stratum::Popular).size(), 2000u);
}

TEST(Strata, PropertiesOnRandomCatalogs) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Catalog c;
    const std::size_t n = 4 + rng() % 40;
    const std::size_t k = 1 + rng() % (n / 2);
    for (auto t : {EntityType::Art, EntityType::Product}) {
      for (std::size_t i = 0; i < n; ++i) {
        auto e = entity("Q" + std::to_string(static_cast<int>(t) * 1000 + i), "x", t);
        e.exposure = rng() % 10;
        c.entities.push_back(e);
      }
    }
    std::shuffle(c.entities.begin(), c.entities.end(), rng);
    select_strata(c, k);
    for (auto t : {EntityType::Art, EntityType::Product}) {
      std::uint64_t max_sparse = 0, min_popular = UINT64_MAX;
      std::size_t sparse = 0, popular = 0;
      for (const auto& e : c.entities) {
        if (e.type != t) continue;
        if (e.stratum == Stratum::Sparse) {
          ++sparse;
          max_sparse = std::max(max_sparse, *e.exposure);
        } else if (e.stratum == Stratum::Popular) {
          ++popular;
          min_popular = std::min(min_popular, *e.exposure);
        }
      }
      EXPECT_EQ(sparse, k);
      EXPECT_EQ(popular, k);
      EXPECT_LE(max_sparse, min_popular);
    }
  }
}

TEST(LongTail, RankFrequencySeries) {
  auto c = scored({5, 10, 1});
  const auto d = long_tail_distribution(c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.at(EntityType::Person), (RankFrequency{{1, 10}, {2, 5}, {3, 1}}));
  auto one = scored({7});
  EXPECT_EQ(long_tail_distribution(one).at(EntityType::Person), (RankFrequency{{1, 7}}));
}

TEST(LongTail, ZipfSlopeRecovered) {
  auto exposures = fixture::zipf_exposures(5000, 1e8, 1.1);
  std::mt19937_64 rng(2);
  std::shuffle(exposures.begin(), exposures.end(), rng);
  auto c = scored(exposures);
  const double slope = log_log_slope(long_tail_distribution(c).at(EntityType::Person));
  EXPECT_NEAR(slope, -1.1, 0.15);
}

TEST(LongTail, SyntheticFixtureExposuresMatchPlan) {
  fixture::TempDir dir("fixture");
  const auto fx = fixture::write_synthetic_fixture(dir.path());
  auto tok = tokenize_corpus_file(dir.path() / "corpus.jsonl", TokenizerConfig{});
  const auto index = SuffixArrayIndex::build(tok.corpus, std::move(tok.vocabulary), TokenizerConfig{}, 2);
  auto c = ingest_wikidata(dir.path() / "entities.jsonl", mapping(), 10, 0);
  for (auto& e : c.entities) e.validated_aliases = e.aliases;
  score_exposure(c, index, TokenizerConfig{});
  for (const auto& e : c.entities) EXPECT_EQ(*e.exposure, fx.exposure.at(e.qid)) << e.qid;
  for (const auto& [type, series] : long_tail_distribution(c)) {
    EXPECT_NEAR(log_log_slope(series), -1.1, 0.15) << to_string(type);
  }
}
