#include "exposcope/wikidata.hpp"

#include <limits>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "exposcope/error.hpp"
#include "exposcope/io.hpp"

namespace exposcope {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct Candidate {
  EntityRecord record;
  std::uint64_t sitelinks = 0;
};

// Keeps only the fields ingestion reads; everything else is dropped while parsing.
bool keep_field(int depth, nlohmann::json::parse_event_t event, nlohmann::json& parsed) {
  if (event == nlohmann::json::parse_event_t::key && depth == 1) {
    const auto& k = parsed.get_ref<const std::string&>();
    return k == "id" || k == "qid" || k == "label" || k == "labels" || k == "aliases" || k == "type" ||
           k == "claims" || k == "sitelinks" || k == "validated_aliases" || k == "exposure";
  }
  if (event == nlohmann::json::parse_event_t::key && depth == 2) {
    // Inside "claims" only P31 matters; other depth-2 keys (languages,
    // sitelink sites) are short and kept.
    const auto& k = parsed.get_ref<const std::string&>();
    return !(k.size() > 1 && k[0] == 'P' && k != "P31");
  }
  return true;
}

std::optional<Candidate> parse_dump_entity(const nlohmann::json& j, const TypeMappingConfig& mapping,
                                           const IngestOptions& opt, IngestStats& stats) {
  Candidate c;
  auto& e = c.record;
  e.qid = j.at("id").get<std::string>();
  const auto labels = j.find("labels");
  if (labels == j.end() || !labels->contains(opt.language)) {
    ++stats.unlabeled;
    return std::nullopt;
  }
  e.label = labels->at(opt.language).at("value").get<std::string>();
  if (e.label.empty()) {
    ++stats.unlabeled;
    return std::nullopt;
  }
  std::vector<std::string> classes;
  if (auto claims = j.find("claims"); claims != j.end() && claims->contains("P31")) {
    for (const auto& st : claims->at("P31")) {
      const auto& snak = st.at("mainsnak");
      if (!snak.contains("datavalue")) continue;
      classes.push_back(snak.at("datavalue").at("value").at("id").get<std::string>());
    }
  }
  const auto type = mapping.resolve(classes);
  if (!type) {
    ++stats.unmapped;
    return std::nullopt;
  }
  e.type = *type;
  std::vector<std::string> aliases;
  if (auto al = j.find("aliases"); al != j.end() && al->contains(opt.language)) {
    for (const auto& a : al->at(opt.language)) aliases.push_back(a.at("value").get<std::string>());
  }
  e.aliases = clean_aliases(e.label, aliases);
  if (auto sl = j.find("sitelinks"); sl != j.end() && sl->is_object()) c.sitelinks = sl->size();
  return c;
}

std::optional<Candidate> parse_simplified(const nlohmann::json& j, IngestStats& stats) {
  Candidate c;
  c.record = entity_from_json(j);
  if (c.record.label.empty()) {
    ++stats.unlabeled;
    return std::nullopt;
  }
  return c;
}

}  // namespace

TypeMappingConfig TypeMappingConfig::from_json_file(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("type mapping must be a JSON object: " + path.string());
  TypeMappingConfig cfg;
  for (const auto& [cls, name] : j.items()) {
    const auto t = name.is_string() ? parse_entity_type(name.get<std::string>()) : std::nullopt;
    if (!t) throw ConfigError("class " + cls + " maps to an unknown entity type");
    cfg.classes[cls] = *t;
  }
  return cfg;
}

std::optional<EntityType> TypeMappingConfig::resolve(const std::vector<std::string>& instance_of) const {
  for (const auto& cls : instance_of) {
    if (auto it = classes.find(cls); it != classes.end()) return it->second;
  }
  return std::nullopt;
}

std::mt19937_64 type_stream(std::uint64_t seed, EntityType type) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(type) + 1)));
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

Catalog ingest_wikidata(const std::filesystem::path& dump, const TypeMappingConfig& mapping,
                        std::size_t per_type, std::uint64_t seed, const IngestOptions& options,
                        IngestStats* stats_out) {
  if (per_type == 0) throw ConfigError("per-type sample size must be positive");
  IngestStats stats;
  std::map<EntityType, std::vector<Candidate>> reservoirs;
  std::map<EntityType, std::mt19937_64> streams;
  for (auto t : options.types) streams.emplace(t, type_stream(seed, t));

  for_each_line(dump, [&](std::string_view raw, std::size_t) {
    auto line = raw;
    while (!line.empty() && (line.back() == ',' || line.back() == ' ' || line.back() == '\r')) line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty() || line == "[" || line == "]") return;
    ++stats.records;
    std::optional<Candidate> cand;
    try {
      auto j = nlohmann::json::parse(line, keep_field, false);
      if (j.is_discarded() || !j.is_object()) {
        ++stats.malformed;
        return;
      }
      cand = j.contains("qid") ? parse_simplified(j, stats) : parse_dump_entity(j, mapping, options, stats);
    } catch (const nlohmann::json::exception&) {
      ++stats.malformed;
      return;
    } catch (const ConfigError&) {
      ++stats.malformed;
      return;
    }
    if (!cand || cand->sitelinks < options.min_sitelinks) return;
    const auto type = cand->record.type;
    auto stream = streams.find(type);
    if (stream == streams.end()) return;
    const auto seen = stats.candidates[type]++;
    auto& res = reservoirs[type];
    if (res.size() < per_type) {
      res.push_back(std::move(*cand));
    } else {
      const auto j = uniform_below(stream->second, seen + 1);
      if (j < per_type) res[j] = std::move(*cand);
    }
  });

  if (stats.malformed > 0) spdlog::warn("skipped {} malformed dump records", stats.malformed);
  Catalog catalog;
  catalog.seed = seed;
  for (auto t : options.types) {
    const auto have = stats.candidates[t];
    if (have < per_type) {
      throw DomainError("type " + std::string(to_string(t)) + " has only " + std::to_string(have) +
                        " candidates; " + std::to_string(per_type) + " requested");
    }
    for (auto& c : reservoirs[t]) catalog.entities.push_back(std::move(c.record));
  }
  normalize_catalog(catalog);
  if (stats_out) *stats_out = stats;
  return catalog;
}

}  // namespace exposcope
