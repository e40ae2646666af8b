#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exposcope/entity.hpp"

namespace exposcope {

struct PromptOptions {
  // Appends "(alias, alias)" after the label in direct and comparison prompts.
  bool include_aliases = false;
};

// Label, or label followed by its validated (else raw) aliases in parentheses.
std::string display_name(const EntityRecord& e, const PromptOptions& opts);

// Options are numbered from 1, one per line.
std::string render_alias_prompt(const EntityRecord& e);
std::string render_direct_prompt(const EntityRecord& e, const PromptOptions& opts = {});
// Throws ConfigError when both records are the same entity.
std::string render_comparison_prompt(const EntityRecord& first, const EntityRecord& second,
                                     const PromptOptions& opts = {});

// First integer in the text (optional leading '-'), clamped to [0, 1000].
std::optional<int> parse_direct_response(std::string_view text);

struct ComparisonAnswer {
  int option = 0;  // 1 or 2
  std::string justification;
};

// Takes the first balanced {...} that parses as a JSON object carrying
// `option`. Strict mode requires an integer; lenient mode also accepts "1"/"2".
std::optional<ComparisonAnswer> parse_comparison_response(std::string_view text, bool strict = true);

// First JSON array of integers in the text.
std::optional<std::vector<long long>> parse_alias_response(std::string_view text);

// Pieces of a rendered prompt, recovered by the deterministic mock client.
struct PromptFields {
  enum class Kind { Unknown, Alias, Direct, Comparison } kind = Kind::Unknown;
  std::string entity;  // alias target or direct entity
  std::string first, second;
  std::size_t option_count = 0;
};

PromptFields inspect_prompt(std::string_view prompt);

}  // namespace exposcope
