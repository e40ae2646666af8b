#include "exposcope/prompts.hpp"

#include <cctype>
#include <limits>

#include <json.hpp>

#include "exposcope/error.hpp"

namespace exposcope {

namespace {

constexpr std::string_view kAliasHead =
    "You are given a target entity.\n"
    "For each option, decide whether it is an alias that refers exclusively to the same entity "
    "and does not commonly refer to any other distinct entities or concepts.\n\n"
    "Target entity: ";
constexpr std::string_view kAliasTail =
    "\nOutput format requirement:\n\n"
    "Respond with only a valid JSON array of integers.\n"
    "Do not include any explanations, text, markdown, or formatting.";

constexpr std::string_view kDirectHead =
    "You are a popularity estimator based on your data and general knowledge. "
    "Estimate the popularity of the entity below.\n\n"
    "Return only a single integer between 0 and 1000, with no explanation.\n\n"
    "Entity: ";
constexpr std::string_view kDirectTail = "\n\nScore (0 to 1000):";

constexpr std::string_view kComparisonHead =
    "You are a popularity estimator with access to general world knowledge. "
    "Given the two entities below, determine which one is more popular.\n\n"
    "Select the correct option and briefly justify your choice.\n\n"
    "Return your answer ONLY in valid JSON format, strictly following the template below.\n\n"
    "Options:\n\n";

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

// Returns the text after `prefix` on the first line that starts with it.
std::optional<std::string> line_value(std::string_view text, std::string_view prefix) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    if (line.substr(0, prefix.size()) == prefix) return std::string(line.substr(prefix.size()));
    pos = nl + 1;
  }
  return std::nullopt;
}

// End (exclusive) of the balanced JSON value that opens at `open`, honoring strings.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t open, char lhs, char rhs) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == lhs) {
      ++depth;
    } else if (c == rhs && --depth == 0) {
      return i + 1;
    }
  }
  return std::nullopt;
}

}  // namespace

std::string display_name(const EntityRecord& e, const PromptOptions& opts) {
  if (!opts.include_aliases) return e.label;
  const auto& aliases = e.validated_aliases ? *e.validated_aliases : e.aliases;
  if (aliases.empty()) return e.label;
  std::string out = e.label + " (";
  for (std::size_t i = 0; i < aliases.size(); ++i) {
    if (i > 0) out += ", ";
    out += aliases[i];
  }
  return out + ")";
}

std::string render_alias_prompt(const EntityRecord& e) {
  std::string out(kAliasHead);
  out += e.label;
  out += "\n\nOptions:\n";
  for (std::size_t i = 0; i < e.aliases.size(); ++i) {
    out += std::to_string(i + 1) + ": " + e.aliases[i] + "\n";
  }
  out += kAliasTail;
  return out;
}

std::string render_direct_prompt(const EntityRecord& e, const PromptOptions& opts) {
  std::string out(kDirectHead);
  out += display_name(e, opts);
  out += kDirectTail;
  return out;
}

std::string render_comparison_prompt(const EntityRecord& first, const EntityRecord& second,
                                     const PromptOptions& opts) {
  if (first.qid == second.qid) throw ConfigError("cannot compare " + first.qid + " with itself");
  const auto a = display_name(first, opts);
  const auto b = display_name(second, opts);
  std::string out(kComparisonHead);
  out += "1: " + a + " is more popular than " + b + "\n\n";
  out += "2: " + b + " is more popular than " + a + "\n\n";
  out += "Output:\n{\n";
  out += "  \"e1\": " + json_string(a) + ",\n";
  out += "  \"e2\": " + json_string(b) + ",\n";
  out += "  \"justification\": \"Short explaination of your decision.\",\n";
  out += "  \"option\": 1 or 2\n}";
  return out;
}

std::optional<int> parse_direct_response(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    const bool negative = i > 0 && text[i - 1] == '-';
    long long v = 0;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      v = std::min<long long>(v * 10 + (text[i] - '0'), std::numeric_limits<int>::max());
      ++i;
    }
    if (negative) return 0;
    return static_cast<int>(std::min<long long>(v, 1000));
  }
  return std::nullopt;
}

std::optional<ComparisonAnswer> parse_comparison_response(std::string_view text, bool strict) {
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    const auto end = balanced_end(text, open, '{', '}');
    if (!end) continue;
    auto j = nlohmann::json::parse(text.substr(open, *end - open), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("option")) continue;
    const auto& o = j["option"];
    int option = 0;
    if (o.is_number_integer()) {
      option = o.get<int>();
    } else if (!strict && o.is_string() && (o == "1" || o == "2")) {
      option = o.get<std::string>() == "1" ? 1 : 2;
    } else {
      return std::nullopt;
    }
    if (option != 1 && option != 2) return std::nullopt;
    ComparisonAnswer ans;
    ans.option = option;
    if (j.contains("justification") && j["justification"].is_string()) {
      ans.justification = j["justification"].get<std::string>();
    }
    return ans;
  }
  return std::nullopt;
}

std::optional<std::vector<long long>> parse_alias_response(std::string_view text) {
  for (std::size_t open = text.find('['); open != std::string_view::npos; open = text.find('[', open + 1)) {
    const auto end = balanced_end(text, open, '[', ']');
    if (!end) continue;
    auto j = nlohmann::json::parse(text.substr(open, *end - open), nullptr, false);
    if (j.is_discarded() || !j.is_array()) continue;
    std::vector<long long> out;
    bool ok = true;
    for (const auto& v : j) {
      if (!v.is_number_integer()) {
        ok = false;
        break;
      }
      out.push_back(v.get<long long>());
    }
    if (ok) return out;
  }
  return std::nullopt;
}

PromptFields inspect_prompt(std::string_view prompt) {
  PromptFields f;
  if (prompt.substr(0, kAliasHead.size()) == kAliasHead) {
    f.kind = PromptFields::Kind::Alias;
    f.entity = line_value(prompt, "Target entity: ").value_or("");
    const auto opts = prompt.find("\n\nOptions:\n");
    if (opts != std::string_view::npos) {
      std::size_t pos = opts + 11;
      while (pos < prompt.size()) {
        const auto nl = prompt.find('\n', pos);
        const auto line = prompt.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (line.empty()) break;
        ++f.option_count;
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
      }
    }
  } else if (prompt.substr(0, kDirectHead.size()) == kDirectHead) {
    f.kind = PromptFields::Kind::Direct;
    f.entity = line_value(prompt, "Entity: ").value_or("");
  } else if (prompt.substr(0, kComparisonHead.size()) == kComparisonHead) {
    f.kind = PromptFields::Kind::Comparison;
    auto field = [&](std::string_view key) {
      auto v = line_value(prompt, key);
      if (!v) return std::string();
      if (!v->empty() && v->back() == ',') v->pop_back();
      auto j = nlohmann::json::parse(*v, nullptr, false);
      return j.is_string() ? j.get<std::string>() : std::string();
    };
    f.first = field("  \"e1\": ");
    f.second = field("  \"e2\": ");
  }
  return f;
}

}  // namespace exposcope
