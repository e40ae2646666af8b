#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "exposcope/tokenizer.hpp"

namespace exposcope {

// Suffix array over `text`, where each suffix is compared only up to the next
// kSeparator (or the end of text). Suffixes whose truncated contents are equal
// are ordered by position. A truncated suffix that is a proper prefix of
// another sorts first.
//
// Prefix doubling with radix passes, O(n log L) for L the longest document.
std::vector<std::uint64_t> build_suffix_array(std::span<const TokenId> text);

// Compares the suffix at `pos` with `query` over the first |query| tokens.
// Returns <0, 0 or >0; 0 means the query occurs at `pos`. The query must not
// contain kSeparator.
int compare_suffix(std::span<const TokenId> text, std::uint64_t pos, std::span<const TokenId> query);

// Half-open range of suffix-array slots whose suffixes start with `query`.
struct SaRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  std::uint64_t size() const { return hi - lo; }
};

SaRange find_range(std::span<const TokenId> text, std::span<const std::uint64_t> sa,
                   std::span<const TokenId> query);

}  // namespace exposcope
