#include "exposcope/suffix_array.hpp"

#include <algorithm>

namespace exposcope {

std::vector<std::uint64_t> build_suffix_array(std::span<const TokenId> text) {
  const std::uint64_t n = text.size();
  if (n == 0) return {};
  // A virtual separator at position n terminates the last document.
  const std::uint64_t m = n + 1;

  std::vector<TokenId> words;
  words.reserve(n);
  std::uint64_t separators = 0;
  for (TokenId t : text) {
    if (t == kSeparator) {
      ++separators;
    } else {
      words.push_back(t);
    }
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());

  // Separators take distinct ranks in order of position, all below every word.
  std::vector<std::uint64_t> rank(m);
  {
    std::uint64_t next_sep = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      if (text[i] == kSeparator) {
        rank[i] = next_sep++;
      } else {
        const auto it = std::lower_bound(words.begin(), words.end(), text[i]);
        rank[i] = separators + 1 + static_cast<std::uint64_t>(it - words.begin());
      }
    }
    rank[n] = separators;
  }
  std::uint64_t classes = separators + 1 + words.size();

  std::vector<std::uint64_t> sa(m), tmp(m), count;

  count.assign(classes + 1, 0);
  for (std::uint64_t i = 0; i < m; ++i) ++count[rank[i] + 1];
  for (std::uint64_t c = 1; c <= classes; ++c) count[c] += count[c - 1];
  for (std::uint64_t i = 0; i < m; ++i) sa[count[rank[i]]++] = i;

  // Densify ranks so that `classes` tracks the number of distinct classes.
  tmp[sa[0]] = 0;
  for (std::uint64_t j = 1; j < m; ++j) {
    tmp[sa[j]] = tmp[sa[j - 1]] + (rank[sa[j]] != rank[sa[j - 1]] ? 1 : 0);
  }
  rank.swap(tmp);
  classes = rank[sa[m - 1]] + 1;

  for (std::uint64_t k = 1; classes < m; k <<= 1) {
    // Order by second key: suffixes with no second half first, then by sa.
    std::uint64_t p = 0;
    for (std::uint64_t i = m - std::min(k, m); i < m; ++i) tmp[p++] = i;
    for (std::uint64_t j = 0; j < m; ++j) {
      if (sa[j] >= k) tmp[p++] = sa[j] - k;
    }
    // Stable counting sort by first key.
    count.assign(classes, 0);
    for (std::uint64_t i = 0; i < m; ++i) ++count[rank[i]];
    std::uint64_t sum = 0;
    for (auto& c : count) {
      const auto v = c;
      c = sum;
      sum += v;
    }
    for (std::uint64_t j = 0; j < m; ++j) sa[count[rank[tmp[j]]]++] = tmp[j];

    auto second = [&](std::uint64_t i) { return i + k < m ? rank[i + k] + 1 : 0; };
    tmp[sa[0]] = 0;
    for (std::uint64_t j = 1; j < m; ++j) {
      const auto a = sa[j - 1], b = sa[j];
      const bool differ = rank[a] != rank[b] || second(a) != second(b);
      tmp[b] = tmp[a] + (differ ? 1 : 0);
    }
    rank.swap(tmp);
    classes = rank[sa[m - 1]] + 1;
  }

  sa.erase(std::find(sa.begin(), sa.end(), n));
  return sa;
}

int compare_suffix(std::span<const TokenId> text, std::uint64_t pos, std::span<const TokenId> query) {
  const std::uint64_t n = text.size();
  for (std::size_t k = 0; k < query.size(); ++k) {
    if (pos + k >= n) return -1;
    const TokenId t = text[pos + k];
    if (t == kSeparator) return -1;
    if (t != query[k]) return t < query[k] ? -1 : 1;
  }
  return 0;
}

SaRange find_range(std::span<const TokenId> text, std::span<const std::uint64_t> sa,
                   std::span<const TokenId> query) {
  const auto lo = std::partition_point(sa.begin(), sa.end(), [&](std::uint64_t pos) {
    return compare_suffix(text, pos, query) < 0;
  });
  const auto hi = std::partition_point(lo, sa.end(), [&](std::uint64_t pos) {
    return compare_suffix(text, pos, query) == 0;
  });
  return {static_cast<std::uint64_t>(lo - sa.begin()), static_cast<std::uint64_t>(hi - sa.begin())};
}

}  // namespace exposcope
