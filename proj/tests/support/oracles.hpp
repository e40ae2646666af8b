#pragma once

// Independent reference implementations used only by tests. None of these
// call into the index or suffix-array code they check.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "exposcope/corpus.hpp"
#include "exposcope/index.hpp"

namespace oracle {

using exposcope::TokenId;
using Doc = std::vector<TokenId>;

// Random documents with word ids in [1, vocab]; token frequencies are skewed
// so that short n-grams repeat.
std::vector<Doc> random_docs(std::mt19937_64& rng, std::size_t total_tokens, std::size_t vocab,
                             std::size_t max_doc_len = 400);

// Builds the corpus layout (separators between documents) directly from ids.
exposcope::TokenizedCorpus make_corpus(const std::vector<Doc>& docs);

// Vocabulary with words "w1".."wN" so that ids equal word numbers.
exposcope::Vocabulary make_vocab(std::size_t words);

std::uint64_t naive_count(const std::vector<Doc>& docs, const std::vector<TokenId>& q);

std::vector<exposcope::MatchInterval> naive_matches(const std::vector<Doc>& docs,
                                                    const std::vector<TokenId>& q);

// Union-find over every pair of match intervals that share a token position.
std::uint64_t naive_exposure(const std::vector<Doc>& docs,
                             const std::vector<std::vector<TokenId>>& phrases);

std::uint64_t naive_cnf(const std::vector<Doc>& docs,
                        const std::vector<std::vector<std::vector<TokenId>>>& clauses);

// Random phrase: half the time a substring of a random document, otherwise random ids.
std::vector<TokenId> random_phrase(std::mt19937_64& rng, const std::vector<Doc>& docs,
                                   std::size_t vocab, std::size_t min_len, std::size_t max_len);

// ASCII-only whitespace split, punctuation trim and lowercase via <cctype>.
std::vector<std::string> reference_tokenize(const std::string& text);

// Average ranks (1-based, ties share the mean of their positions).
std::vector<double> average_ranks(const std::vector<double>& v);
double reference_spearman(const std::vector<double>& x, const std::vector<double>& y);
// 1 - 6 sum d^2 / (n (n^2 - 1)); only valid without ties.
double closed_form_spearman(const std::vector<double>& x, const std::vector<double>& y);

// Bradley-Terry log-likelihood sum_ij w_ij log(p_i / (p_i + p_j)) in log-strength coordinates.
double bt_log_likelihood(const std::vector<std::vector<double>>& w, const std::vector<double>& log_p);

// Maximizes the log-likelihood by a coarse grid over log-strengths followed by
// cyclic coordinate golden-section refinement. Returns log-strengths with zero mean.
std::vector<double> brute_force_bt(const std::vector<std::vector<double>>& w);

}  // namespace oracle
