#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "exposcope/elicitation.hpp"

namespace exposcope {

// w(i, j) = wins of entity i over entity j.
struct WinMatrix {
  std::vector<std::string> ids;
  Eigen::SparseMatrix<double> w;

  static WinMatrix from_triplets(std::vector<std::string> ids, const std::vector<Eigen::Triplet<double>>& wins);
  // Judged outcomes among `ids`; outcomes naming other entities are ignored.
  static WinMatrix from_outcomes(std::vector<std::string> ids, const std::vector<PairOutcome>& outcomes);

  std::size_t size() const { return ids.size(); }
  double wins(std::size_t i, std::size_t j) const { return w.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  WinMatrix transposed() const;
  WinMatrix scaled(double c) const;
};

struct BtConfig {
  double epsilon = 0.01;  // virtual wins per direction on every compared pair
  double tolerance = 1e-10;  // on max |delta log p| per sweep
  int max_iterations = 10000;
#ifdef NDEBUG
  bool check_monotone = false;
#else
  bool check_monotone = true;
#endif

  void validate() const;
};

struct BtStrengths {
  std::vector<std::string> ids;
  Eigen::VectorXd p;  // geometric mean 1
  int iterations = 0;
  bool converged = false;
  double log_likelihood = 0;

  double strength(const std::string& id) const;
  // 1 = strongest; equal strengths broken by id.
  std::vector<std::size_t> ranks() const;
};

// Minorization-maximization fit of the regularized likelihood. Throws
// DomainError listing the components when the regularized win graph is not
// strongly connected (no finite maximizer).
BtStrengths fit_bradley_terry(const WinMatrix& w, const BtConfig& cfg = {});

double bt_log_likelihood(const WinMatrix& w, const Eigen::VectorXd& p, double epsilon);

// P(i beats j) = p_i / (p_i + p_j).
double bt_probability(double p_i, double p_j);

// Strongly connected components of i -> j when i has (regularized) wins over j.
std::vector<std::vector<std::size_t>> win_graph_components(const WinMatrix& w, double epsilon);

// First line {"entities": [...]}, then {"i": id, "j": id, "wins": x} per nonzero.
std::string serialize_win_matrix(const WinMatrix& w);
WinMatrix parse_win_matrix(const std::string& text);

// One {"id", "strength", "rank"} object per line, rank order.
std::string serialize_strengths(const BtStrengths& s);
std::map<std::string, double> parse_strengths(const std::string& text);

}  // namespace exposcope
