#include "exposcope/spearman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace exposcope {

Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double mean = 0.5 * static_cast<double>(i + 1 + j);
    for (Eigen::Index k = i; k < j; ++k) r[order[k]] = mean;
    i = j;
  }
  return r;
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) {
    throw DomainError("length mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw DomainError("correlation needs at least two observations");
  if (!x.allFinite() || !y.allFinite()) throw DomainError("correlation input is not finite");
  const Eigen::VectorXd dx = x.array() - x.mean();
  const Eigen::VectorXd dy = y.array() - y.mean();
  const double sxx = dx.squaredNorm();
  const double syy = dy.squaredNorm();
  if (sxx == 0 || syy == 0) throw UndefinedCorrelation("correlation undefined for a constant vector");
  return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) {
    throw DomainError("length mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  if (!x.allFinite() || !y.allFinite()) throw DomainError("correlation input is not finite");
  return pearson(average_ranks(x), average_ranks(y));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return spearman(Map(x.data(), static_cast<Eigen::Index>(x.size())),
                  Map(y.data(), static_cast<Eigen::Index>(y.size())));
}

}  // namespace exposcope
