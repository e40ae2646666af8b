#pragma once

#include <span>

#include <Eigen/Dense>

#include "exposcope/error.hpp"

namespace exposcope {

// Raised when a correlation has no value (a constant input).
class UndefinedCorrelation : public DomainError {
 public:
  using DomainError::DomainError;
};

// 1-based ranks; tied values share the mean of their positions.
Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& x);

double pearson(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

// Pearson correlation of average ranks.
double spearman(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace exposcope
