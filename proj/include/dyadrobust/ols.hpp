#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dyadrobust/data.hpp"

namespace dyadrobust {

/// Reciprocal condition numbers below this are rejected as rank deficient.
inline constexpr double kMinReciprocalCondition = 1e-12;

struct FitResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  /// (X'X)^{-1}, exactly symmetric.
  Eigen::MatrixXd bread;
  std::shared_ptr<const Eigen::MatrixXd> design;
  std::vector<std::string> column_names;
  std::size_t n = 0;
  std::size_t p = 0;
  /// 1-norm reciprocal condition estimate of X.
  double reciprocal_condition = 0.0;
};

/// Least squares via column-pivoted Householder QR. The bread is formed as
/// P R^{-1} R^{-T} P^T from the triangular factor, never by inverting X'X.
/// Throws Error(RankDeficient) with the condition estimate as value.
FitResult fit_ols(Eigen::MatrixXd X, const Eigen::VectorXd& y,
                  std::vector<std::string> column_names = {});
FitResult fit_ols(const Design& design, const Eigen::VectorXd& y);

/// n x p matrix of per-observation scores: row k = x_k * u_k.
struct ScoreSet {
  Eigen::MatrixXd scores;
};

ScoreSet scores(const FitResult& fit);

}  // namespace dyadrobust
