#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dyadrobust/data.hpp"
#include "dyadrobust/ols.hpp"

namespace dyadrobust::testing {

// Fixture D1: dyads (1,2),(1,2),(1,3),(2,3); x = 0,1,2,3; y = 0,1,2,3.5.
inline DyadDataset make_d1() {
  const std::vector<std::pair<const char*, const char*>> pairs{
      {"1", "2"}, {"1", "2"}, {"1", "3"}, {"2", "3"}};
  const double x[] = {0, 1, 2, 3};
  const double y[] = {0, 1, 2, 3.5};
  std::vector<DyadObservation> obs;
  for (std::size_t k = 0; k < 4; ++k) {
    obs.push_back(DyadObservation{MemberId(pairs[k].first), MemberId(pairs[k].second),
                                  static_cast<std::int64_t>(k + 1), y[k], {x[k]}});
  }
  return DyadDataset(std::move(obs), {"x"});
}

inline FitResult fit_with_intercept(const DyadDataset& data) {
  return fit_ols(build_design(data, DesignSpec{}), data.outcome_vector());
}

// Random dyadic dataset with n <= max_n observations over <= max_members
// members and p_raw regressors. Outcomes carry member effects so that
// incident observations are genuinely correlated.
inline DyadDataset random_dataset(std::mt19937_64& rng, std::size_t max_n,
                                  std::size_t max_members, std::size_t p_raw) {
  std::uniform_int_distribution<std::size_t> members_dist(2, max_members);
  const std::size_t N = members_dist(rng);
  const std::size_t min_n = p_raw + 3;
  std::uniform_int_distribution<std::size_t> n_dist(min_n, std::max(min_n, max_n));
  const std::size_t n = n_dist(rng);
  std::uniform_int_distribution<std::size_t> member(0, N - 1);
  std::uniform_int_distribution<int> period(1, 3);
  std::normal_distribution<double> normal;

  std::vector<double> effect(N);
  for (auto& e : effect) e = normal(rng);
  std::vector<std::string> names;
  for (std::size_t p = 0; p < p_raw; ++p) names.push_back("x" + std::to_string(p + 1));

  std::vector<DyadObservation> obs;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t a = member(rng);
    std::size_t b = member(rng);
    while (b == a) b = member(rng);
    std::vector<double> x(p_raw);
    for (auto& v : x) v = normal(rng);
    double y = effect[a] + effect[b] + normal(rng);
    for (double v : x) y += 0.5 * v;
    obs.push_back(DyadObservation{MemberId("c" + std::to_string(a)),
                                  MemberId("c" + std::to_string(b)), period(rng), y,
                                  std::move(x)});
  }
  return DyadDataset(std::move(obs), names);
}

inline double max_abs(const Eigen::MatrixXd& A) {
  return A.size() ? A.cwiseAbs().maxCoeff() : 0.0;
}

// |A - B| <= tol * max|B| entrywise (scale floor guards the all-zero case).
inline bool close_rel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double tol,
                      double scale_floor = 1e-300) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) return false;
  return max_abs(A - B) <= tol * std::max(max_abs(B), scale_floor);
}

inline Eigen::MatrixXd random_rotation(std::mt19937_64& rng, Eigen::Index p) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd G(p, p);
  for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  return qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
}

}  // namespace dyadrobust::testing
