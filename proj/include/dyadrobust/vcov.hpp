#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dyadrobust/data.hpp"
#include "dyadrobust/ols.hpp"

namespace dyadrobust {

enum class VcovKind { HC0, CrOneway, CrDyad, DCR, Oracle };

std::string_view to_string(VcovKind kind) noexcept;
/// Accepts "hc0", "cr-oneway", "cr-dyad", "dcr", "oracle".
std::optional<VcovKind> parse_vcov_kind(std::string_view name) noexcept;

/// Relative cutoff shared by the eigenvalue clamp and the variance floor:
/// anything smaller than this fraction of the matrix scale is roundoff.
inline constexpr double kRoundoffRelTol = 1e-12;

/// One cluster id per observation. Labels are densified to 0..G-1 in order of
/// first appearance, so two assignments describing the same partition with the
/// same observation order compare equal.
class ClusterAssignment {
 public:
  explicit ClusterAssignment(const std::vector<std::size_t>& raw_labels);

  std::size_t n() const noexcept { return labels_.size(); }
  std::size_t G() const noexcept { return G_; }
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }

  bool operator==(const ClusterAssignment&) const = default;

 private:
  std::vector<std::size_t> labels_;
  std::size_t G_ = 0;
};

/// Symmetric n x n boolean matrix; entry (k, l) marks E[u_k u_l] as allowed
/// to be nonzero. The diagonal is always set.
class DependencyMask {
 public:
  explicit DependencyMask(std::size_t n);

  std::size_t n() const noexcept { return n_; }
  bool operator()(std::size_t k, std::size_t l) const { return bits_[k * n_ + l] != 0; }
  void allow(std::size_t k, std::size_t l);
  /// Entrywise: every pair allowed here is allowed in other.
  bool subset_of(const DependencyMask& other) const;

  bool operator==(const DependencyMask&) const = default;

 private:
  std::size_t n_;
  std::vector<char> bits_;
};

DependencyMask naive_mask(std::size_t n);
DependencyMask cluster_mask(const ClusterAssignment& clusters);
/// (k, l) allowed iff the two observations share at least one member.
DependencyMask dyadic_mask(const DyadDataset& data);

struct VcovEstimate {
  Eigen::MatrixXd matrix;
  VcovKind kind = VcovKind::HC0;
  bool psd_repaired = false;
  std::size_t negative_eigenvalues_truncated = 0;
  std::optional<double> min_eigenvalue_before_repair;
  /// Coefficients whose variance fell below the roundoff floor and were zeroed
  /// together with their covariances (DCR only).
  std::size_t variances_zeroed = 0;

  Eigen::VectorXd standard_errors() const;
};

struct AccumulationOptions {
  /// Blocked, compensated accumulation in a fixed order. Results are then
  /// bit-identical for every thread count.
  bool deterministic = true;
  unsigned threads = 1;
};

VcovEstimate vcov_hc0(const FitResult& fit, const AccumulationOptions& options = {});

/// One-way cluster-robust (Liang-Zeger) estimator without small-sample
/// multiplier.
VcovEstimate vcov_cluster(const FitResult& fit, const ClusterAssignment& clusters,
                          VcovKind kind = VcovKind::CrOneway,
                          const AccumulationOptions& options = {});

/// Cluster id = canonical (member_a, member_b) pair, across all periods.
ClusterAssignment repeated_dyad_clusters(const DyadDataset& data);

/// vcov_cluster on repeated-dyad clusters, tagged CrDyad.
VcovEstimate vcov_cr_dyad(const FitResult& fit, const DyadDataset& data,
                          const AccumulationOptions& options = {});

/// Observations incident to member label m form cluster 0; every other
/// observation is a singleton.
ClusterAssignment member_clusters(const DyadDataset& data, std::size_t member);

enum class DcrPath {
  /// O(n p^2 + N p): per-member and per-dyad score sums.
  ScoreSum,
  /// Literal sum of N member-specific cluster estimators minus the
  /// repeated-dyad and (N-2) HC0 terms. O(N n p^2); reference only.
  Decomposition,
};

struct DcrOptions {
  DcrPath path = DcrPath::ScoreSum;
  /// Apply the variance floor and eigenvalue clamp to the final matrix.
  bool repair = true;
  AccumulationOptions accumulation{};
};

/// Dyadic cluster-robust variance. Observations sharing at least one member
/// may have correlated errors; all other pairs are independent.
VcovEstimate vcov_dcr(const FitResult& fit, const DyadDataset& data,
                      const DcrOptions& options = {});

/// Brute-force sandwich with meat = sum over allowed (k, l) of s_k' s_l.
/// O(n^2 p^2); intended as a test oracle. Never repaired.
VcovEstimate vcov_oracle(const FitResult& fit, const DependencyMask& mask);

/// Eigenvalue truncation to the PSD cone. Eigenvalues below
/// -kRoundoffRelTol * max|lambda| are counted as truncated; smaller negative
/// ones are clamped silently. Inputs with no negative eigenvalue are returned
/// unchanged.
VcovEstimate psd_repair(VcovEstimate estimate);

struct CorrectedErrors {
  Eigen::VectorXd se;
  std::size_t df = 0;
};

/// Multiplies by sqrt(N/(N-1)); df = N-1. N is the member count for DCR and
/// the cluster count G for one-way estimators.
CorrectedErrors small_sample_correct(const Eigen::VectorXd& se, std::size_t units);

/// Number of independent units the small-sample correction uses for kind.
std::size_t correction_units(VcovKind kind, const DyadDataset& data);

}  // namespace dyadrobust
