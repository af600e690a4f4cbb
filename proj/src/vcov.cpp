#include "dyadrobust/vcov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "dyadrobust/error.hpp"
#include "parallel.hpp"

namespace dyadrobust {
namespace {

constexpr Eigen::Index kBlockRows = 256;

struct Compensated {
  Eigen::MatrixXd sum;
  Eigen::MatrixXd carry;

  Compensated(Eigen::Index rows, Eigen::Index cols)
      : sum(Eigen::MatrixXd::Zero(rows, cols)), carry(Eigen::MatrixXd::Zero(rows, cols)) {}

  // Neumaier summation, entrywise.
  template <typename Derived>
  void add(const Eigen::MatrixBase<Derived>& x) {
    for (Eigen::Index j = 0; j < sum.cols(); ++j) {
      for (Eigen::Index i = 0; i < sum.rows(); ++i) {
        const double s = sum(i, j);
        const double v = x(i, j);
        const double t = s + v;
        carry(i, j) += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
        sum(i, j) = t;
      }
    }
  }

  Eigen::MatrixXd value() const { return sum + carry; }
};

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& M) {
  return 0.5 * (M + M.transpose());
}

// sum_k left_k' right_k over rows, symmetrized.
Eigen::MatrixXd cross_meat(const Eigen::MatrixXd& left, const Eigen::MatrixXd& right,
                           const AccumulationOptions& options) {
  if (!options.deterministic) {
    return symmetrized(left.transpose() * right);
  }
  const Eigen::Index n = left.rows();
  const Eigen::Index p = left.cols();
  const auto blocks = static_cast<std::size_t>((n + kBlockRows - 1) / kBlockRows);
  std::vector<Eigen::MatrixXd> partial(blocks);
  detail::parallel_for(blocks, options.threads, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlockRows;
    const Eigen::Index rows = std::min(kBlockRows, n - begin);
    partial[b] = left.middleRows(begin, rows).transpose() * right.middleRows(begin, rows);
  });
  Compensated acc(p, p);
  for (const auto& block : partial) acc.add(block);
  return symmetrized(acc.value());
}

// Row g of the result is the sum of score rows listed in groups[g].
Eigen::MatrixXd group_sums(const Eigen::MatrixXd& s,
                           const std::vector<std::vector<std::size_t>>& groups,
                           const AccumulationOptions& options) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups.size()), s.cols());
  detail::parallel_for(groups.size(), options.threads, [&](std::size_t g) {
    const auto row = static_cast<Eigen::Index>(g);
    if (options.deterministic) {
      Compensated acc(1, s.cols());
      for (std::size_t k : groups[g]) acc.add(s.row(static_cast<Eigen::Index>(k)));
      out.row(row) = acc.value();
    } else {
      for (std::size_t k : groups[g]) out.row(row) += s.row(static_cast<Eigen::Index>(k));
    }
  });
  return out;
}

std::vector<std::vector<std::size_t>> members_of(const ClusterAssignment& clusters) {
  std::vector<std::vector<std::size_t>> groups(clusters.G());
  for (std::size_t k = 0; k < clusters.n(); ++k) groups[clusters.labels()[k]].push_back(k);
  return groups;
}

Eigen::MatrixXd sandwich(const FitResult& fit, const Eigen::MatrixXd& meat) {
  return symmetrized(fit.bread * meat * fit.bread);
}

void require_aligned(const FitResult& fit, std::size_t n) {
  if (fit.n != n) {
    throw Error(ErrorKind::InvalidArgument,
                "fit has " + std::to_string(fit.n) + " rows but the data has " +
                    std::to_string(n));
  }
}

// Zeroes rows/columns whose variance is below kRoundoffRelTol of the
// absolute-value sandwich |B| |M| |B|, the scale of accumulated rounding.
std::size_t apply_variance_floor(Eigen::MatrixXd& V, const Eigen::MatrixXd& bread,
                                 const Eigen::MatrixXd& abs_meat) {
  const Eigen::MatrixXd abs_bread = bread.cwiseAbs();
  const Eigen::MatrixXd scale = abs_bread * abs_meat * abs_bread;
  std::size_t zeroed = 0;
  for (Eigen::Index j = 0; j < V.rows(); ++j) {
    if (std::abs(V(j, j)) <= kRoundoffRelTol * scale(j, j)) {
      V.row(j).setZero();
      V.col(j).setZero();
      ++zeroed;
    }
  }
  return zeroed;
}

}  // namespace

std::string_view to_string(VcovKind kind) noexcept {
  switch (kind) {
    case VcovKind::HC0: return "hc0";
    case VcovKind::CrOneway: return "cr-oneway";
    case VcovKind::CrDyad: return "cr-dyad";
    case VcovKind::DCR: return "dcr";
    case VcovKind::Oracle: return "oracle";
  }
  return "unknown";
}

std::optional<VcovKind> parse_vcov_kind(std::string_view name) noexcept {
  for (auto kind : {VcovKind::HC0, VcovKind::CrOneway, VcovKind::CrDyad, VcovKind::DCR,
                    VcovKind::Oracle}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

ClusterAssignment::ClusterAssignment(const std::vector<std::size_t>& raw_labels) {
  if (raw_labels.empty()) {
    throw Error(ErrorKind::InvalidArgument, "cluster assignment needs at least one observation");
  }
  std::unordered_map<std::size_t, std::size_t> dense;
  labels_.reserve(raw_labels.size());
  for (std::size_t raw : raw_labels) {
    auto [it, inserted] = dense.try_emplace(raw, dense.size());
    labels_.push_back(it->second);
  }
  G_ = dense.size();
}

DependencyMask::DependencyMask(std::size_t n) : n_(n), bits_(n * n, 0) {
  for (std::size_t k = 0; k < n; ++k) bits_[k * n + k] = 1;
}

void DependencyMask::allow(std::size_t k, std::size_t l) {
  bits_[k * n_ + l] = 1;
  bits_[l * n_ + k] = 1;
}

bool DependencyMask::subset_of(const DependencyMask& other) const {
  if (other.n_ != n_) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

DependencyMask naive_mask(std::size_t n) { return DependencyMask(n); }

DependencyMask cluster_mask(const ClusterAssignment& clusters) {
  DependencyMask mask(clusters.n());
  for (std::size_t k = 0; k < clusters.n(); ++k) {
    for (std::size_t l = k + 1; l < clusters.n(); ++l) {
      if (clusters.labels()[k] == clusters.labels()[l]) mask.allow(k, l);
    }
  }
  return mask;
}

DependencyMask dyadic_mask(const DyadDataset& data) {
  DependencyMask mask(data.n());
  for (std::size_t k = 0; k < data.n(); ++k) {
    const auto& a = data.member_labels(k);
    for (std::size_t l = k + 1; l < data.n(); ++l) {
      const auto& b = data.member_labels(l);
      if (a[0] == b[0] || a[0] == b[1] || a[1] == b[0] || a[1] == b[1]) mask.allow(k, l);
    }
  }
  return mask;
}

Eigen::VectorXd VcovEstimate::standard_errors() const {
  return matrix.diagonal().cwiseMax(0.0).cwiseSqrt();
}

VcovEstimate vcov_hc0(const FitResult& fit, const AccumulationOptions& options) {
  const Eigen::MatrixXd s = scores(fit).scores;
  VcovEstimate est;
  est.kind = VcovKind::HC0;
  est.matrix = sandwich(fit, cross_meat(s, s, options));
  return est;
}

VcovEstimate vcov_cluster(const FitResult& fit, const ClusterAssignment& clusters,
                          VcovKind kind, const AccumulationOptions& options) {
  require_aligned(fit, clusters.n());
  const Eigen::MatrixXd s = scores(fit).scores;
  const Eigen::MatrixXd sums = group_sums(s, members_of(clusters), options);
  VcovEstimate est;
  est.kind = kind;
  est.matrix = sandwich(fit, cross_meat(sums, sums, options));
  return est;
}

ClusterAssignment repeated_dyad_clusters(const DyadDataset& data) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> ids;
  std::vector<std::size_t> labels;
  labels.reserve(data.n());
  for (std::size_t k = 0; k < data.n(); ++k) {
    const auto& m = data.member_labels(k);
    auto [it, inserted] = ids.try_emplace({m[0], m[1]}, ids.size());
    labels.push_back(it->second);
  }
  return ClusterAssignment(labels);
}

VcovEstimate vcov_cr_dyad(const FitResult& fit, const DyadDataset& data,
                          const AccumulationOptions& options) {
  return vcov_cluster(fit, repeated_dyad_clusters(data), VcovKind::CrDyad, options);
}

ClusterAssignment member_clusters(const DyadDataset& data, std::size_t member) {
  std::vector<std::size_t> labels(data.n());
  for (std::size_t k = 0; k < data.n(); ++k) {
    const auto& m = data.member_labels(k);
    labels[k] = (m[0] == member || m[1] == member) ? 0 : k + 1;
  }
  return ClusterAssignment(labels);
}

VcovEstimate vcov_dcr(const FitResult& fit, const DyadDataset& data,
                      const DcrOptions& options) {
  require_aligned(fit, data.n());
  const auto& acc = options.accumulation;
  const Eigen::MatrixXd s = scores(fit).scores;
  const auto incident = incidence(data);
  const auto dyads = repeated_dyad_clusters(data);
  const Eigen::MatrixXd member_sums = group_sums(s, incident, acc);
  const Eigen::MatrixXd dyad_sums = group_sums(s, members_of(dyads), acc);

  // Row k of `partner` sums the scores of every observation sharing a member
  // with k: the two member sums count k's own dyad twice, so one dyad sum is
  // removed.
  const auto n = static_cast<Eigen::Index>(data.n());
  Eigen::MatrixXd partner(n, s.cols());
  Eigen::MatrixXd partner_abs(n, s.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& m = data.member_labels(static_cast<std::size_t>(k));
    const auto a = static_cast<Eigen::Index>(m[0]);
    const auto b = static_cast<Eigen::Index>(m[1]);
    const auto d = static_cast<Eigen::Index>(dyads.labels()[static_cast<std::size_t>(k)]);
    partner.row(k) = (member_sums.row(a) + member_sums.row(b)) - dyad_sums.row(d);
    partner_abs.row(k) = member_sums.row(a).cwiseAbs() + member_sums.row(b).cwiseAbs() +
                         dyad_sums.row(d).cwiseAbs();
  }

  VcovEstimate est;
  est.kind = VcovKind::DCR;
  if (options.path == DcrPath::ScoreSum) {
    est.matrix = sandwich(fit, cross_meat(s, partner, acc));
  } else {
    const std::size_t N = data.member_count();
    Compensated total(static_cast<Eigen::Index>(fit.p), static_cast<Eigen::Index>(fit.p));
    for (std::size_t m = 0; m < N; ++m) {
      total.add(vcov_cluster(fit, member_clusters(data, m), VcovKind::CrOneway, acc).matrix);
    }
    const Eigen::MatrixXd V_D = vcov_cr_dyad(fit, data, acc).matrix;
    const Eigen::MatrixXd V_0 = vcov_hc0(fit, acc).matrix;
    est.matrix = symmetrized(total.value() - V_D - static_cast<double>(N - 2) * V_0);
  }

  if (options.repair) {
    const Eigen::MatrixXd abs_meat = cross_meat(s.cwiseAbs(), partner_abs, acc);
    est.variances_zeroed = apply_variance_floor(est.matrix, fit.bread, abs_meat);
    est = psd_repair(std::move(est));
  }
  return est;
}

VcovEstimate vcov_oracle(const FitResult& fit, const DependencyMask& mask) {
  require_aligned(fit, mask.n());
  const Eigen::MatrixXd s = scores(fit).scores;
  const auto p = static_cast<Eigen::Index>(fit.p);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t k = 0; k < mask.n(); ++k) {
    for (std::size_t l = 0; l < mask.n(); ++l) {
      if (!mask(k, l)) continue;
      meat += s.row(static_cast<Eigen::Index>(k)).transpose() *
              s.row(static_cast<Eigen::Index>(l));
    }
  }
  VcovEstimate est;
  est.kind = VcovKind::Oracle;
  est.matrix = sandwich(fit, symmetrized(meat));
  return est;
}

VcovEstimate psd_repair(VcovEstimate estimate) {
  auto& M = estimate.matrix;
  if (M.size() == 0) return estimate;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(M));
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidArgument, "eigendecomposition failed");
  }
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double min_lambda = lambda.minCoeff();
  if (!estimate.min_eigenvalue_before_repair) {
    estimate.min_eigenvalue_before_repair = min_lambda;
  }
  if (min_lambda >= 0.0) return estimate;

  const double scale = lambda.cwiseAbs().maxCoeff();
  std::size_t truncated = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -kRoundoffRelTol * scale) ++truncated;
  }
  const Eigen::MatrixXd& Q = eig.eigenvectors();
  M = symmetrized(Q * lambda.cwiseMax(0.0).asDiagonal() * Q.transpose());
  estimate.psd_repaired = true;
  estimate.negative_eigenvalues_truncated += truncated;
  return estimate;
}

CorrectedErrors small_sample_correct(const Eigen::VectorXd& se, std::size_t units) {
  if (units < 2) {
    throw Error(ErrorKind::DegenerateUnits,
                "small-sample correction needs at least two units, got " +
                    std::to_string(units))
        .with_value(static_cast<double>(units));
  }
  const double N = static_cast<double>(units);
  return CorrectedErrors{se * std::sqrt(N / (N - 1.0)), units - 1};
}

std::size_t correction_units(VcovKind kind, const DyadDataset& data) {
  switch (kind) {
    case VcovKind::HC0: return data.n();
    case VcovKind::CrDyad: return repeated_dyad_clusters(data).G();
    case VcovKind::DCR: return data.member_count();
    case VcovKind::CrOneway:
    case VcovKind::Oracle: break;
  }
  throw Error(ErrorKind::InvalidArgument,
              "no unit count defined for estimator '" + std::string(to_string(kind)) + "'");
}

}  // namespace dyadrobust
