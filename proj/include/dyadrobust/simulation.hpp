#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dyadrobust/data.hpp"
#include "dyadrobust/vcov.hpp"

namespace dyadrobust {

/// Member-additive dyadic data-generating process:
///
///   y_ijt = slope * x_ijt + alpha * (X_i + X_j) + U_ijt
///   x_ijt = sqrt(share / 2) * (W_i + W_j) + sqrt(1 - share) * e_ijt
///
/// X_m ~ N(0, member_var) and W_m ~ N(0, 1) are drawn once per member and
/// replication; U ~ N(0, noise_var) and e ~ N(0, 1) per dyad-period. Errors of
/// two dyads sharing member m then covary by alpha^2 * member_var.
struct SimConfig {
  std::size_t n_members = 50;
  std::size_t periods = 1;
  /// Probability each unordered pair is observed; 1 gives all pairs.
  double density = 1.0;
  double member_loading = 1.0;
  double member_var = 1.0;
  double noise_var = 1.0;
  double slope_true = 1.0;
  /// Share of regressor variance coming from member-level components.
  double regressor_member_share = 0.5;
  std::size_t replications = 2000;
  std::uint64_t seed = 0;
  double level = 0.95;
  bool small_sample = false;

  /// Throws Error(ConfigError) on an invalid field.
  void validate() const;
};

/// Reads `key = value` lines; '#' starts a comment. Keys: members, periods,
/// density, alpha, member_var, noise_var, slope, regressor_share, reps, seed,
/// level, small_sample. Unset keys keep the values already in `base`.
SimConfig read_sim_config(std::istream& in, SimConfig base = {});

/// Deterministic in (cfg.seed, rep); independent of call order or thread.
DyadDataset simulate_dataset(const SimConfig& cfg, std::size_t rep);

struct EstimatorCoverage {
  VcovKind kind = VcovKind::HC0;
  double coverage = 0.0;
  double mean_se = 0.0;
  /// Mean over replications of se / naive se.
  double mean_ser_vs_naive = 0.0;
};

struct CoverageResult {
  SimConfig config;
  /// Order: hc0 (naive), cr-dyad, dcr.
  std::vector<EstimatorCoverage> estimators;
  double mean_beta = 0.0;
  double sd_beta = 0.0;

  const EstimatorCoverage& of(VcovKind kind) const;
};

/// Monte Carlo coverage of nominal-level CIs for the slope. Replications run
/// on up to `threads` workers and are reduced in replication order.
CoverageResult run_coverage(const SimConfig& cfg, unsigned threads = 1);

}  // namespace dyadrobust
