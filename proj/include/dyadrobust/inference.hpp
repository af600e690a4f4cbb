#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dyadrobust/ols.hpp"
#include "dyadrobust/vcov.hpp"

namespace dyadrobust {

/// Two-sided significance threshold; p == 0.05 counts as insignificant.
inline constexpr double kSignificanceLevel = 0.05;

struct InferenceRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  // Undefined when se == 0.
  std::optional<double> statistic;
  std::optional<double> p_value;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool zero_se = false;
};

struct InferenceTable {
  std::vector<InferenceRow> rows;
  VcovKind estimator = VcovKind::HC0;
  /// Absent: normal reference distribution.
  std::optional<double> df;
  double level = 0.95;

  const InferenceRow* find(std::string_view name) const;
};

/// se_j = sqrt(V_jj); statistic = estimate / se; two-sided p and symmetric
/// CI from N(0,1), or from t(df) when df is given and finite.
InferenceTable infer(const FitResult& fit, const VcovEstimate& V, double level = 0.95,
                     std::optional<double> df = std::nullopt);

/// As infer, with SEs scaled by sqrt(units/(units-1)) and t(units-1).
InferenceTable infer_small_sample(const FitResult& fit, const VcovEstimate& V,
                                  std::size_t units, double level = 0.95);

InferenceTable infer_from_se(const std::vector<std::string>& names,
                             const Eigen::VectorXd& estimates, const Eigen::VectorXd& se,
                             VcovKind estimator, double level,
                             std::optional<double> df);

enum class Transition { SS, SI, IS, II };

std::string_view to_string(Transition t) noexcept;
std::optional<Transition> parse_transition(std::string_view s) noexcept;
Transition classify_transition(double original_p, double dcr_p) noexcept;

struct KevRecord {
  std::string study_id;
  std::string kev_name;
  double original_se = 0.0;
  double dcr_se = 0.0;
  std::optional<double> original_p;
  std::optional<double> dcr_p;
  /// dcr_se / original_se; absent if either SE is zero.
  std::optional<double> ser;
  /// Absent if either p-value is undefined.
  std::optional<Transition> transition;
  /// Free-form grouping metadata (year, subfield, ...).
  std::map<std::string, std::string> attributes;
};

/// Fills ser and transition from the SE and p fields.
KevRecord make_kev_record(std::string study_id, std::string kev_name, double original_se,
                          double dcr_se, std::optional<double> original_p,
                          std::optional<double> dcr_p);

/// One record per KEV name, comparing the original estimator's table with the
/// DCR table. Both tables must carry the same estimate for every KEV.
std::vector<KevRecord> ser(const InferenceTable& original, const InferenceTable& dcr,
                           const std::vector<std::string>& kev_names,
                           const std::string& study_id = "study");

struct AggregateReport {
  std::string grouping;
  std::string key;
  std::size_t n_studies = 0;
  std::size_t n_kevs = 0;
  double isfw_ser = 0.0;
  /// Indexed by Transition: SS, SI, IS, II.
  std::array<double, 4> proportions{};
  std::size_t undefined_ser = 0;
  std::size_t undefined_transition = 0;

  double proportion(Transition t) const {
    return proportions[static_cast<std::size_t>(t)];
  }
};

using GroupKey = std::function<std::string(const KevRecord&)>;

/// Inverse study-frequency weighting: within each group, average per-study
/// means so that every study carries equal weight regardless of how many
/// KEVs it contributes. Groups come back sorted by key.
std::vector<AggregateReport> isfw_aggregate(const std::vector<KevRecord>& records,
                                            const GroupKey& key,
                                            const std::string& grouping = "all");

}  // namespace dyadrobust
