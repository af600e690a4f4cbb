#include "dyadrobust/inference.hpp"

#include <cmath>
#include <set>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "dyadrobust/error.hpp"

namespace dyadrobust {
namespace {

struct Reference {
  std::optional<double> df;

  double upper_tail(double x) const {
    if (df && std::isfinite(*df)) {
      return boost::math::cdf(boost::math::complement(boost::math::students_t(*df), x));
    }
    return boost::math::cdf(boost::math::complement(boost::math::normal(), x));
  }

  double upper_quantile(double tail) const {
    if (df && std::isfinite(*df)) {
      return boost::math::quantile(
          boost::math::complement(boost::math::students_t(*df), tail));
    }
    return boost::math::quantile(boost::math::complement(boost::math::normal(), tail));
  }
};

}  // namespace

const InferenceRow* InferenceTable::find(std::string_view name) const {
  for (const auto& row : rows) {
    if (row.name == name) return &row;
  }
  return nullptr;
}

InferenceTable infer_from_se(const std::vector<std::string>& names,
                             const Eigen::VectorXd& estimates, const Eigen::VectorXd& se,
                             VcovKind estimator, double level,
                             std::optional<double> df) {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "confidence level must lie in (0, 1)")
        .with_value(level);
  }
  if (df && !(*df > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "degrees of freedom must be positive")
        .with_value(*df);
  }
  if (static_cast<std::size_t>(estimates.size()) != names.size() ||
      se.size() != estimates.size()) {
    throw Error(ErrorKind::InvalidArgument, "estimate, SE and name counts differ");
  }
  const Reference ref{df};
  const double q = ref.upper_quantile((1.0 - level) / 2.0);

  InferenceTable table;
  table.estimator = estimator;
  table.df = df;
  table.level = level;
  table.rows.reserve(names.size());
  for (Eigen::Index j = 0; j < estimates.size(); ++j) {
    InferenceRow row;
    row.name = names[static_cast<std::size_t>(j)];
    row.estimate = estimates(j);
    row.se = se(j);
    if (row.se > 0.0) {
      const double stat = row.estimate / row.se;
      row.statistic = stat;
      row.p_value = std::min(1.0, 2.0 * ref.upper_tail(std::abs(stat)));
    } else {
      row.se = 0.0;
      row.zero_se = true;
    }
    row.ci_low = row.estimate - q * row.se;
    row.ci_high = row.estimate + q * row.se;
    table.rows.push_back(std::move(row));
  }
  return table;
}

InferenceTable infer(const FitResult& fit, const VcovEstimate& V, double level,
                     std::optional<double> df) {
  if (static_cast<std::size_t>(V.matrix.rows()) != fit.p ||
      static_cast<std::size_t>(V.matrix.cols()) != fit.p) {
    throw Error(ErrorKind::InvalidArgument, "variance matrix dimension does not match fit");
  }
  return infer_from_se(fit.column_names, fit.coefficients, V.standard_errors(), V.kind,
                       level, df);
}

InferenceTable infer_small_sample(const FitResult& fit, const VcovEstimate& V,
                                  std::size_t units, double level) {
  if (static_cast<std::size_t>(V.matrix.rows()) != fit.p) {
    throw Error(ErrorKind::InvalidArgument, "variance matrix dimension does not match fit");
  }
  const auto corrected = small_sample_correct(V.standard_errors(), units);
  return infer_from_se(fit.column_names, fit.coefficients, corrected.se, V.kind, level,
                       static_cast<double>(corrected.df));
}

std::string_view to_string(Transition t) noexcept {
  switch (t) {
    case Transition::SS: return "SS";
    case Transition::SI: return "SI";
    case Transition::IS: return "IS";
    case Transition::II: return "II";
  }
  return "";
}

std::optional<Transition> parse_transition(std::string_view s) noexcept {
  for (auto t : {Transition::SS, Transition::SI, Transition::IS, Transition::II}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

Transition classify_transition(double original_p, double dcr_p) noexcept {
  const bool was = original_p < kSignificanceLevel;
  const bool is = dcr_p < kSignificanceLevel;
  if (was) return is ? Transition::SS : Transition::SI;
  return is ? Transition::IS : Transition::II;
}

KevRecord make_kev_record(std::string study_id, std::string kev_name, double original_se,
                          double dcr_se, std::optional<double> original_p,
                          std::optional<double> dcr_p) {
  KevRecord r;
  r.study_id = std::move(study_id);
  r.kev_name = std::move(kev_name);
  r.original_se = original_se;
  r.dcr_se = dcr_se;
  r.original_p = original_p;
  r.dcr_p = dcr_p;
  if (original_se > 0.0 && dcr_se > 0.0) r.ser = dcr_se / original_se;
  if (original_p && dcr_p) r.transition = classify_transition(*original_p, *dcr_p);
  return r;
}

std::vector<KevRecord> ser(const InferenceTable& original, const InferenceTable& dcr,
                           const std::vector<std::string>& kev_names,
                           const std::string& study_id) {
  std::vector<KevRecord> out;
  out.reserve(kev_names.size());
  for (const auto& name : kev_names) {
    const InferenceRow* o = original.find(name);
    const InferenceRow* d = dcr.find(name);
    if (!o || !d) {
      throw Error(ErrorKind::MismatchedCoefficients,
                  "KEV '" + name + "' is missing from one of the tables")
          .at_column(name);
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(o->estimate));
    if (std::abs(o->estimate - d->estimate) > tol) {
      throw Error(ErrorKind::MismatchedCoefficients,
                  "KEV '" + name + "' has different estimates in the two tables")
          .at_column(name);
    }
    out.push_back(make_kev_record(study_id, name, o->se, d->se, o->p_value, d->p_value));
  }
  return out;
}

std::vector<AggregateReport> isfw_aggregate(const std::vector<KevRecord>& records,
                                            const GroupKey& key,
                                            const std::string& grouping) {
  if (records.empty()) {
    throw Error(ErrorKind::EmptyGroup, "no KEV records to aggregate");
  }
  // group -> study -> records, both ordered for deterministic output
  std::map<std::string, std::map<std::string, std::vector<const KevRecord*>>> groups;
  for (const auto& r : records) groups[key(r)][r.study_id].push_back(&r);

  std::vector<AggregateReport> reports;
  for (const auto& [group_key, studies] : groups) {
    AggregateReport rep;
    rep.grouping = grouping;
    rep.key = group_key;
    rep.n_studies = studies.size();

    double ser_sum = 0.0;
    std::size_t ser_studies = 0;
    std::array<double, 4> prop_sum{};
    std::size_t transition_studies = 0;
    for (const auto& [study, recs] : studies) {
      rep.n_kevs += recs.size();
      double study_ser = 0.0;
      std::size_t n_ser = 0;
      std::array<std::size_t, 4> counts{};
      std::size_t n_transition = 0;
      for (const KevRecord* r : recs) {
        if (r->ser) {
          study_ser += *r->ser;
          ++n_ser;
        } else {
          ++rep.undefined_ser;
        }
        if (r->transition) {
          ++counts[static_cast<std::size_t>(*r->transition)];
          ++n_transition;
        } else {
          ++rep.undefined_transition;
        }
      }
      if (n_ser > 0) {
        ser_sum += study_ser / static_cast<double>(n_ser);
        ++ser_studies;
      }
      if (n_transition > 0) {
        for (std::size_t t = 0; t < 4; ++t) {
          prop_sum[t] += static_cast<double>(counts[t]) / static_cast<double>(n_transition);
        }
        ++transition_studies;
      }
    }
    if (ser_studies == 0 || transition_studies == 0) {
      throw Error(ErrorKind::EmptyGroup,
                  "group '" + group_key + "' has no KEV with a defined SER and transition");
    }
    rep.isfw_ser = ser_sum / static_cast<double>(ser_studies);
    for (std::size_t t = 0; t < 4; ++t) {
      rep.proportions[t] = prop_sum[t] / static_cast<double>(transition_studies);
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace dyadrobust
