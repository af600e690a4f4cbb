#include "dyadrobust/simulation.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <random>

#include "dyadrobust/error.hpp"
#include "dyadrobust/inference.hpp"
#include "dyadrobust/ols.hpp"
#include "parallel.hpp"

namespace dyadrobust {
namespace {

// Counter-based streams: every draw is keyed by (seed, rep, stream, id), so a
// replication never depends on how many numbers another one consumed.
enum class Stream : std::uint64_t {
  MemberEffect = 1,
  MemberRegressor = 2,
  DyadNoise = 3,
  RegressorNoise = 4,
  DyadSelection = 5,
};

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// SplitMix64 as a UniformRandomBitGenerator.
class KeyedEngine {
 public:
  using result_type = std::uint64_t;

  KeyedEngine(std::uint64_t seed, std::uint64_t rep, Stream stream, std::uint64_t id)
      : state_(mix64(mix64(mix64(seed) ^ rep) ^ static_cast<std::uint64_t>(stream)) ^
               mix64(id + 0x9e3779b97f4a7c15ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

double standard_normal(const SimConfig& cfg, std::size_t rep, Stream stream, std::uint64_t id) {
  KeyedEngine engine(cfg.seed, rep, stream, id);
  std::normal_distribution<double> dist;
  return dist(engine);
}

double uniform01(const SimConfig& cfg, std::size_t rep, Stream stream, std::uint64_t id) {
  KeyedEngine engine(cfg.seed, rep, stream, id);
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

std::string member_name(std::size_t m, std::size_t count) {
  std::string digits = std::to_string(m);
  const std::size_t width = std::to_string(count - 1).size();
  return "m" + std::string(width - digits.size(), '0') + digits;
}

struct ReplicationOutcome {
  double beta = 0.0;
  std::array<double, 3> se{};
  std::array<bool, 3> covered{};
};

constexpr std::array<VcovKind, 3> kSimKinds{VcovKind::HC0, VcovKind::CrDyad, VcovKind::DCR};

void config_fail(const std::string& message) {
  throw Error(ErrorKind::ConfigError, message);
}

template <typename T>
T parse_value(const std::string& key, std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    config_fail("cannot parse value '" + std::string(text) + "' for '" + key + "'");
  }
  return value;
}

std::string_view trimmed(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void SimConfig::validate() const {
  if (n_members < 2) config_fail("members must be at least 2");
  if (periods < 1) config_fail("periods must be at least 1");
  if (!(density > 0.0 && density <= 1.0)) config_fail("density must lie in (0, 1]");
  if (!std::isfinite(member_loading)) config_fail("alpha must be finite");
  if (!(member_var >= 0.0) || !std::isfinite(member_var)) {
    config_fail("member_var must be a finite non-negative variance");
  }
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
    config_fail("noise_var must be a finite non-negative variance");
  }
  if (!std::isfinite(slope_true)) config_fail("slope must be finite");
  if (!(regressor_member_share >= 0.0 && regressor_member_share < 1.0)) {
    config_fail("regressor_share must lie in [0, 1)");
  }
  if (replications < 1) config_fail("reps must be at least 1");
  if (!(level > 0.0 && level < 1.0)) config_fail("level must lie in (0, 1)");
}

SimConfig read_sim_config(std::istream& in, SimConfig cfg) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trimmed(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      config_fail("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trimmed(view.substr(0, eq)));
    const std::string_view value = trimmed(view.substr(eq + 1));
    if (key == "members") cfg.n_members = parse_value<std::size_t>(key, value);
    else if (key == "periods") cfg.periods = parse_value<std::size_t>(key, value);
    else if (key == "density") cfg.density = parse_value<double>(key, value);
    else if (key == "alpha") cfg.member_loading = parse_value<double>(key, value);
    else if (key == "member_var") cfg.member_var = parse_value<double>(key, value);
    else if (key == "noise_var") cfg.noise_var = parse_value<double>(key, value);
    else if (key == "slope") cfg.slope_true = parse_value<double>(key, value);
    else if (key == "regressor_share") cfg.regressor_member_share = parse_value<double>(key, value);
    else if (key == "reps") cfg.replications = parse_value<std::size_t>(key, value);
    else if (key == "seed") cfg.seed = parse_value<std::uint64_t>(key, value);
    else if (key == "level") cfg.level = parse_value<double>(key, value);
    else if (key == "small_sample") {
      if (value == "true" || value == "1") cfg.small_sample = true;
      else if (value == "false" || value == "0") cfg.small_sample = false;
      else config_fail("small_sample must be true or false");
    } else {
      config_fail("unknown key '" + key + "'");
    }
  }
  return cfg;
}

DyadDataset simulate_dataset(const SimConfig& cfg, std::size_t rep) {
  cfg.validate();
  const std::size_t N = cfg.n_members;
  std::vector<double> member_effect(N);
  std::vector<double> member_regressor(N);
  for (std::size_t m = 0; m < N; ++m) {
    member_effect[m] =
        std::sqrt(cfg.member_var) * standard_normal(cfg, rep, Stream::MemberEffect, m);
    member_regressor[m] = standard_normal(cfg, rep, Stream::MemberRegressor, m);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      const std::uint64_t id = i * N + j;
      if (cfg.density >= 1.0 || uniform01(cfg, rep, Stream::DyadSelection, id) < cfg.density) {
        pairs.emplace_back(i, j);
      }
    }
  }
  if (pairs.empty()) pairs.emplace_back(0, 1);

  std::vector<MemberId> names;
  names.reserve(N);
  for (std::size_t m = 0; m < N; ++m) names.emplace_back(member_name(m, N));

  const double shared = std::sqrt(cfg.regressor_member_share / 2.0);
  const double idiosyncratic = std::sqrt(1.0 - cfg.regressor_member_share);
  const double noise_sd = std::sqrt(cfg.noise_var);
  std::vector<DyadObservation> obs;
  obs.reserve(pairs.size() * cfg.periods);
  for (std::size_t t = 0; t < cfg.periods; ++t) {
    for (const auto& [i, j] : pairs) {
      const std::uint64_t id = (t * N + i) * N + j;
      const double x = shared * (member_regressor[i] + member_regressor[j]) +
                       idiosyncratic * standard_normal(cfg, rep, Stream::RegressorNoise, id);
      const double u = noise_sd * standard_normal(cfg, rep, Stream::DyadNoise, id);
      const double y = cfg.slope_true * x +
                       cfg.member_loading * (member_effect[i] + member_effect[j]) + u;
      obs.push_back(DyadObservation{names[i], names[j], static_cast<std::int64_t>(t + 1), y, {x}});
    }
  }
  return DyadDataset(std::move(obs), {"x"});
}

const EstimatorCoverage& CoverageResult::of(VcovKind kind) const {
  for (const auto& e : estimators) {
    if (e.kind == kind) return e;
  }
  throw Error(ErrorKind::InvalidArgument,
              "no coverage recorded for '" + std::string(to_string(kind)) + "'");
}

CoverageResult run_coverage(const SimConfig& cfg, unsigned threads) {
  cfg.validate();
  std::vector<ReplicationOutcome> outcomes(cfg.replications);
  detail::parallel_for(cfg.replications, threads, [&](std::size_t rep) {
    const DyadDataset data = simulate_dataset(cfg, rep);
    const Design design = build_design(data, DesignSpec{});
    const FitResult fit = fit_ols(design, data.outcome_vector());

    std::array<VcovEstimate, 3> V{vcov_hc0(fit), vcov_cr_dyad(fit, data), vcov_dcr(fit, data)};
    ReplicationOutcome& out = outcomes[rep];
    out.beta = fit.coefficients(1);
    for (std::size_t e = 0; e < kSimKinds.size(); ++e) {
      const InferenceTable table =
          cfg.small_sample
              ? infer_small_sample(fit, V[e], correction_units(kSimKinds[e], data), cfg.level)
              : infer(fit, V[e], cfg.level);
      const InferenceRow& row = table.rows[1];
      out.se[e] = row.se;
      out.covered[e] = row.ci_low <= cfg.slope_true && cfg.slope_true <= row.ci_high;
    }
  });

  const double reps = static_cast<double>(cfg.replications);
  CoverageResult result;
  result.config = cfg;
  double beta_sum = 0.0;
  for (const auto& o : outcomes) beta_sum += o.beta;
  result.mean_beta = beta_sum / reps;
  double ss = 0.0;
  for (const auto& o : outcomes) ss += (o.beta - result.mean_beta) * (o.beta - result.mean_beta);
  result.sd_beta = cfg.replications > 1 ? std::sqrt(ss / (reps - 1.0)) : 0.0;

  for (std::size_t e = 0; e < kSimKinds.size(); ++e) {
    EstimatorCoverage cov;
    cov.kind = kSimKinds[e];
    double covered = 0.0;
    double se_sum = 0.0;
    double ratio_sum = 0.0;
    std::size_t ratio_count = 0;
    for (const auto& o : outcomes) {
      covered += o.covered[e] ? 1.0 : 0.0;
      se_sum += o.se[e];
      if (o.se[0] > 0.0) {
        ratio_sum += o.se[e] / o.se[0];
        ++ratio_count;
      }
    }
    cov.coverage = covered / reps;
    cov.mean_se = se_sum / reps;
    cov.mean_ser_vs_naive = ratio_count ? ratio_sum / static_cast<double>(ratio_count) : 0.0;
    result.estimators.push_back(cov);
  }
  return result;
}

}  // namespace dyadrobust
