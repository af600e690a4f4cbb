#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dyadrobust/data.hpp"
#include "dyadrobust/error.hpp"
#include "dyadrobust/inference.hpp"
#include "dyadrobust/io.hpp"
#include "dyadrobust/ols.hpp"
#include "dyadrobust/simulation.hpp"
#include "dyadrobust/vcov.hpp"

namespace dyadrobust::cli {
namespace {

namespace fs = std::filesystem;
using Json = io::Json;

unsigned default_threads() {
  if (const char* env = std::getenv("DYADROBUST_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

Json base_manifest(std::string_view subcommand) {
  Json m;
  m["tool"] = "dyadrobust";
  m["version"] = std::string(kToolVersion);
  m["subcommand"] = std::string(subcommand);
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error(ErrorKind::IoError, "failed writing '" + path.string() + "'");
}

// JSON artifact: {"manifest": ..., <payload fields>}.
void write_json_artifact(const fs::path& path, const Json& manifest, Json payload) {
  Json doc;
  doc["manifest"] = manifest;
  for (auto& [k, v] : payload.items()) doc[k] = std::move(v);
  write_text(path, doc.dump(2) + "\n");
}

// CSV artifact: a `# manifest` comment line, then the table.
template <typename T>
void write_csv_artifact(const fs::path& path, const Json& manifest, const T& value) {
  std::ostringstream s;
  s << "# manifest " << manifest.dump() << '\n';
  io::write_csv(s, value);
  write_text(path, s.str());
}

struct Artifact {
  fs::path json;
  fs::path csv;
};

Artifact artifact_paths(const std::string& out_dir, const std::string& stem,
                        std::string_view tag) {
  const fs::path base = fs::path(out_dir) / (stem + "." + std::string(tag));
  return {fs::path(base.string() + ".json"), fs::path(base.string() + ".csv")};
}

// --- fit -----------------------------------------------------------------

struct FitArgs {
  std::string data;
  CsvSchema schema;
  std::string time_column;
  bool no_intercept = false;
  bool member_fe = false;
  std::string reference_member;
  std::vector<std::string> estimators{"hc0", "cr-dyad", "dcr"};
  bool small_sample = false;
  std::vector<std::string> kev;
  std::string baseline;
  std::string study_id;
  double level = 0.95;
  std::string out_dir = ".";
  std::string stem;
  bool drop_incomplete = false;
  bool nondeterministic = false;
  unsigned threads = 1;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  std::vector<VcovKind> kinds;
  for (const auto& name : a.estimators) {
    const auto kind = parse_vcov_kind(name);
    if (!kind || *kind == VcovKind::CrOneway || *kind == VcovKind::Oracle) {
      throw Error(ErrorKind::InvalidArgument,
                  "unknown estimator '" + name + "' (expected hc0, cr-dyad or dcr)");
    }
    if (std::find(kinds.begin(), kinds.end(), *kind) == kinds.end()) kinds.push_back(*kind);
  }
  std::optional<VcovKind> baseline;
  if (!a.kev.empty() || !a.baseline.empty()) {
    if (a.kev.empty() || a.baseline.empty()) {
      throw Error(ErrorKind::InvalidArgument, "--kev and --baseline must be given together");
    }
    baseline = parse_vcov_kind(a.baseline);
    if (!baseline || *baseline == VcovKind::CrOneway || *baseline == VcovKind::Oracle) {
      throw Error(ErrorKind::InvalidArgument, "unknown baseline estimator '" + a.baseline + "'");
    }
  }

  CsvSchema schema = a.schema;
  if (!a.time_column.empty()) schema.time = a.time_column;
  DesignSpec design_spec;
  design_spec.include_intercept = !a.no_intercept;
  design_spec.member_fixed_effects = a.member_fe;
  if (!a.reference_member.empty()) design_spec.dropped_reference_member = MemberId(a.reference_member);

  const std::string stem = a.stem.empty() ? fs::path(a.data).stem().string() : a.stem;
  const std::string study = a.study_id.empty() ? stem : a.study_id;

  Json manifest = base_manifest("fit");
  manifest["inputs"] = {{"data", a.data}};
  manifest["schema"] = {{"member_a", schema.member_a},
                        {"member_b", schema.member_b},
                        {"time", schema.time ? Json(*schema.time) : Json(nullptr)},
                        {"outcome", schema.outcome},
                        {"regressors", schema.regressors}};
  manifest["design"] = {{"include_intercept", design_spec.include_intercept},
                        {"member_fixed_effects", design_spec.member_fixed_effects},
                        {"reference_member", a.reference_member.empty()
                                                 ? Json(nullptr)
                                                 : Json(a.reference_member)}};
  Json est_names = Json::array();
  for (auto k : kinds) est_names.push_back(std::string(to_string(k)));
  manifest["estimators"] = est_names;
  manifest["corrections"] = {{"small_sample", a.small_sample}};
  manifest["level"] = a.level;
  manifest["drop_incomplete"] = a.drop_incomplete;
  manifest["deterministic"] = !a.nondeterministic;
  manifest["kev"] = a.kev;
  manifest["baseline"] = baseline ? Json(std::string(to_string(*baseline))) : Json(nullptr);
  manifest["study_id"] = study;
  manifest["seed"] = nullptr;
  Json outputs = Json::array();
  for (auto k : kinds) {
    const auto paths = artifact_paths(a.out_dir, stem, to_string(k));
    outputs.push_back(paths.json.generic_string());
    outputs.push_back(paths.csv.generic_string());
  }
  if (baseline) {
    const auto paths = artifact_paths(a.out_dir, stem, "kev");
    outputs.push_back(paths.json.generic_string());
    outputs.push_back(paths.csv.generic_string());
  }
  manifest["outputs"] = outputs;

  LoadOptions load_options;
  load_options.drop_incomplete = a.drop_incomplete;
  const LoadResult loaded = load_csv(a.data, schema, load_options);
  const DyadDataset& data = loaded.data;
  const Design design = build_design(data, design_spec);
  const FitResult fit = fit_ols(design, data.outcome_vector());

  AccumulationOptions acc;
  acc.deterministic = !a.nondeterministic;
  acc.threads = a.threads;
  const auto estimate = [&](VcovKind kind) {
    switch (kind) {
      case VcovKind::HC0: return vcov_hc0(fit, acc);
      case VcovKind::CrDyad: return vcov_cr_dyad(fit, data, acc);
      default: {
        DcrOptions options;
        options.accumulation = acc;
        return vcov_dcr(fit, data, options);
      }
    }
  };
  const auto table_for = [&](const VcovEstimate& V) {
    return a.small_sample ? infer_small_sample(fit, V, correction_units(V.kind, data), a.level)
                          : infer(fit, V, a.level);
  };

  Json fit_info;
  fit_info["n"] = fit.n;
  fit_info["p"] = fit.p;
  fit_info["members"] = data.member_count();
  fit_info["dropped_rows"] = loaded.dropped_rows;
  fit_info["reciprocal_condition"] = fit.reciprocal_condition;

  std::map<VcovKind, InferenceTable> tables;
  std::vector<VcovKind> needed = kinds;
  if (baseline) {
    for (auto k : {*baseline, VcovKind::DCR}) {
      if (std::find(needed.begin(), needed.end(), k) == needed.end()) needed.push_back(k);
    }
  }
  for (auto kind : needed) {
    const VcovEstimate V = estimate(kind);
    InferenceTable table = table_for(V);
    if (std::find(kinds.begin(), kinds.end(), kind) != kinds.end()) {
      const auto paths = artifact_paths(a.out_dir, stem, to_string(kind));
      Json payload;
      payload["fit"] = fit_info;
      payload["small_sample_units"] =
          a.small_sample ? Json(correction_units(kind, data)) : Json(nullptr);
      payload["inference"] = io::to_json(table);
      payload["vcov"] = io::to_json(V);
      write_json_artifact(paths.json, manifest, std::move(payload));
      write_csv_artifact(paths.csv, manifest, table);
      out << paths.json.generic_string() << '\n' << paths.csv.generic_string() << '\n';
    }
    tables.emplace(kind, std::move(table));
  }

  if (baseline) {
    const auto records = ser(tables.at(*baseline), tables.at(VcovKind::DCR), a.kev, study);
    const auto paths = artifact_paths(a.out_dir, stem, "kev");
    write_json_artifact(paths.json, manifest, Json{{"records", io::to_json(records)}});
    write_csv_artifact(paths.csv, manifest, records);
    out << paths.json.generic_string() << '\n' << paths.csv.generic_string() << '\n';
  }
  return 0;
}

// --- simulate ------------------------------------------------------------

struct SimulateArgs {
  std::string config_file;
  std::optional<std::size_t> members, periods, reps;
  std::optional<double> density, alpha, member_var, noise_var, slope, regressor_share, level;
  std::optional<std::uint64_t> seed;
  bool small_sample = false;
  std::string out_dir = ".";
  std::string stem = "simulation";
  unsigned threads = 1;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimConfig cfg;
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + a.config_file + "'");
    cfg = read_sim_config(in, cfg);
  }
  if (a.members) cfg.n_members = *a.members;
  if (a.periods) cfg.periods = *a.periods;
  if (a.reps) cfg.replications = *a.reps;
  if (a.density) cfg.density = *a.density;
  if (a.alpha) cfg.member_loading = *a.alpha;
  if (a.member_var) cfg.member_var = *a.member_var;
  if (a.noise_var) cfg.noise_var = *a.noise_var;
  if (a.slope) cfg.slope_true = *a.slope;
  if (a.regressor_share) cfg.regressor_member_share = *a.regressor_share;
  if (a.level) cfg.level = *a.level;
  if (a.seed) cfg.seed = *a.seed;
  if (a.small_sample) cfg.small_sample = true;
  cfg.validate();

  const auto paths = artifact_paths(a.out_dir, a.stem, "coverage");
  Json manifest = base_manifest("simulate");
  manifest["inputs"] = {{"config", a.config_file.empty() ? Json(nullptr) : Json(a.config_file)}};
  manifest["config"] = io::to_json(cfg);
  manifest["estimators"] = {"hc0", "cr-dyad", "dcr"};
  manifest["corrections"] = {{"small_sample", cfg.small_sample}};
  manifest["seed"] = cfg.seed;
  manifest["outputs"] = {paths.json.generic_string(), paths.csv.generic_string()};

  const CoverageResult result = run_coverage(cfg, a.threads);
  write_json_artifact(paths.json, manifest, Json{{"coverage", io::to_json(result)}});
  write_csv_artifact(paths.csv, manifest, result);
  out << paths.json.generic_string() << '\n' << paths.csv.generic_string() << '\n';
  return 0;
}

// --- aggregate -----------------------------------------------------------

struct AggregateArgs {
  std::string records;
  std::vector<std::string> group_by;
  std::string out_dir = ".";
  std::string stem;
  unsigned threads = 1;
};

int cmd_aggregate(const AggregateArgs& a, std::ostream& out) {
  std::ifstream in(a.records, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + a.records + "'");
  const auto records = io::read_kev_csv(in);

  const std::string stem = a.stem.empty() ? fs::path(a.records).stem().string() : a.stem;
  const auto paths = artifact_paths(a.out_dir, stem, "aggregate");
  Json manifest = base_manifest("aggregate");
  manifest["inputs"] = {{"records", a.records}};
  manifest["group_by"] = a.group_by;
  manifest["seed"] = nullptr;
  manifest["outputs"] = {paths.json.generic_string(), paths.csv.generic_string()};

  std::vector<AggregateReport> reports;
  for (const auto& column : a.group_by) {
    for (const auto& r : records) {
      if (!r.attributes.contains(column)) {
        throw Error(ErrorKind::MissingColumn, "missing group column '" + column + "'")
            .at_column(column);
      }
    }
    auto rows = isfw_aggregate(
        records, [&](const KevRecord& r) { return r.attributes.at(column); }, column);
    // A single-level grouping repeats the overall row.
    if (rows.size() > 1) reports.insert(reports.end(), rows.begin(), rows.end());
  }
  auto overall = isfw_aggregate(records, [](const KevRecord&) { return std::string("All"); });
  reports.insert(reports.end(), overall.begin(), overall.end());

  write_json_artifact(paths.json, manifest, Json{{"groups", io::to_json(reports)}});
  write_csv_artifact(paths.csv, manifest, reports);
  out << paths.json.generic_string() << '\n' << paths.csv.generic_string() << '\n';
  return 0;
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message,
                  const Error* detail = nullptr) {
  Json e;
  e["kind"] = std::string(kind);
  e["message"] = message;
  if (detail) {
    if (detail->row()) e["row"] = *detail->row();
    if (detail->column()) e["column"] = *detail->column();
    if (detail->value()) e["value"] = *detail->value();
  }
  err << Json{{"error", e}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dyadic cluster-robust inference for linear models", "dyadrobust"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  const unsigned env_threads = default_threads();

  FitArgs fit;
  fit.threads = env_threads;
  auto* fit_cmd = app.add_subcommand("fit", "Fit OLS and report SEs under each estimator");
  fit_cmd->add_option("--data", fit.data, "Input CSV")->required();
  fit_cmd->add_option("--member-a", fit.schema.member_a, "First member column")
      ->capture_default_str();
  fit_cmd->add_option("--member-b", fit.schema.member_b, "Second member column")
      ->capture_default_str();
  fit_cmd->add_option("--time", fit.time_column, "Time column (optional)");
  fit_cmd->add_option("--outcome", fit.schema.outcome, "Outcome column")->capture_default_str();
  fit_cmd->add_option("--regressors", fit.schema.regressors, "Regressor columns")
      ->delimiter(',');
  fit_cmd->add_flag("--no-intercept", fit.no_intercept, "Omit the intercept column");
  fit_cmd->add_flag("--member-fe", fit.member_fe, "Add member participation dummies");
  fit_cmd->add_option("--reference-member", fit.reference_member,
                      "Member whose dummy is dropped (default: last labelled)");
  fit_cmd->add_option("--estimators", fit.estimators, "hc0, cr-dyad, dcr")
      ->delimiter(',')
      ->capture_default_str();
  fit_cmd->add_flag("--small-sample", fit.small_sample,
                    "Scale SEs by sqrt(N/(N-1)) and use t(N-1)");
  fit_cmd->add_option("--kev", fit.kev, "Key explanatory variables")->delimiter(',');
  fit_cmd->add_option("--baseline", fit.baseline, "Estimator compared against DCR for KEVs");
  fit_cmd->add_option("--study-id", fit.study_id, "Study id for KEV records (default: stem)");
  fit_cmd->add_option("--level", fit.level, "Confidence level")->capture_default_str();
  fit_cmd->add_option("--out-dir", fit.out_dir, "Output directory")->capture_default_str();
  fit_cmd->add_option("--stem", fit.stem, "Artifact stem (default: data file stem)");
  fit_cmd->add_flag("--drop-incomplete", fit.drop_incomplete,
                    "Drop rows with missing cells instead of failing");
  fit_cmd->add_flag("--nondeterministic", fit.nondeterministic,
                    "Plain (uncompensated) accumulation");
  fit_cmd->add_option("--threads", fit.threads, "Worker threads (env DYADROBUST_THREADS)");

  SimulateArgs sim;
  sim.threads = env_threads;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo coverage of naive, CR-dyad and DCR");
  sim_cmd->add_option("--config", sim.config_file, "key=value config file");
  sim_cmd->add_option("--members", sim.members, "Number of members");
  sim_cmd->add_option("--periods", sim.periods, "Periods per dyad");
  sim_cmd->add_option("--density", sim.density, "Probability a pair is observed");
  sim_cmd->add_option("--alpha", sim.alpha, "Member loading of the outcome");
  sim_cmd->add_option("--member-var", sim.member_var, "Variance of member effects");
  sim_cmd->add_option("--noise-var", sim.noise_var, "Variance of dyad noise");
  sim_cmd->add_option("--slope", sim.slope, "True slope");
  sim_cmd->add_option("--regressor-share", sim.regressor_share,
                      "Member-level share of regressor variance");
  sim_cmd->add_option("--reps", sim.reps, "Replications");
  sim_cmd->add_option("--seed", sim.seed, "Random seed");
  sim_cmd->add_option("--level", sim.level, "Nominal CI level");
  sim_cmd->add_flag("--small-sample", sim.small_sample, "Apply the small-sample correction");
  sim_cmd->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();
  sim_cmd->add_option("--stem", sim.stem, "Artifact stem")->capture_default_str();
  sim_cmd->add_option("--threads", sim.threads, "Worker threads (env DYADROBUST_THREADS)");

  AggregateArgs agg;
  auto* agg_cmd = app.add_subcommand("aggregate", "ISFW summaries of KEV records");
  agg_cmd->add_option("--records", agg.records, "KEV record CSV")->required();
  agg_cmd->add_option("--group-by", agg.group_by, "Attribute columns to group by")
      ->delimiter(',');
  agg_cmd->add_option("--out-dir", agg.out_dir, "Output directory")->capture_default_str();
  agg_cmd->add_option("--stem", agg.stem, "Artifact stem (default: records file stem)");
  agg_cmd->add_option("--threads", agg.threads, "Accepted for symmetry; aggregation is serial");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.what());
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    if (agg_cmd->parsed()) return cmd_aggregate(agg, out);
  } catch (const Error& e) {
    report_error(err, to_string(e.kind()), e.what(), &e);
    return 2;
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what());
    return 1;
  }
  return 1;
}

}  // namespace dyadrobust::cli
