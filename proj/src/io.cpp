#include "dyadrobust/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "dyadrobust/csv.hpp"
#include "dyadrobust/error.hpp"

namespace dyadrobust::io {
namespace {

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string{};
}

Json matrix_json(const Eigen::MatrixXd& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<double> parse_optional(std::string_view cell, std::size_t row,
                                     const std::string& column) {
  const auto first = cell.find_first_not_of(" \t");
  if (first == std::string_view::npos) return std::nullopt;
  cell = cell.substr(first, cell.find_last_not_of(" \t") - first + 1);
  if (cell == "NA") return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::UnparsableCell,
                "row " + std::to_string(row) + ", column '" + column + "': cannot parse '" +
                    std::string(cell) + "'")
        .at_row(row)
        .at_column(column);
  }
  return v;
}

}  // namespace

Json to_json(const InferenceTable& table) {
  Json out;
  out["estimator"] = std::string(to_string(table.estimator));
  out["level"] = table.level;
  out["df"] = optional_number(table.df);
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    Json row;
    row["term"] = r.name;
    row["estimate"] = r.estimate;
    row["se"] = r.se;
    row["stat"] = optional_number(r.statistic);
    row["p"] = optional_number(r.p_value);
    row["ci_low"] = r.ci_low;
    row["ci_high"] = r.ci_high;
    row["estimator"] = std::string(to_string(table.estimator));
    row["df"] = optional_number(table.df);
    row["zero_se"] = r.zero_se;
    rows.push_back(std::move(row));
  }
  out["coefficients"] = std::move(rows);
  return out;
}

Json to_json(const VcovEstimate& e) {
  Json out;
  out["kind"] = std::string(to_string(e.kind));
  out["matrix"] = matrix_json(e.matrix);
  out["psd_repaired"] = e.psd_repaired;
  out["negative_eigenvalues_truncated"] = e.negative_eigenvalues_truncated;
  out["min_eigenvalue_before_repair"] = optional_number(e.min_eigenvalue_before_repair);
  out["variances_zeroed"] = e.variances_zeroed;
  return out;
}

Json to_json(const std::vector<KevRecord>& records) {
  Json out = Json::array();
  for (const auto& r : records) {
    Json row;
    row["study_id"] = r.study_id;
    row["kev"] = r.kev_name;
    row["original_se"] = r.original_se;
    row["dcr_se"] = r.dcr_se;
    row["original_p"] = optional_number(r.original_p);
    row["dcr_p"] = optional_number(r.dcr_p);
    row["ser"] = optional_number(r.ser);
    row["transition"] =
        r.transition ? Json(std::string(to_string(*r.transition))) : Json(nullptr);
    if (!r.attributes.empty()) row["attributes"] = r.attributes;
    out.push_back(std::move(row));
  }
  return out;
}

Json to_json(const std::vector<AggregateReport>& reports) {
  Json out = Json::array();
  for (const auto& r : reports) {
    Json row;
    row["grouping"] = r.grouping;
    row["key"] = r.key;
    row["n_studies"] = r.n_studies;
    row["n_kevs"] = r.n_kevs;
    row["isfw_ser"] = r.isfw_ser;
    for (auto t : {Transition::SS, Transition::SI, Transition::IS, Transition::II}) {
      row["prop_" + std::string(to_string(t))] = r.proportion(t);
    }
    row["undefined_ser"] = r.undefined_ser;
    row["undefined_transition"] = r.undefined_transition;
    out.push_back(std::move(row));
  }
  return out;
}

Json to_json(const SimConfig& c) {
  Json out;
  out["members"] = c.n_members;
  out["periods"] = c.periods;
  out["density"] = c.density;
  out["alpha"] = c.member_loading;
  out["member_var"] = c.member_var;
  out["noise_var"] = c.noise_var;
  out["slope"] = c.slope_true;
  out["regressor_share"] = c.regressor_member_share;
  out["reps"] = c.replications;
  out["seed"] = c.seed;
  out["level"] = c.level;
  out["small_sample"] = c.small_sample;
  return out;
}

Json to_json(const CoverageResult& result) {
  Json out;
  out["config"] = to_json(result.config);
  out["mean_beta"] = result.mean_beta;
  out["sd_beta"] = result.sd_beta;
  Json estimators = Json::array();
  for (const auto& e : result.estimators) {
    Json row;
    row["estimator"] = std::string(to_string(e.kind));
    row["coverage"] = e.coverage;
    row["mean_se"] = e.mean_se;
    row["mean_ser_vs_naive"] = e.mean_ser_vs_naive;
    estimators.push_back(std::move(row));
  }
  out["estimators"] = std::move(estimators);
  return out;
}

void write_csv(std::ostream& out, const InferenceTable& table) {
  csv::write_row(out, csv::Row(std::begin(kInferenceColumns), std::end(kInferenceColumns)));
  const std::string kind(to_string(table.estimator));
  const std::string df = optional_cell(table.df);
  for (const auto& r : table.rows) {
    csv::write_row(out, {r.name, csv::format_double(r.estimate), csv::format_double(r.se),
                         optional_cell(r.statistic), optional_cell(r.p_value),
                         csv::format_double(r.ci_low), csv::format_double(r.ci_high), kind, df});
  }
}

void write_csv(std::ostream& out, const std::vector<KevRecord>& records) {
  std::vector<std::string> attribute_names;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.attributes) {
      if (std::find(attribute_names.begin(), attribute_names.end(), k) == attribute_names.end()) {
        attribute_names.push_back(k);
      }
    }
  }
  csv::Row header{"study_id", "kev", "original_se", "dcr_se", "original_p",
                  "dcr_p", "ser", "transition"};
  header.insert(header.end(), attribute_names.begin(), attribute_names.end());
  csv::write_row(out, header);
  for (const auto& r : records) {
    csv::Row row{r.study_id,
                 r.kev_name,
                 csv::format_double(r.original_se),
                 csv::format_double(r.dcr_se),
                 optional_cell(r.original_p),
                 optional_cell(r.dcr_p),
                 optional_cell(r.ser),
                 r.transition ? std::string(to_string(*r.transition)) : std::string{}};
    for (const auto& name : attribute_names) {
      const auto it = r.attributes.find(name);
      row.push_back(it == r.attributes.end() ? std::string{} : it->second);
    }
    csv::write_row(out, row);
  }
}

void write_csv(std::ostream& out, const std::vector<AggregateReport>& reports) {
  csv::write_row(out, {"grouping", "key", "n_studies", "n_kevs", "isfw_ser", "prop_SS",
                       "prop_SI", "prop_IS", "prop_II", "undefined_ser",
                       "undefined_transition"});
  for (const auto& r : reports) {
    csv::write_row(out, {r.grouping, r.key, std::to_string(r.n_studies),
                         std::to_string(r.n_kevs), csv::format_double(r.isfw_ser),
                         csv::format_double(r.proportions[0]),
                         csv::format_double(r.proportions[1]),
                         csv::format_double(r.proportions[2]),
                         csv::format_double(r.proportions[3]),
                         std::to_string(r.undefined_ser),
                         std::to_string(r.undefined_transition)});
  }
}

void write_csv(std::ostream& out, const CoverageResult& result) {
  csv::write_row(out, {"estimator", "coverage", "mean_se", "sd_beta", "mean_ser_vs_naive"});
  for (const auto& e : result.estimators) {
    csv::write_row(out, {std::string(to_string(e.kind)), csv::format_double(e.coverage),
                         csv::format_double(e.mean_se), csv::format_double(result.sd_beta),
                         csv::format_double(e.mean_ser_vs_naive)});
  }
}

std::vector<KevRecord> read_kev_csv(std::istream& in) {
  csv::Reader reader(in, /*skip_comments=*/true);
  csv::Row header;
  if (!reader.next(header)) {
    throw Error(ErrorKind::EmptyGroup, "KEV record file is empty");
  }
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.try_emplace(header[i], i);
  const auto locate = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end()) {
      throw Error(ErrorKind::MissingColumn, "missing column '" + name + "'").at_column(name);
    }
    return it->second;
  };
  const std::size_t c_study = locate("study_id");
  const std::size_t c_kev = locate("kev");
  const std::size_t c_ose = locate("original_se");
  const std::size_t c_dse = locate("dcr_se");
  const std::size_t c_op = locate("original_p");
  const std::size_t c_dp = locate("dcr_p");
  const std::vector<std::size_t> derived{c_study, c_kev, c_ose, c_dse, c_op, c_dp};

  std::vector<KevRecord> records;
  csv::Row row;
  std::size_t row_number = 0;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    ++row_number;
    row.resize(header.size());
    const auto se = [&](std::size_t c) {
      const auto v = parse_optional(row[c], row_number, header[c]);
      if (!v || *v < 0.0) {
        throw Error(ErrorKind::UnparsableCell,
                    "row " + std::to_string(row_number) + ": '" + header[c] +
                        "' must be a non-negative number")
            .at_row(row_number)
            .at_column(header[c]);
      }
      return *v;
    };
    KevRecord r = make_kev_record(row[c_study], row[c_kev], se(c_ose), se(c_dse),
                                  parse_optional(row[c_op], row_number, header[c_op]),
                                  parse_optional(row[c_dp], row_number, header[c_dp]));
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (std::find(derived.begin(), derived.end(), c) != derived.end()) continue;
      if (header[c] == "ser" || header[c] == "transition") continue;
      r.attributes[header[c]] = row[c];
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace dyadrobust::io
