#include "dyadrobust/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "dyadrobust/csv.hpp"
#include "dyadrobust/error.hpp"

namespace dyadrobust {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool is_missing(std::string_view cell) {
  const auto t = trim(cell);
  return t.empty() || t == "NA" || t == ".";
}

std::optional<double> parse_real(std::string_view cell) {
  auto t = trim(cell);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() ||
      !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::optional<std::int64_t> parse_integer(std::string_view cell) {
  auto t = trim(cell);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

MemberId::MemberId(std::string_view raw) : value_(trim(raw)) {
  if (value_.empty()) {
    throw Error(ErrorKind::InvalidArgument, "member id must be non-empty");
  }
}

DyadDataset::DyadDataset(std::vector<DyadObservation> observations,
                         std::vector<std::string> regressor_names)
    : observations_(std::move(observations)),
      regressor_names_(std::move(regressor_names)) {
  if (observations_.empty()) {
    throw Error(ErrorKind::EmptyDataset, "dataset has no observations");
  }
  std::map<MemberId, std::size_t> index;
  labels_.reserve(observations_.size());
  const auto label = [&](const MemberId& id) {
    auto [it, inserted] = index.try_emplace(id, members_.size());
    if (inserted) members_.push_back(id);
    return it->second;
  };

  for (std::size_t k = 0; k < observations_.size(); ++k) {
    auto& obs = observations_[k];
    if (obs.member_a == obs.member_b) {
      throw Error(ErrorKind::SelfDyad,
                  "self-dyad for member '" + obs.member_a.str() + "'")
          .at_row(k + 1);
    }
    if (obs.member_b < obs.member_a) std::swap(obs.member_a, obs.member_b);
    if (obs.regressors.size() != regressor_names_.size()) {
      throw Error(ErrorKind::InvalidArgument,
                  "observation regressor count does not match names")
          .at_row(k + 1);
    }
    if (!std::isfinite(obs.outcome) ||
        !std::all_of(obs.regressors.begin(), obs.regressors.end(),
                     [](double v) { return std::isfinite(v); })) {
      throw Error(ErrorKind::UnparsableCell, "non-finite value").at_row(k + 1);
    }
    const std::size_t a = label(obs.member_a);
    const std::size_t b = label(obs.member_b);
    labels_.push_back({a, b});
  }
}

std::optional<std::size_t> DyadDataset::label_of(const MemberId& id) const {
  const auto it = std::find(members_.begin(), members_.end(), id);
  if (it == members_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - members_.begin());
}

Eigen::VectorXd DyadDataset::outcome_vector() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(n()));
  for (std::size_t k = 0; k < n(); ++k) {
    y(static_cast<Eigen::Index>(k)) = observations_[k].outcome;
  }
  return y;
}

LoadResult read_csv(std::istream& in, const CsvSchema& schema,
                    const LoadOptions& options) {
  csv::Reader reader(in);
  csv::Row header;
  if (!reader.next(header)) {
    throw Error(ErrorKind::EmptyDataset, "input has no header row");
  }
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    column.try_emplace(std::string(trim(header[i])), i);
  }
  const auto locate = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end()) {
      throw Error(ErrorKind::MissingColumn, "missing column '" + name + "'")
          .at_column(name);
    }
    return it->second;
  };

  const std::size_t col_a = locate(schema.member_a);
  const std::size_t col_b = locate(schema.member_b);
  const std::size_t col_y = locate(schema.outcome);
  std::optional<std::size_t> col_t;
  if (schema.time) col_t = locate(*schema.time);
  std::vector<std::size_t> col_x;
  col_x.reserve(schema.regressors.size());
  for (const auto& name : schema.regressors) col_x.push_back(locate(name));

  std::vector<DyadObservation> observations;
  std::size_t dropped = 0;
  std::size_t row_number = 0;
  csv::Row row;
  while (reader.next(row)) {
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    ++row_number;
    const auto cell = [&](std::size_t c) -> std::string_view {
      return c < row.size() ? std::string_view(row[c]) : std::string_view{};
    };
    const auto fail = [&](std::size_t c) {
      return Error(ErrorKind::UnparsableCell,
                   "row " + std::to_string(row_number) + ", column '" +
                       std::string(trim(header[c])) + "': cannot parse '" +
                       std::string(cell(c)) + "'")
          .at_row(row_number)
          .at_column(std::string(trim(header[c])));
    };

    std::vector<std::size_t> used{col_a, col_b, col_y};
    if (col_t) used.push_back(*col_t);
    used.insert(used.end(), col_x.begin(), col_x.end());
    const auto missing = std::find_if(used.begin(), used.end(), [&](std::size_t c) {
      return is_missing(cell(c));
    });
    if (missing != used.end()) {
      if (options.drop_incomplete) {
        ++dropped;
        continue;
      }
      throw fail(*missing);
    }

    MemberId a(cell(col_a));
    MemberId b(cell(col_b));
    if (a == b) {
      throw Error(ErrorKind::SelfDyad, "row " + std::to_string(row_number) +
                                           ": self-dyad for member '" + a.str() + "'")
          .at_row(row_number);
    }
    DyadObservation obs{std::move(a), std::move(b), 0, 0.0, {}};
    if (col_t) {
      const auto t = parse_integer(cell(*col_t));
      if (!t) throw fail(*col_t);
      obs.time = *t;
    } else {
      obs.time = static_cast<std::int64_t>(row_number);
    }
    const auto y = parse_real(cell(col_y));
    if (!y) throw fail(col_y);
    obs.outcome = *y;
    obs.regressors.reserve(col_x.size());
    for (std::size_t c : col_x) {
      const auto x = parse_real(cell(c));
      if (!x) throw fail(c);
      obs.regressors.push_back(*x);
    }
    observations.push_back(std::move(obs));
  }
  if (observations.empty()) {
    throw Error(ErrorKind::EmptyDataset, "no usable data rows");
  }
  return LoadResult{DyadDataset(std::move(observations), schema.regressors), dropped};
}

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                    const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  }
  return read_csv(in, schema, options);
}

CsvSchema canonical_schema(const DyadDataset& data) {
  CsvSchema schema;
  schema.member_a = "member_a";
  schema.member_b = "member_b";
  schema.time = "time";
  schema.outcome = "y";
  schema.regressors = data.regressor_names();
  return schema;
}

void write_csv(std::ostream& out, const DyadDataset& data) {
  const auto schema = canonical_schema(data);
  csv::Row row{schema.member_a, schema.member_b, *schema.time, schema.outcome};
  row.insert(row.end(), schema.regressors.begin(), schema.regressors.end());
  csv::write_row(out, row);
  for (const auto& obs : data.observations()) {
    row = {obs.member_a.str(), obs.member_b.str(), std::to_string(obs.time),
           csv::format_double(obs.outcome)};
    for (double x : obs.regressors) row.push_back(csv::format_double(x));
    csv::write_row(out, row);
  }
}

Design build_design(const DyadDataset& data, const DesignSpec& spec) {
  const std::size_t n = data.n();
  const std::size_t N = data.member_count();

  std::optional<std::size_t> reference;
  if (spec.member_fixed_effects) {
    if (N < 2) {
      throw Error(ErrorKind::InvalidArgument,
                  "member fixed effects need at least two members");
    }
    if (spec.dropped_reference_member) {
      reference = data.label_of(*spec.dropped_reference_member);
      if (!reference) {
        throw Error(ErrorKind::InvalidArgument,
                    "reference member '" + spec.dropped_reference_member->str() +
                        "' not in dataset");
      }
    } else {
      reference = N - 1;
    }
  }

  Design design;
  if (spec.include_intercept) design.column_names.emplace_back("(Intercept)");
  for (const auto& name : data.regressor_names()) design.column_names.push_back(name);
  // fe_column[m] is the column of member m's dummy, or -1 for the reference.
  std::vector<Eigen::Index> fe_column(N, -1);
  if (spec.member_fixed_effects) {
    for (std::size_t m = 0; m < N; ++m) {
      if (m == *reference) continue;
      fe_column[m] = static_cast<Eigen::Index>(design.column_names.size());
      design.column_names.push_back("fe:" + data.members()[m].str());
    }
  }

  const auto p = static_cast<Eigen::Index>(design.column_names.size());
  design.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), p);
  const Eigen::Index offset = spec.include_intercept ? 1 : 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    if (spec.include_intercept) design.X(row, 0) = 1.0;
    const auto& x = data.observations()[k].regressors;
    for (std::size_t j = 0; j < x.size(); ++j) {
      design.X(row, offset + static_cast<Eigen::Index>(j)) = x[j];
    }
    if (spec.member_fixed_effects) {
      for (std::size_t m : data.member_labels(k)) {
        if (fe_column[m] >= 0) design.X(row, fe_column[m]) = 1.0;
      }
    }
  }
  return design;
}

std::vector<std::vector<std::size_t>> incidence(const DyadDataset& data) {
  std::vector<std::vector<std::size_t>> lists(data.member_count());
  for (std::size_t k = 0; k < data.n(); ++k) {
    for (std::size_t m : data.member_labels(k)) lists[m].push_back(k);
  }
  return lists;
}

}  // namespace dyadrobust
