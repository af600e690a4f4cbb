#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dyadrobust {

/// Identity of one dyad member (a country code, an organisation name, ...).
/// Stored trimmed; ordering is plain lexicographic byte order.
class MemberId {
 public:
  explicit MemberId(std::string_view raw);

  const std::string& str() const noexcept { return value_; }

  auto operator<=>(const MemberId&) const = default;
  bool operator==(const MemberId&) const = default;

 private:
  std::string value_;
};

struct DyadObservation {
  MemberId member_a;
  MemberId member_b;
  std::int64_t time = 0;
  double outcome = 0.0;
  std::vector<double> regressors;

  bool operator==(const DyadObservation&) const = default;
};

/// Canonicalized, validated, immutable collection of undirected dyad
/// observations. Construction swaps each pair into member_a < member_b,
/// rejects self-dyads and non-finite values, and labels members 0..N-1 in
/// order of first appearance.
class DyadDataset {
 public:
  DyadDataset(std::vector<DyadObservation> observations,
              std::vector<std::string> regressor_names);

  std::size_t n() const noexcept { return observations_.size(); }
  std::size_t p_raw() const noexcept { return regressor_names_.size(); }
  std::size_t member_count() const noexcept { return members_.size(); }

  const std::vector<DyadObservation>& observations() const noexcept {
    return observations_;
  }
  const std::vector<MemberId>& members() const noexcept { return members_; }
  const std::vector<std::string>& regressor_names() const noexcept {
    return regressor_names_;
  }

  /// Dense labels of the two members of observation k (a-label, b-label).
  const std::array<std::size_t, 2>& member_labels(std::size_t k) const {
    return labels_[k];
  }
  std::optional<std::size_t> label_of(const MemberId& id) const;

  Eigen::VectorXd outcome_vector() const;

  bool operator==(const DyadDataset&) const = default;

 private:
  std::vector<DyadObservation> observations_;
  std::vector<std::string> regressor_names_;
  std::vector<MemberId> members_;
  std::vector<std::array<std::size_t, 2>> labels_;
};

struct CsvSchema {
  std::string member_a = "member_a";
  std::string member_b = "member_b";
  std::optional<std::string> time;
  std::string outcome = "y";
  std::vector<std::string> regressors;
};

struct LoadOptions {
  // Drop rows with a missing (empty / NA) cell instead of failing.
  bool drop_incomplete = false;
};

struct LoadResult {
  DyadDataset data;
  std::size_t dropped_rows = 0;
};

/// Reads a headered CSV. Without a time column, row r gets t = r (1-based
/// data row), so every row is its own period.
LoadResult read_csv(std::istream& in, const CsvSchema& schema,
                    const LoadOptions& options = {});
LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                    const LoadOptions& options = {});

/// Writes the canonical form with columns member_a,member_b,time,y,<regressors>.
/// Reading it back with canonical_schema() yields an equal dataset.
void write_csv(std::ostream& out, const DyadDataset& data);
CsvSchema canonical_schema(const DyadDataset& data);

struct DesignSpec {
  bool include_intercept = true;
  bool member_fixed_effects = false;
  // Defaults to the member with the highest label when fixed effects are on.
  std::optional<MemberId> dropped_reference_member;
};

struct Design {
  Eigen::MatrixXd X;
  std::vector<std::string> column_names;
};

/// Column order: intercept, raw regressors, then one participation dummy per
/// non-reference member (1 when the member is either side of the dyad).
Design build_design(const DyadDataset& data, const DesignSpec& spec);

/// For each member label, the ascending indices of observations it belongs to.
std::vector<std::vector<std::size_t>> incidence(const DyadDataset& data);

}  // namespace dyadrobust
