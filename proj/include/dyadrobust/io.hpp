#pragma once

#include <iosfwd>
#include <vector>

#include "json.hpp"

#include "dyadrobust/inference.hpp"
#include "dyadrobust/simulation.hpp"
#include "dyadrobust/vcov.hpp"

namespace dyadrobust::io {

using Json = nlohmann::ordered_json;

Json to_json(const InferenceTable& table);
Json to_json(const VcovEstimate& estimate);
Json to_json(const std::vector<KevRecord>& records);
Json to_json(const std::vector<AggregateReport>& reports);
Json to_json(const SimConfig& config);
Json to_json(const CoverageResult& result);

// CSV mirrors. An optional `# manifest ...` comment line may precede the
// header; readers skip '#' lines.
inline constexpr const char* kInferenceColumns[] = {
    "term", "estimate", "se", "stat", "p", "ci_low", "ci_high", "estimator", "df"};

void write_csv(std::ostream& out, const InferenceTable& table);
void write_csv(std::ostream& out, const std::vector<KevRecord>& records);
void write_csv(std::ostream& out, const std::vector<AggregateReport>& reports);
void write_csv(std::ostream& out, const CoverageResult& result);

/// Needs columns study_id, kev, original_se, dcr_se, original_p, dcr_p (empty
/// cell = undefined). SER and transition are recomputed; any other column
/// becomes an attribute usable for grouping.
std::vector<KevRecord> read_kev_csv(std::istream& in);

}  // namespace dyadrobust::io
