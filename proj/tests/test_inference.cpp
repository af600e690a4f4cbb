#include "doctest.h"

#include <random>
#include <sstream>

#include "dyadrobust/error.hpp"
#include "dyadrobust/inference.hpp"
#include "dyadrobust/io.hpp"
#include "test_support.hpp"

using namespace dyadrobust;

namespace {

InferenceTable single(double estimate, double se, std::optional<double> df = std::nullopt) {
  return infer_from_se({"b"}, Eigen::VectorXd::Constant(1, estimate),
                       Eigen::VectorXd::Constant(1, se), VcovKind::HC0, 0.95, df);
}

InferenceTable table_with(const std::vector<std::string>& names, const Eigen::VectorXd& est,
                          const Eigen::VectorXd& se, VcovKind kind) {
  return infer_from_se(names, est, se, kind, 0.95, std::nullopt);
}

KevRecord record(const std::string& study, double ser_value) {
  return make_kev_record(study, "b", 1.0, ser_value, 0.01, 0.01);
}

const GroupKey kAll = [](const KevRecord&) { return std::string("All"); };

}  // namespace

TEST_CASE("infer: estimate 1.96 with se 1") {
  const auto t = single(1.96, 1.0);
  const auto& row = t.rows[0];
  REQUIRE(row.statistic.has_value());
  CHECK(*row.statistic == 1.96);
  CHECK(*row.p_value == doctest::Approx(0.05).epsilon(1e-3));
  const double z = 1.959963984540054;
  CHECK(std::abs(row.ci_low - (1.96 - z)) < 1e-12);
  CHECK(std::abs(row.ci_high - (1.96 + z)) < 1e-12);
  CHECK(std::abs(row.ci_low - 0.0002) < 1e-3);
  CHECK(std::abs(row.ci_high - 3.9198) < 1e-3);
  CHECK_FALSE(row.zero_se);
}

TEST_CASE("infer on D1 with HC0") {
  const auto fit = testing::fit_with_intercept(testing::make_d1());
  const auto t = infer(fit, vcov_hc0(fit));
  const auto* slope = t.find("x");
  REQUIRE(slope != nullptr);
  CHECK(slope->estimate == doctest::Approx(1.15));
  CHECK(slope->se == doctest::Approx(std::sqrt(0.00335)).epsilon(1e-12));
  CHECK(*slope->statistic == doctest::Approx(19.87).epsilon(1e-3));
  CHECK(*slope->p_value < 1e-80);
  CHECK(t.estimator == VcovKind::HC0);
  CHECK_FALSE(t.df.has_value());
  CHECK(t.find("nope") == nullptr);
}

TEST_CASE("infer flags zero standard errors") {
  const auto t = single(2.0, 0.0);
  const auto& row = t.rows[0];
  CHECK(row.zero_se);
  CHECK_FALSE(row.statistic.has_value());
  CHECK_FALSE(row.p_value.has_value());
  CHECK(row.ci_low == 2.0);
  CHECK(row.ci_high == 2.0);

  const auto d1 = testing::make_d1();
  const auto fit = testing::fit_with_intercept(d1);
  const auto dcr = infer(fit, vcov_dcr(fit, d1));
  CHECK(dcr.rows[0].zero_se);
  CHECK(dcr.rows[1].zero_se);
}

TEST_CASE("infer with t reference") {
  const auto t = single(2.0, 1.0, 4.0);
  // two-sided p of t = 2 on 4 df, and the t(4) 97.5% quantile
  CHECK(*t.rows[0].p_value == doctest::Approx(0.1161165).epsilon(1e-6));
  CHECK(t.rows[0].ci_high - 2.0 == doctest::Approx(2.776445).epsilon(1e-6));
  REQUIRE(t.df.has_value());
  CHECK(*t.df == 4.0);
}

TEST_CASE("property: large df agrees with the normal") {
  for (double est : {0.3, 1.0, 1.96, 3.5}) {
    const auto n = single(est, 1.0);
    const auto t = single(est, 1.0, 1e8);
    CHECK(std::abs(*n.rows[0].p_value - *t.rows[0].p_value) < 1e-7);
    CHECK(std::abs(n.rows[0].ci_high - t.rows[0].ci_high) < 1e-7);
  }
}

TEST_CASE("infer_small_sample scales SEs and uses t(units - 1)") {
  std::mt19937_64 rng(89);
  const auto data = testing::random_dataset(rng, 40, 10, 1);
  const auto fit = testing::fit_with_intercept(data);
  const auto V = vcov_dcr(fit, data);
  const auto units = correction_units(VcovKind::DCR, data);
  const auto plain = infer(fit, V);
  const auto corrected = infer_small_sample(fit, V, units);
  const double factor = std::sqrt(double(units) / double(units - 1));
  for (std::size_t j = 0; j < plain.rows.size(); ++j) {
    if (plain.rows[j].zero_se) continue;
    CHECK(corrected.rows[j].se / plain.rows[j].se == doctest::Approx(factor).epsilon(1e-15));
  }
  CHECK(*corrected.df == double(units - 1));
}

TEST_CASE("transition classification") {
  CHECK(classify_transition(0.01, 0.08) == Transition::SI);
  CHECK(classify_transition(0.2, 0.04) == Transition::IS);
  CHECK(classify_transition(0.01, 0.02) == Transition::SS);
  CHECK(classify_transition(0.3, 0.5) == Transition::II);
  CHECK(classify_transition(0.05, 0.01) == Transition::IS);
  for (auto t : {Transition::SS, Transition::SI, Transition::IS, Transition::II}) {
    CHECK(parse_transition(to_string(t)) == t);
  }
  CHECK_FALSE(parse_transition("XX").has_value());
}

TEST_CASE("ser compares matched tables") {
  const std::vector<std::string> names{"(Intercept)", "x"};
  const Eigen::Vector2d est(0.5, 1.0);
  const auto original = table_with(names, est, Eigen::Vector2d(0.3, 0.1), VcovKind::HC0);
  const auto dcr = table_with(names, est, Eigen::Vector2d(0.3, 0.2), VcovKind::DCR);
  const auto records = ser(original, dcr, {"x"}, "s1");
  REQUIRE(records.size() == 1);
  CHECK(records[0].study_id == "s1");
  CHECK(records[0].kev_name == "x");
  CHECK(*records[0].ser == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(*records[0].transition == Transition::SS);

  const auto moved = table_with(names, Eigen::Vector2d(0.5, 1.1), Eigen::Vector2d(0.3, 0.2),
                                VcovKind::DCR);
  try {
    ser(original, moved, {"x"});
    FAIL("expected MismatchedCoefficients");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MismatchedCoefficients);
  }
  CHECK_THROWS_AS(ser(original, dcr, {"missing"}), Error);
}

TEST_CASE("property: ser of a table with itself is 1 with no transition change") {
  std::mt19937_64 rng(97);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = testing::random_dataset(rng, 40, 10, 2);
    const auto fit = testing::fit_with_intercept(data);
    const auto t = infer(fit, vcov_hc0(fit));
    const auto records = ser(t, t, {"x1", "x2"});
    for (const auto& r : records) {
      CHECK(*r.ser == 1.0);
      CHECK((*r.transition == Transition::SS || *r.transition == Transition::II));
    }
  }
}

TEST_CASE("make_kev_record leaves ser undefined for zero SEs") {
  const auto r = make_kev_record("s", "x", 0.1, 0.0, 0.01, std::nullopt);
  CHECK_FALSE(r.ser.has_value());
  CHECK_FALSE(r.transition.has_value());
}

TEST_CASE("isfw_aggregate weights studies equally") {
  const std::vector<KevRecord> records{record("A", 1.0), record("A", 3.0), record("B", 1.0)};
  const auto reports = isfw_aggregate(records, kAll);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].isfw_ser == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(reports[0].n_studies == 2);
  CHECK(reports[0].n_kevs == 3);

  const std::vector<KevRecord> one{record("A", 1.0), record("A", 2.0), record("A", 4.5)};
  CHECK(isfw_aggregate(one, kAll)[0].isfw_ser == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("isfw_aggregate transition proportions") {
  const std::vector<KevRecord> records{
      make_kev_record("A", "x", 1, 1, 0.01, 0.2), make_kev_record("A", "z", 1, 1, 0.01, 0.3),
      make_kev_record("B", "x", 1, 1, 0.01, 0.01)};
  const auto r = isfw_aggregate(records, kAll)[0];
  CHECK(r.proportion(Transition::SI) == doctest::Approx(0.5));
  CHECK(r.proportion(Transition::SS) == doctest::Approx(0.5));
  CHECK(r.proportion(Transition::IS) == 0.0);
  CHECK(r.proportion(Transition::II) == 0.0);
}

TEST_CASE("isfw_aggregate groups and errors") {
  auto a = record("A", 2.0);
  a.attributes["field"] = "trade";
  auto b = record("B", 4.0);
  b.attributes["field"] = "conflict";
  const auto reports = isfw_aggregate(
      {a, b}, [](const KevRecord& r) { return r.attributes.at("field"); }, "field");
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].key == "conflict");
  CHECK(reports[0].isfw_ser == 4.0);
  CHECK(reports[1].key == "trade");
  CHECK(reports[1].grouping == "field");

  try {
    isfw_aggregate({}, kAll);
    FAIL("expected EmptyGroup");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyGroup);
  }
  CHECK_THROWS_AS(isfw_aggregate({make_kev_record("A", "x", 0, 0, {}, {})}, kAll), Error);
}

TEST_CASE("property: ISFW proportions sum to 1 and duplication is neutral") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<KevRecord> records;
    const int studies = count(rng);
    for (int s = 0; s < studies; ++s) {
      const int kevs = count(rng);
      for (int k = 0; k < kevs; ++k) {
        records.push_back(make_kev_record("s" + std::to_string(s), "k" + std::to_string(k),
                                          0.1 + unit(rng), 0.1 + unit(rng), unit(rng) * 0.1,
                                          unit(rng) * 0.1));
      }
    }
    const auto r = isfw_aggregate(records, kAll)[0];
    double total = 0;
    for (double p : r.proportions) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // duplicating every KEV within its study leaves per-study means unchanged
    auto doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());
    const auto d = isfw_aggregate(doubled, kAll)[0];
    CHECK(d.isfw_ser == doctest::Approx(r.isfw_ser).epsilon(1e-12));
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(d.proportions[t] == doctest::Approx(r.proportions[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("KEV CSV round trip") {
  auto a = make_kev_record("A", "x", 0.1, 0.2, 0.01, 0.08);
  a.attributes["year"] = "2001";
  auto b = make_kev_record("B, Jr.", "z", 0.3, 0.0, 0.2, std::nullopt);
  b.attributes["year"] = "2010";
  std::stringstream buf;
  io::write_csv(buf, std::vector<KevRecord>{a, b});
  const auto back = io::read_kev_csv(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].study_id == "A");
  CHECK(back[0].original_se == 0.1);
  CHECK(*back[0].ser == *a.ser);
  CHECK(*back[0].transition == Transition::SI);
  CHECK(back[0].attributes.at("year") == "2001");
  CHECK(back[1].study_id == "B, Jr.");
  CHECK_FALSE(back[1].dcr_p.has_value());
  CHECK_FALSE(back[1].ser.has_value());
}

TEST_CASE("inference JSON carries ZeroSe rows as nulls") {
  const auto j = io::to_json(single(2.0, 0.0));
  const auto& row = j.at("coefficients").at(0);
  CHECK(row.at("zero_se") == true);
  CHECK(row.at("stat").is_null());
}
