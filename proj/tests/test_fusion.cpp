#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mmfuse/error.hpp"
#include "mmfuse/fusion.hpp"
#include "oracles.hpp"

using namespace mmfuse;

namespace {

DecisionProfile dp_star() {
  return build_profile({ClassSupport({0.6, 0.4}), ClassSupport({0.8, 0.2}), ClassSupport({0.3, 0.7})},
                       {"P", "R", "S"});
}

DecisionProfile from_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<ClassSupport> s;
  for (const auto& r : rows) {
    s.emplace_back(r);
  }
  return build_profile(s);
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(std::abs(a[k] - b[k]) <= tol);
  }
}

DecisionTemplateSet templates(const std::vector<std::vector<double>>& t0,
                              const std::vector<std::vector<double>>& t1) {
  return fit_decision_templates({{from_rows(t0), 0}, {from_rows(t1), 1}});
}

}  // namespace

TEST_CASE("aggregation A1") {
  const auto a = aggregate_a1({make_unnamed({1, 2}), make_unnamed({3, 4})});
  CHECK(a.values() == std::vector<double>{2, 3});
  CHECK(aggregate_a1({make_unnamed({5, 6})}).values() == std::vector<double>{5, 6});
  CHECK(aggregate_a1({make_unnamed({1, 2}), make_unnamed({1, 4}), make_unnamed({1, 6})}).values() ==
        std::vector<double>{1, 4});
  CHECK_THROWS_AS(aggregate_a1({}), DataError);
  CHECK_THROWS_AS(aggregate_a1({make_unnamed({1, 2}), make_unnamed({1, 2}, "g")}), DataError);
}

TEST_CASE("aggregation A2") {
  check_close(aggregate_a2({ClassSupport({0.2, 0.8}), ClassSupport({0.4, 0.6})}).values(), {0.3, 0.7});
  check_close(aggregate_a2({ClassSupport({0.1, 0.9})}).values(), {0.1, 0.9});
  check_close(aggregate_a2({ClassSupport({1, 0}), ClassSupport({0, 1})}).values(), {0.5, 0.5});
  CHECK_THROWS_AS(aggregate_a2({}), DataError);
  CHECK_THROWS_AS(aggregate_a2({ClassSupport({1, 0}), ClassSupport({0, 0, 1})}), DataError);
  CHECK(parse_aggregation("A1") == Aggregation::FeatureMean);
  CHECK(to_string(Aggregation::ScoreMean) == "A2");
  CHECK_THROWS_AS(parse_aggregation("A3"), ConfigError);
}

TEST_CASE("decision profile construction") {
  const auto dp = dp_star();
  CHECK(dp.modalities() == 3);
  CHECK(dp.classes() == 2);
  CHECK(dp(1, 0) == 0.8);
  CHECK(dp(2, 1) == 0.7);
  CHECK(from_rows({{0.5, 0.5}}).modalities() == 1);
  CHECK_THROWS_AS(build_profile({ClassSupport({1, 0}), ClassSupport({0, 0, 1})}), DataError);
  CHECK_THROWS_AS(DecisionProfile(1, 2, {0.7, 0.7}), DataError);
}

TEST_CASE("product, max, min, mean on the shared fixture") {
  const auto dp = dp_star();
  const auto p = fuse_product(dp);
  check_close(*p.supports, {0.144, 0.056});
  CHECK(p.chosen_class == 0);
  const auto mx = fuse_max(dp);
  check_close(*mx.supports, {0.8, 0.7});
  CHECK(mx.chosen_class == 0);
  const auto mn = fuse_min(dp);
  check_close(*mn.supports, {0.3, 0.2});
  CHECK(mn.chosen_class == 0);
  const auto me = fuse_mean(dp);
  check_close(*me.supports, {1.7 / 3, 1.3 / 3});
  CHECK(me.chosen_class == 0);
}

TEST_CASE("single-row profiles reduce to the row") {
  const auto dp = from_rows({{0.35, 0.65}});
  for (auto* f : {&fuse_product, &fuse_max, &fuse_min, &fuse_mean}) {
    const auto o = f(dp);
    check_close(*o.supports, {0.35, 0.65});
    CHECK(o.chosen_class == 1);
  }
  CHECK(fuse_product(from_rows({{0.0, 1.0}, {0.5, 0.5}})).supports->at(0) == 0.0);
}

TEST_CASE("symmetric rules ignore row order") {
  const auto a = dp_star();
  const auto b = from_rows({{0.3, 0.7}, {0.6, 0.4}, {0.8, 0.2}});
  for (auto* f : {&fuse_product, &fuse_max, &fuse_min, &fuse_mean}) {
    check_close(*f(a).supports, *f(b).supports, 1e-15);
  }
  CHECK(fuse_majority_vote(a).chosen_class == fuse_majority_vote(b).chosen_class);
}

TEST_CASE("decision templates") {
  const auto t = templates({{0.6, 0.4}}, {{0.1, 0.9}});
  CHECK(t.templates[0].entries() == std::vector<double>{0.6, 0.4});
  CHECK(t.class_counts == std::vector<std::size_t>{1, 1});
  const auto mid = fit_decision_templates(
      {{dp_star(), 0}, {from_rows({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}), 0}, {dp_star(), 1}});
  check_close(mid.templates[0].entries(), {0.55, 0.45, 0.65, 0.35, 0.4, 0.6});
  CHECK_THROWS_AS(fit_decision_templates({{dp_star(), 0}, {dp_star(), 0}}), DataError);

  const auto dts = templates({{0.8, 0.2}}, {{0.2, 0.8}});
  const auto o = fuse_decision_template(from_rows({{0.6, 0.4}}), dts);
  check_close(*o.supports, {0.96, 0.84});
  CHECK(o.chosen_class == 0);
  const auto exact = fuse_decision_template(from_rows({{0.2, 0.8}}), dts);
  CHECK(exact.supports->at(1) == 1.0);
  const auto far = templates({{1, 0}}, {{0, 1}});
  CHECK(fuse_decision_template(from_rows({{0, 1}}), far).supports->at(0) == 0.0);
}

TEST_CASE("dempster-shafer") {
  // |DT_0 - D|^2 = 0 and |DT_1 - D|^2 = 1 with D = [1, 0]
  const auto dts = templates({{1.0, 0.0}}, {{1.0 - std::sqrt(0.5), std::sqrt(0.5)}});
  const auto o = fuse_dempster_shafer(from_rows({{1.0, 0.0}}), dts);
  check_close(*o.supports, {0.8, 0.2});
  CHECK(o.chosen_class == 0);

  const auto sym = templates({{0.9, 0.1}}, {{0.1, 0.9}});
  const auto eq = fuse_dempster_shafer(from_rows({{0.5, 0.5}}), sym);
  check_close(*eq.supports, {0.5, 0.5});
  CHECK(eq.chosen_class == 0);

  // consistent permutation of modality rows
  const auto t0 = std::vector<std::vector<double>>{{0.7, 0.3}, {0.9, 0.1}, {0.4, 0.6}};
  const auto t1 = std::vector<std::vector<double>>{{0.2, 0.8}, {0.35, 0.65}, {0.1, 0.9}};
  const auto perm = [](std::vector<std::vector<double>> m) {
    std::rotate(m.begin(), m.begin() + 1, m.end());
    return m;
  };
  const std::vector<std::vector<double>> x = {{0.6, 0.4}, {0.8, 0.2}, {0.3, 0.7}};
  check_close(*fuse_dempster_shafer(from_rows(x), templates(t0, t1)).supports,
              *fuse_dempster_shafer(from_rows(perm(x)), templates(perm(t0), perm(t1))).supports);
  check_close(*fuse_decision_template(from_rows(x), templates(t0, t1)).supports,
              *fuse_decision_template(from_rows(perm(x)), templates(perm(t0), perm(t1))).supports);
  CHECK_THROWS_AS(fuse(FusionRule::DempsterShafer, dp_star(), nullptr), DataError);
}

TEST_CASE("majority vote and confidence") {
  CHECK(fuse_majority_vote(dp_star()).chosen_class == 0);
  CHECK_FALSE(fuse_majority_vote(dp_star()).supports.has_value());
  CHECK(fuse_majority_vote(from_rows({{0.9, 0.1}, {0.2, 0.8}})).chosen_class == 0);
  CHECK(fuse_majority_vote(from_rows({{0.1, 0.9}, {0.2, 0.8}})).chosen_class == 1);
  CHECK(fuse_confidence(dp_star()).chosen_class == 0);
  CHECK(fuse_confidence(from_rows({{0.5, 0.5}, {0.9, 0.1}})).chosen_class == 0);
  CHECK(fuse_confidence(from_rows({{0.5, 0.5}, {0.5, 0.5}})).chosen_class == 0);
  CHECK(fuse_confidence(from_rows({{0.6, 0.4}, {0.05, 0.95}})).chosen_class == 1);
}

TEST_CASE("rule identifiers") {
  const char* ids[] = {"product", "max", "min", "mean", "dt", "ds", "vote", "confidence"};
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(to_string(kFusionRules[k]) == ids[k]);
    CHECK(parse_fusion_rule(ids[k]) == kFusionRules[k]);
  }
  CHECK_THROWS_AS(parse_fusion_rule("median"), ConfigError);
  CHECK(needs_templates(FusionRule::DecisionTemplate));
  CHECK_FALSE(needs_templates(FusionRule::Mean));
  CHECK(is_crisp(FusionRule::Vote));
  CHECK_FALSE(is_crisp(FusionRule::DempsterShafer));
}

TEST_CASE("fusion rules agree with the oracle over the quarter grid") {
  const std::vector<double> q = {0, 0.25, 0.5, 0.75, 1};
  const std::vector<std::vector<std::vector<double>>> tsets = {
      {{0.75, 0.25}, {0.25, 0.75}},
      {{1.0, 0.0}, {0.5, 0.5}},
      {{0.5, 0.5}, {0.0, 1.0}},
  };
  std::size_t checked = 0;
  for (std::size_t L = 1; L <= 3; ++L) {
    std::vector<std::size_t> idx(L, 0);
    while (true) {
      oracle::Matrix rows;
      for (auto k : idx) {
        rows.push_back({q[k], 1.0 - q[k]});
      }
      const auto dp = from_rows(rows);
      for (const auto& ts : tsets) {
        std::vector<oracle::Matrix> dt(2);
        for (std::size_t c = 0; c < 2; ++c) {
          dt[c] = oracle::Matrix(L, ts[c]);
        }
        const auto dts = fit_decision_templates({{from_rows(dt[0]), 0}, {from_rows(dt[1]), 1}});
        check_close(*fuse_decision_template(dp, dts).supports, oracle::decision_template(rows, dt));
        const auto ds = fuse_dempster_shafer(dp, dts);
        const auto ref = oracle::dempster_shafer(rows, dt);
        check_close(*ds.supports, ref);
        CHECK(ds.chosen_class == oracle::first_max(ref));
      }
      check_close(*fuse_product(dp).supports, oracle::product(rows));
      check_close(*fuse_max(dp).supports, oracle::maximum(rows));
      check_close(*fuse_min(dp).supports, oracle::minimum(rows));
      check_close(*fuse_mean(dp).supports, oracle::mean(rows));
      CHECK(fuse_product(dp).chosen_class == oracle::first_max(oracle::product(rows)));
      CHECK(fuse_majority_vote(dp).chosen_class == oracle::majority_vote(rows));
      CHECK(fuse_confidence(dp).chosen_class == oracle::confidence(rows));
      if (L == 1) {
        CHECK(fuse_mean(dp).chosen_class == fuse_product(dp).chosen_class);
      }
      ++checked;
      std::size_t pos = 0;
      while (pos < L && ++idx[pos] == q.size()) {
        idx[pos++] = 0;
      }
      if (pos == L) {
        break;
      }
    }
  }
  CHECK(checked == 5 + 25 + 125);
}

TEST_CASE("column locality of the elementwise rules") {
  // changing class 1 entries leaves the class 0 support alone
  const auto a = from_rows({{0.6, 0.4}, {0.8, 0.2}});
  const auto b = DecisionProfile(2, 3, {0.6, 0.1, 0.3, 0.8, 0.2, 0.0});
  for (auto* f : {&fuse_product, &fuse_max, &fuse_min, &fuse_mean}) {
    CHECK(f(a).supports->at(0) == f(b).supports->at(0));
  }
}

TEST_CASE("early concatenation") {
  const NamedVectors v = {{"A", FeatureVector({"x", "y"}, {1, 2})}, {"B", FeatureVector({"z"}, {3})}};
  const auto c = early_concat(v);
  CHECK(c.values() == std::vector<double>{1, 2, 3});
  CHECK(c.names() == std::vector<std::string>{"A:x", "A:y", "B:z"});
  const NamedVectors swapped = {v[1], v[0]};
  CHECK(early_concat(swapped).values() == std::vector<double>{3, 1, 2});
  const NamedVectors with_empty = {v[0], {"E", FeatureVector()}};
  CHECK_THROWS_AS(early_concat(with_empty), DataError);
  CHECK(parse_early_fusion("kronecker") == EarlyFusion::Kronecker);
  CHECK_THROWS_AS(parse_early_fusion("sum"), ConfigError);
}

TEST_CASE("early kronecker product") {
  const NamedVectors v = {{"A", make_unnamed({1, 2})}, {"B", make_unnamed({3, 4})}};
  CHECK(early_kronecker(v, false).values() == std::vector<double>{3, 4, 6, 8});
  const NamedVectors unit = {{"A", make_unnamed({5, 7})}, {"B", make_unnamed({1})}};
  CHECK(early_kronecker(unit, false).values() == std::vector<double>{5, 7});
  const NamedVectors aug = {{"A", make_unnamed({1, 2})}, {"B", make_unnamed({3})}};
  const auto k = early_kronecker(aug, true);
  CHECK(k.values() == std::vector<double>{3, 1, 6, 2, 3, 1});
  CHECK(k.size() == 6);
  CHECK(k.names().front() == "A:f0*B:f0");
  CHECK(early_fuse(EarlyFusion::Concat, aug).size() == 3);
}
