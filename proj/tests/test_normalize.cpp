#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "shiftlab/error.hpp"
#include "shiftlab/normalize.hpp"

using namespace shiftlab;
using namespace shiftlab::normalize;

namespace {

FeatureRow row(int subject, Segment seg, std::vector<double> f, int cond = kConditionLow) {
  return {subject, cond, seg, std::move(f)};
}

// Subjects with task, baseline1 and baseline2 rows drawn at per-subject offsets.
FeatureTable random_table(std::mt19937_64& rng, int subjects, std::size_t dim) {
  FeatureTable t(dim);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int s = 0; s < subjects; ++s) {
    const double offset = 5.0 * s, scale = 1.0 + s;
    for (Segment seg : {Segment::baseline1, Segment::baseline2, Segment::task})
      for (int i = 0; i < 25; ++i) {
        std::vector<double> f(dim);
        for (auto& v : f) v = offset + scale * g(rng);
        t.add(row(s, seg, f, i % 2));
      }
  }
  return t;
}

std::vector<FeatureRow> rows_of(const FeatureTable& t, int subject) {
  std::vector<FeatureRow> out;
  for (const auto& r : t.rows())
    if (r.subject == subject) out.push_back(r);
  return out;
}

}  // namespace

TEST_CASE("two-point whitening statistics") {
  FeatureTable t(2);
  t.add(row(1, Segment::task, {1, 3}));
  t.add(row(1, Segment::task, {3, 5}));
  const auto st = compute_norm_stats(t, 1, {SchemeKind::whitening});
  CHECK(st.beta == std::vector<double>{2, 4});
  CHECK(st.gamma == std::vector<double>{1, 1});
}

TEST_CASE("formula evaluation for both exponents") {
  FeatureTable t(1);
  t.add(row(0, Segment::task, {5}));
  NormStats st{0, Segment::task, {3}, {2}};
  CHECK(apply_normalization(t, {{0, st}}, {SchemeKind::whitening, 1})[0].features[0] == 1.0);
  CHECK(apply_normalization(t, {{0, st}}, {SchemeKind::whitening, 2})[0].features[0] == 0.5);
  CHECK_THROWS_AS(apply_normalization(t, {{0, st}}, {SchemeKind::whitening, 3}), Error);
}

TEST_CASE("zero variance feature uses the epsilon guard") {
  FeatureTable t(2);
  t.add(row(0, Segment::task, {7, 1}));
  t.add(row(0, Segment::task, {7, 2}));
  const auto st = compute_norm_stats(t, 0, {SchemeKind::whitening});
  CHECK(st.gamma[0] == 0.0);
  const auto out = normalize::normalize(t, {SchemeKind::whitening});
  for (const auto& r : out.rows()) {
    CHECK(std::isfinite(r.features[0]));
    CHECK(r.features[0] == 0.0);
  }
}

TEST_CASE("baseline statistics ignore task rows") {
  FeatureTable t(1);
  t.add(row(0, Segment::baseline1, {1}));
  t.add(row(0, Segment::baseline1, {3}));
  t.add(row(0, Segment::task, {100}));
  t.add(row(0, Segment::baseline2, {-50}));
  t.add(row(0, Segment::baseline2, {50}));
  const auto b1 = compute_norm_stats(t, 0, {SchemeKind::baseline1});
  CHECK(b1.beta[0] == 2.0);
  CHECK(b1.gamma[0] == 1.0);
  CHECK(b1.source_segment == Segment::baseline1);
  const auto b2 = compute_norm_stats(t, 0, {SchemeKind::baseline2});
  CHECK(b2.beta[0] == 0.0);
  CHECK(b2.gamma[0] == 50.0);
}

TEST_CASE("errors: missing baseline, too few rows, missing stats") {
  FeatureTable t(1);
  t.add(row(3, Segment::task, {1}));
  t.add(row(3, Segment::task, {2}));
  try {
    compute_norm_stats(t, 3, {SchemeKind::baseline1});
    FAIL("expected missing_baseline");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::missing_baseline);
    CHECK(std::string(e.what()).find("subject 3") != std::string::npos);
  }
  t.add(row(3, Segment::baseline2, {1}));
  try {
    compute_norm_stats(t, 3, {SchemeKind::baseline2});
    FAIL("expected degenerate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate);
  }
  try {
    apply_normalization(t, {}, {SchemeKind::whitening});
    FAIL("expected missing_stats");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::missing_stats);
  }
}

TEST_CASE("scheme none is the identity") {
  std::mt19937_64 rng(1);
  const auto t = random_table(rng, 3, 4);
  CHECK(normalize::normalize(t, {SchemeKind::none}) == t);
}

TEST_CASE("whitening gives zero mean, unit std per subject") {
  std::mt19937_64 rng(2);
  FeatureTable t(3);
  const auto full = random_table(rng, 4, 3);
  for (const auto& r : full.rows())
    if (r.segment == Segment::task) t.add(r);
  const auto out = normalize::normalize(t, {SchemeKind::whitening});
  for (int s : out.subjects()) {
    const auto rs = rows_of(out, s);
    for (std::size_t f = 0; f < 3; ++f) {
      double m = 0, v = 0;
      for (const auto& r : rs) m += r.features[f];
      m /= static_cast<double>(rs.size());
      for (const auto& r : rs) v += (r.features[f] - m) * (r.features[f] - m);
      v /= static_cast<double>(rs.size());
      CHECK(std::abs(m) < 1e-9);
      CHECK(std::abs(std::sqrt(v) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("whitening is idempotent") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = random_table(rng, 3, 5);
    const auto once = normalize::normalize(t, {SchemeKind::whitening});
    const auto twice = normalize::normalize(once, {SchemeKind::whitening});
    for (std::size_t i = 0; i < once.size(); ++i)
      for (std::size_t f = 0; f < 5; ++f)
        REQUIRE(std::abs(once[i].features[f] - twice[i].features[f]) < 1e-6);
  }
}

TEST_CASE("normalization is per subject: block order does not matter") {
  std::mt19937_64 rng(4);
  for (auto kind : kAllSchemes) {
    const auto t = random_table(rng, 4, 3);
    FeatureTable permuted(3);
    for (int s : {2, 0, 3, 1})
      for (const auto& r : rows_of(t, s)) permuted.add(r);
    const auto a = normalize::normalize(t, {kind});
    const auto b = normalize::normalize(permuted, {kind});
    for (int s = 0; s < 4; ++s) CHECK(rows_of(a, s) == rows_of(b, s));
  }
}

TEST_CASE("adding a constant to one subject leaves its normalized output unchanged") {
  std::mt19937_64 rng(5);
  for (auto kind : {SchemeKind::whitening, SchemeKind::baseline1, SchemeKind::baseline2}) {
    for (int exponent : {1, 2}) {
      const auto t = random_table(rng, 3, 4);
      auto shifted = t;
      const std::vector<double> c{3.5, -20.0, 0.25, 1e3};
      for (auto& r : shifted.rows())
        if (r.subject == 1)
          for (std::size_t f = 0; f < 4; ++f) r.features[f] += c[f];
      const auto a = normalize::normalize(t, {kind, exponent});
      const auto b = normalize::normalize(shifted, {kind, exponent});
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t f = 0; f < 4; ++f)
          REQUIRE(a[i].features[f] == doctest::Approx(b[i].features[f]).epsilon(1e-9).scale(1e-9));
    }
  }
}

TEST_CASE("labels, segments and row counts are preserved") {
  std::mt19937_64 rng(6);
  const auto t = random_table(rng, 2, 2);
  for (auto kind : kAllSchemes) {
    const auto out = normalize::normalize(t, {kind, 2});
    REQUIRE(out.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(out[i].subject == t[i].subject);
      CHECK(out[i].condition == t[i].condition);
      CHECK(out[i].segment == t[i].segment);
    }
  }
}

TEST_CASE("stats serialize to JSON") {
  NormStats st{7, Segment::baseline2, {1.5, 2}, {0.5, 1}};
  const auto j = nlohmann::json::parse(stats_to_json(st, {SchemeKind::baseline2, 2}));
  CHECK(j["subject"] == 7);
  CHECK(j["scheme"] == "baseline2");
  CHECK(j["beta"][0] == 1.5);
  CHECK(j["gamma"][1] == 1.0);
  CHECK(parse_scheme("baseline1") == SchemeKind::baseline1);
  CHECK_THROWS_AS(parse_scheme("zscore"), Error);
}
