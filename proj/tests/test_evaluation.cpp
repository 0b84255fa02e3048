#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "iclsel/evaluation.hpp"

using namespace iclsel;

namespace {

PredictionRecord rec(std::string id, Ideology gold, std::optional<Ideology> pred,
                     std::string hash = "h") {
  PredictionRecord r;
  r.query_id = std::move(id);
  r.gold = gold;
  r.pred = pred;
  r.status = pred ? ParseStatus::ok : ParseStatus::empty;
  r.attempts = 1;
  r.config_hash = std::move(hash);
  return r;
}

std::vector<PredictionRecord> with_accuracy(std::size_t n, std::size_t n_correct, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto gold = ideology_from_index(rng() % 3);
    const auto pred = i < n_correct ? gold : ideology_from_index((index_of(gold) + 1 + rng() % 2) % 3);
    out.push_back(rec("q" + std::to_string(i), gold, pred));
  }
  return out;
}

// Reference McNemar p via the normal tail: chi2_1 survival(x) = 2 * (1 - Phi(sqrt x)).
double reference_p(double x) { return 2.0 * (1.0 - 0.5 * (1.0 + std::erf(std::sqrt(x) / std::sqrt(2.0)))); }

}  // namespace

TEST_CASE("score arithmetic") {
  auto r = score(with_accuracy(4, 2));
  CHECK(r.accuracy == 0.5);
  CHECK(r.n == 4);
  auto big = score(with_accuracy(999, 640));
  CHECK(big.accuracy == doctest::Approx(640.0 / 999.0));
  CHECK(big.ci_lo <= big.accuracy);
  CHECK(big.ci_hi >= big.accuracy);
  CHECK(big.ci_hi - big.ci_lo > 0.03);
  CHECK(big.ci_hi - big.ci_lo < 0.09);
}

TEST_CASE("all correct gives a degenerate interval") {
  auto r = score(with_accuracy(50, 50));
  CHECK(r.accuracy == 1.0);
  CHECK(r.ci_lo == 1.0);
  CHECK(r.ci_hi == 1.0);
}

TEST_CASE("parse failures fold into the next column") {
  std::vector<PredictionRecord> records = {
      rec("a", Ideology::Liberal, std::nullopt),
      rec("b", Ideology::Neutral, std::nullopt),
      rec("c", Ideology::Conservative, std::nullopt),
      rec("d", Ideology::Conservative, Ideology::Conservative),
  };
  records[1].status = ParseStatus::ambiguous;
  records[2].status = ParseStatus::transport_error;
  const auto r = score(records);
  CHECK(r.parse_failure_count == 3);
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.confusion[1][2] == 1);
  CHECK(r.confusion[2][0] == 1);
  CHECK(r.confusion[2][2] == 1);
  CHECK(r.accuracy == 0.25);
  for (auto gold : kAllIdeologies) CHECK(parse_failure_column(gold) != gold);
}

TEST_CASE("confusion invariants on random records") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PredictionRecord> records;
    const std::size_t n = 1 + rng() % 80;
    for (std::size_t i = 0; i < n; ++i) {
      std::optional<Ideology> pred;
      if (rng() % 5) pred = ideology_from_index(rng() % 3);
      records.push_back(rec("q" + std::to_string(i), ideology_from_index(rng() % 3), pred));
    }
    const auto r = score(records, {}, {200, static_cast<std::uint64_t>(trial)});
    std::size_t total = 0;
    std::size_t trace = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      trace += r.confusion[i][i];
      for (std::size_t j = 0; j < 3; ++j) total += r.confusion[i][j];
    }
    CHECK(total == n);
    CHECK(r.accuracy == static_cast<double>(trace) / static_cast<double>(n));
    CHECK(r.ci_lo <= r.accuracy);
    CHECK(r.accuracy <= r.ci_hi);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
  }
}

TEST_CASE("score errors") {
  CHECK_THROWS_AS(score({}), Error);
  auto mixed = with_accuracy(3, 1);
  mixed[2].config_hash = "other";
  CHECK_THROWS_AS(score(mixed), Error);
  auto unlabeled = with_accuracy(3, 1);
  unlabeled[0].gold.reset();
  CHECK_THROWS_AS(score(unlabeled), Error);
}

TEST_CASE("bootstrap is seeded and stable in the number of resamples") {
  const auto records = with_accuracy(600, 390, 4);
  const auto a = score(records, {}, {1000, 9});
  const auto b = score(records, {}, {1000, 9});
  CHECK(a.ci_lo == b.ci_lo);
  CHECK(a.ci_hi == b.ci_hi);
  const auto wide = score(records, {}, {10000, 9});
  CHECK(std::abs(wide.ci_lo - a.ci_lo) < 0.02);
  CHECK(std::abs(wide.ci_hi - a.ci_hi) < 0.02);
  // normal-approximation reference for the interval width
  const double p = 0.65;
  const double half = 1.96 * std::sqrt(p * (1 - p) / 600.0);
  CHECK(a.ci_lo == doctest::Approx(p - half).epsilon(0.01 / p));
  CHECK(a.ci_hi == doctest::Approx(p + half).epsilon(0.01 / p));
}

TEST_CASE("delta matrix") {
  // gold Liberal row: A predicts (L, L, N, N), B moves one item from N to L
  std::vector<PredictionRecord> a = {rec("1", Ideology::Liberal, Ideology::Liberal),
                                     rec("2", Ideology::Liberal, Ideology::Liberal),
                                     rec("3", Ideology::Liberal, Ideology::Neutral),
                                     rec("4", Ideology::Liberal, Ideology::Neutral),
                                     rec("5", Ideology::Neutral, Ideology::Neutral)};
  auto b = a;
  b[2].pred = Ideology::Liberal;
  const auto d = delta(score(a), score(b));
  CHECK(d[0][0] == doctest::Approx(25.0));
  CHECK(d[0][1] == doctest::Approx(-25.0));
  CHECK(d[0][2] == doctest::Approx(0.0));
  for (std::size_t i = 1; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(d[i][j] == 0.0);
  }
  const auto self = delta(score(a), score(a));
  for (const auto& row : self) {
    for (double v : row) CHECK(v == 0.0);
  }

  auto other_ids = a;
  other_ids[4].query_id = "9";
  CHECK_THROWS_AS(delta(score(a), score(other_ids)), Error);

  const auto doc = nlohmann::json::parse(delta_json(d));
  CHECK(doc.dump().find("25") != std::string::npos);
}

TEST_CASE("delta rows sum to zero on random paired reports") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PredictionRecord> a;
    std::vector<PredictionRecord> b;
    for (int i = 0; i < 60; ++i) {
      const auto gold = ideology_from_index(rng() % 3);
      a.push_back(rec("q" + std::to_string(i), gold, ideology_from_index(rng() % 3)));
      b.push_back(rec("q" + std::to_string(i), gold, ideology_from_index(rng() % 3)));
    }
    const auto d = delta(score(a, {}, {10, 0}), score(b, {}, {10, 0}));
    for (const auto& row : d) CHECK(std::abs(row[0] + row[1] + row[2]) <= 1e-9);
  }
}

TEST_CASE("report json round trip") {
  ReportDescriptor desc{"test", 8, "title", "balanced", "set-bsr", "mock"};
  const auto r = score(with_accuracy(20, 13), desc);
  const auto back = report_from_json(report_json(r));
  CHECK(back.accuracy == r.accuracy);
  CHECK(back.ci_lo == r.ci_lo);
  CHECK(back.confusion == r.confusion);
  CHECK(back.config.k == 8);
  CHECK(back.config.fields == "title");
  CHECK(back.ids_digest == r.ids_digest);
  CHECK(back.config_hash == "h");
}

TEST_CASE("mcnemar reference values") {
  const auto a = mcnemar_from_counts(5, 15);
  CHECK(a.statistic == doctest::Approx(4.05));
  CHECK(a.p < 0.05);
  CHECK(a.p == doctest::Approx(reference_p(4.05)).epsilon(1e-9));
  CHECK(a.stars() == "*");

  const auto b = mcnemar_from_counts(7, 7);
  CHECK(b.statistic == doctest::Approx(1.0 / 14.0));
  CHECK(b.p > 0.5);
  CHECK(b.stars() == "");

  const auto none = mcnemar_from_counts(0, 0);
  CHECK(none.statistic == 0.0);
  CHECK(none.p == 1.0);

  const auto one = mcnemar_from_counts(0, 1);
  CHECK(one.statistic == 0.0);
  CHECK(one.p == 1.0);

  CHECK(mcnemar_from_counts(2, 30).stars() == "**");
  CHECK(chi2_1df_survival(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("mcnemar exact binomial mode") {
  // two-sided binomial(n=20, 0.5) tail at 5: 2 * sum_{i<=5} C(20,i) / 2^20
  double tail = 0.0;
  double coef = 1.0;
  for (int i = 0; i <= 5; ++i) {
    tail += coef;
    coef = coef * (20 - i) / (i + 1);
  }
  const double expected = 2.0 * tail / std::pow(2.0, 20);
  const auto r = mcnemar_from_counts(5, 15, McNemarMethod::exact_binomial);
  CHECK(r.p == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.statistic == doctest::Approx(4.05));
  CHECK(mcnemar_from_counts(7, 7, McNemarMethod::exact_binomial).p == doctest::Approx(1.0));
}

TEST_CASE("mcnemar on records") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PredictionRecord> a;
    std::vector<PredictionRecord> b;
    for (int i = 0; i < 40; ++i) {
      const auto gold = ideology_from_index(rng() % 3);
      a.push_back(rec("q" + std::to_string(i), gold, ideology_from_index(rng() % 3)));
      b.push_back(rec("q" + std::to_string(i), gold, ideology_from_index(rng() % 3)));
    }
    std::shuffle(b.begin(), b.end(), rng);
    const auto ab = mcnemar(a, b);
    const auto ba = mcnemar(b, a);
    CHECK(ab.statistic == ba.statistic);
    CHECK(ab.p == ba.p);
    CHECK(ab.b == ba.c);
  }

  auto base = with_accuracy(10, 5);
  CHECK(mcnemar(base, base).statistic == 0.0);
  CHECK(mcnemar(base, base).p == 1.0);
  auto flipped = base;
  flipped[7].pred = flipped[7].gold;
  const auto r = mcnemar(base, flipped);
  CHECK(r.b == 0);
  CHECK(r.c == 1);
  CHECK(r.statistic == 0.0);
  CHECK(r.p == 1.0);

  auto fewer = base;
  fewer.pop_back();
  CHECK_THROWS_AS(mcnemar(base, fewer), Error);

  const auto doc = nlohmann::json::parse(comparison_json("A", "B", r, McNemarMethod::corrected_chi2));
  CHECK(doc["pair"][0] == "A");
  CHECK(doc["p"] == 1.0);
  CHECK(doc["stars"] == "");
}
