#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "cmrx/confidence.hpp"
#include "cmrx/synth.hpp"
#include "helpers.hpp"

using namespace cmrx;

namespace {

FieldValue P(double v) { return FieldValue::present(v); }
const FieldValue N = FieldValue::null();

ReferenceTable single_row(FieldId f, Sex s, double mu, double sigma) {
  return ReferenceTable({ReferenceRange{f, s, mu, sigma}});
}

SampleSet three_of(const CmrRecord& a, const CmrRecord& b, const CmrRecord& c) {
  SampleSet s;
  s.report_id = "r";
  s.attempts = {a, b, c};
  return s;
}

}  // namespace

TEST_CASE("distribution score") {
  const ScoreParams p;
  const auto t = single_row(FieldId::LVEF, Sex::Male, 60, 5);
  CHECK(distribution_score(FieldId::LVEF, P(60), t, p) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(distribution_score(FieldId::LVEF, P(60 + 6 * 5), t, p) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(distribution_score(FieldId::LVEF, P(60 - 6 * 5), t, p) == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK(distribution_score(FieldId::LVEF, N, t, p) == 0.7);
  CHECK(distribution_score(FieldId::SBP, P(7), t, p) == 0.7);

  // two rows: the better-fitting sex wins
  const ReferenceTable both({ReferenceRange{FieldId::LVEF, Sex::Male, 60, 5}, ReferenceRange{FieldId::LVEF, Sex::Female, 70, 5}});
  CHECK(distribution_score(FieldId::LVEF, P(70), both, p) == doctest::Approx(1.0));
  CHECK(distribution_score(FieldId::LVEF, P(65), both, p) ==
        doctest::Approx(std::exp(-0.5 * std::pow(5.0 / 30.0, 2))).epsilon(1e-12));
}

TEST_CASE("distribution score is symmetric about mu") {
  const ScoreParams p;
  const auto t = single_row(FieldId::LVMASS, Sex::Female, 100, 12);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double d = rng.uniform(0, 99);
    CHECK(distribution_score(FieldId::LVMASS, P(100 + d), t, p) ==
          doctest::Approx(distribution_score(FieldId::LVMASS, P(100 - d), t, p)).epsilon(1e-12));
  }
}

TEST_CASE("pair score") {
  CHECK(pair_score(N, N, 2) == 1.0);
  CHECK(pair_score(P(60), N, 2) == 0.5);
  CHECK(pair_score(N, P(60), 2) == 0.5);
  CHECK(pair_score(P(60), P(60), 2) == 1.0);
  CHECK(pair_score(P(0), P(0), 2) == 1.0);
  CHECK(pair_score(P(60), P(40), 2) == doctest::Approx(std::exp(-0.4)).epsilon(1e-12));
  CHECK(pair_score(P(60), P(40), 2) == doctest::Approx(0.670320).epsilon(1e-6));
  CHECK(pair_score(P(0), P(5), 2) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("pair score: symmetric, in (0,1], decreasing in the gap") {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.uniform(0.1, 500), b = rng.uniform(0.1, 500);
    const double s = pair_score(a, b, 2);
    CHECK(s == pair_score(b, a, 2));
    CHECK(s > 0);
    CHECK(s <= 1);
    const double closer = a + (b - a) * 0.5;
    CHECK(pair_score(a, closer, 2) >= s);
  }
}

TEST_CASE("stability score") {
  const ScoreParams p;
  CHECK(stability_score(P(85), P(85), P(85), p) == 1.0);
  CHECK(stability_score(N, N, N, p) == 1.0);
  CHECK(stability_score(P(85), P(85), N, p) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const double e = std::exp(-2.0 * 20 / 100);
  CHECK(stability_score(P(60), P(60), P(40), p) == doctest::Approx((1 + 2 * e) / 3).epsilon(1e-12));
}

TEST_CASE("vote") {
  CHECK(vote(P(60), P(60), P(62)) == P(60));
  CHECK(vote(N, N, P(60)) == N);
  CHECK(vote(P(60), P(62), P(64)) == P(62));
  CHECK(vote(P(60), N, P(60)) == P(60));
  CHECK(vote(N, N, N) == N);
  CHECK(vote(P(64), N, P(60)) == P(60));  // lower middle of two present values
}

TEST_CASE("vote is invariant under permutation of the samples") {
  Rng rng(21);
  const std::array<FieldValue, 5> pool{N, P(10), P(20), P(30), P(10)};
  for (int i = 0; i < 300; ++i) {
    std::array<FieldValue, 3> s{pool[rng.below(5)], pool[rng.below(5)], pool[rng.below(5)]};
    const auto ref = vote(s[0], s[1], s[2]);
    std::array<int, 3> idx{0, 1, 2};
    do {
      CHECK(vote(s[idx[0]], s[idx[1]], s[idx[2]]) == ref);
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
}

TEST_CASE("vote_category") {
  using C = DiagnosisCategory;
  CHECK(vote_category({C::HCM, C::HCM, C::DCM}) == C::HCM);
  CHECK(vote_category({C::HCM, C::CAD, C::DCM}) == C::Unspecified);
  CHECK(vote_category({}) == C::Unspecified);
}

TEST_CASE("consistency score: LVEF example") {
  const ScoreParams p;
  CmrRecord r;
  r[FieldId::LVEDV] = P(150);
  r[FieldId::LVESV] = P(60);
  r[FieldId::LVSV] = P(90);
  r[FieldId::LVEF] = P(60);
  auto c = consistency_score(r, default_ledger(), p);
  CHECK(c[index_of(FieldId::LVEF)] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c[index_of(FieldId::SBP)] == 0.7);

  r[FieldId::LVEF] = P(55);
  c = consistency_score(r, default_ledger(), p);
  const double f3 = std::exp(-2.0 * 5 / 115);
  CHECK(f3 == doctest::Approx(0.9167).epsilon(1e-4));
  CHECK(c[index_of(FieldId::LVEF)] == doctest::Approx(f3).epsilon(1e-12));
  // LVSV and LVEDV take part in F1 (exact) and F3
  CHECK(c[index_of(FieldId::LVSV)] == doctest::Approx((1.0 + f3) / 2).epsilon(1e-12));
  CHECK(c[index_of(FieldId::LVEDV)] == doctest::Approx((1.0 + f3) / 2).epsilon(1e-12));
  CHECK(c[index_of(FieldId::LVESV)] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("consistency: singular formula is skipped") {
  CmrRecord r;
  r[FieldId::LVSV] = P(0);
  r[FieldId::LVEDV] = P(0);
  r[FieldId::LVEF] = P(60);
  auto c = consistency_score(r, default_ledger(), ScoreParams{});
  CHECK(c[index_of(FieldId::LVEF)] == 0.7);
}

TEST_CASE("aggregate: three identical gold records") {
  SynthOptions o;
  o.null_rate = 0;
  const auto gold = sample_gold(4, DiagnosisCategory::CAD, default_reference_table(), default_ledger(), o);
  std::array<bool, kFieldCount> in_formula{};
  for (const auto& f : default_ledger()) {
    in_formula[index_of(f.lhs)] = true;
    for (auto op : f.operands) in_formula[index_of(op)] = true;
  }

  const ScoreParams p;
  const auto agg = aggregate(three_of(gold, gold, gold), default_reference_table(), default_ledger(), p);
  CHECK(agg.record == gold);
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    const auto& s = agg.bundle.fields[i];
    CHECK(s.stab == 1.0);
    if (in_formula[i]) CHECK(s.cons == doctest::Approx(1.0).epsilon(1e-9));
    else CHECK(s.cons == 0.7);
    CHECK(s.final == doctest::Approx((s.dist + s.stab + s.cons) / 3).epsilon(1e-12));
    CHECK(s.flagged == (s.final < 0.7));
  }
  CHECK(agg.bundle.flagged().empty());

  // With an arbitrarily wide envelope every value sits at the mode, so dist is 1
  // wherever a reference row exists and the 0.7 default elsewhere.
  ScoreParams wide;
  wide.alpha = 1e9;
  const auto flat = aggregate(three_of(gold, gold, gold), default_reference_table(), default_ledger(), wide);
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    const bool has_ref = !default_reference_table().rows_for(field_at(i)).empty();
    const double expected = ((has_ref ? 1.0 : 0.7) + 1.0 + (in_formula[i] ? 1.0 : 0.7)) / 3;
    CHECK(flat.bundle.fields[i].final == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("aggregate: one sample drops LVEF") {
  const ScoreParams p;
  SynthOptions o;
  o.null_rate = 0;
  const auto gold = sample_gold(8, DiagnosisCategory::HCM, default_reference_table(), default_ledger(), o);
  auto dropped = gold;
  dropped[FieldId::LVEF] = FieldValue::null();
  const auto agg = aggregate(three_of(gold, dropped, gold), default_reference_table(), default_ledger(), p);
  const auto& s = agg.bundle[FieldId::LVEF];
  CHECK(s.stab == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(agg.record[FieldId::LVEF] == gold[FieldId::LVEF]);
  const auto clean = aggregate(three_of(gold, gold, gold), default_reference_table(), default_ledger(), p);
  CHECK(s.final < clean.bundle[FieldId::LVEF].final);
}

TEST_CASE("aggregate: failed samples count as nulls; all failed throws") {
  const ScoreParams p;
  SynthOptions o;
  o.null_rate = 0;
  const auto gold = sample_gold(1, DiagnosisCategory::DCM, default_reference_table(), default_ledger(), o);
  SampleSet s;
  s.attempts = {gold, ParseError{ParseError::Kind::Invalid, "x"}, gold};
  const auto agg = aggregate(s, default_reference_table(), default_ledger(), p);
  CHECK(agg.record == gold);
  CHECK(agg.bundle[FieldId::LVEDV].stab == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  SampleSet bad;
  bad.attempts = {ParseError{}, ParseError{}, ParseError{}};
  CHECK_THROWS_AS(aggregate(bad, default_reference_table(), default_ledger(), p), AllInvalidError);
}

TEST_CASE("score params validation") {
  ScoreParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha = 0;
  CHECK_THROWS(p.validate());
  p = {};
  p.n_samples = 0;
  CHECK_THROWS(p.validate());
}
