#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "mlhealth/metrics.hpp"
#include "oracles.hpp"

namespace mlhealth {
namespace {

const Counts kTrain{10, 70, 20};

TEST(Similarity, ProportionalBatchScoresExactlyOne) {
  auto r = oracle::similarity_exact(kTrain, {1, 7, 2});
  ASSERT_EQ(r.num, r.den);  // 100*540 == 10*5400
  auto s = similarity(kTrain, Counts{1, 7, 2}, 100, 10);
  EXPECT_EQ(s.raw, 1.0);
  EXPECT_EQ(s.clipped, 1.0);
}

TEST(Similarity, PoorCoverageScoresLow) {
  auto r = oracle::similarity_exact(kTrain, {10, 0, 0});
  EXPECT_DOUBLE_EQ(r.value(), 1000.0 / 5400.0);
  auto s = similarity(kTrain, Counts{10, 0, 0}, 100, 10);
  EXPECT_NEAR(s.raw, r.value(), 1e-15);
  EXPECT_NEAR(s.raw, 0.185185, 1e-6);
  EXPECT_EQ(s.clipped, s.raw);
}

TEST(Similarity, GoodCoverageIsNotPenalized) {
  auto r = oracle::similarity_exact(kTrain, {0, 10, 0});
  auto s = similarity(kTrain, Counts{0, 10, 0}, 100, 10);
  EXPECT_NEAR(s.raw, r.value(), 1e-15);
  EXPECT_NEAR(s.raw, 1.296296, 1e-6);
  EXPECT_EQ(s.clipped, 1.0);
}

TEST(Similarity, Errors) {
  EXPECT_THROW(similarity(Counts{0, 0}, Counts{1, 0}, 0, 1), InvalidInput);
  EXPECT_THROW(similarity(Counts{1, 2}, Counts{1}, 3, 1), InvalidInput);
  EXPECT_THROW(similarity(Counts{1, 2}, Counts{1, 0}, 4, 1), InvalidInput);  // N_T mismatch
  EXPECT_THROW(similarity(Counts{1, 2}, Counts{0, 0}, 3, 0), InvalidInput);
}

TEST(SimilarityNaive, MatchesFrequencyForm) {
  std::vector<std::size_t> samples{1, 1, 1, 1, 1, 1, 1, 0, 2, 2};
  EXPECT_NEAR(similarity_naive(kTrain, 100, samples), 1.0, 1e-12);
  std::vector<std::size_t> common{1};
  EXPECT_NEAR(similarity_naive(kTrain, 100, common), 0.7 / 0.54, 1e-12);
  Counts with_unseen{10, 70, 20, 0};
  std::vector<std::size_t> unseen{3};
  EXPECT_EQ(similarity_naive(with_unseen, 100, unseen), 0.0);
  EXPECT_THROW(similarity_naive(kTrain, 100, std::span<const std::size_t>{}), InvalidInput);
  std::vector<std::size_t> out_of_range{9};
  EXPECT_THROW(similarity_naive(kTrain, 100, out_of_range), InvalidInput);
}

TEST(KlDivergence, Examples) {
  EXPECT_EQ(kl_divergence(Counts{50, 50}, Counts{5, 5}, 100, 10), 0.0);
  EXPECT_EQ(kl_divergence(Counts{50, 50}, Counts{10, 0}, 100, 10), kInf);
  double expected = oracle::kl({0.5, 0.5}, {0.25, 0.75});
  EXPECT_NEAR(expected, 0.5 * std::log(2.0) + 0.5 * std::log(0.5 / 0.75), 1e-15);
  EXPECT_NEAR(kl_divergence(Counts{50, 50}, Counts{25, 75}, 100, 100), expected, 1e-15);
  EXPECT_NEAR(expected, 0.1438, 1e-4);
  EXPECT_THROW(kl_divergence(Counts{1}, Counts{1, 0}, 1, 1), InvalidInput);
}

TEST(KlDivergence, IgnoresInferenceMassOutsideTrainingSupport) {
  EXPECT_EQ(kl_divergence(Counts{10, 0}, Counts{5, 5}, 10, 10), std::log(2.0));
}

TEST(Rmse, Examples) {
  EXPECT_EQ(rmse(Counts{3, 1}, Counts{6, 2}, 4, 8), 0.0);
  EXPECT_DOUBLE_EQ(rmse(Counts{1, 1}, Counts{0, 4}, 2, 4), 0.5);
  EXPECT_NEAR(rmse(Counts{1, 0, 0}, Counts{0, 0, 1}, 1, 1), std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_THROW(rmse(Counts{1}, Counts{1, 0}, 1, 1), InvalidInput);
}

TEST(Wasserstein, Examples) {
  std::vector<double> two{0, 1}, three{0, 1, 2};
  EXPECT_EQ(wasserstein1d(Counts{1, 1}, Counts{2, 2}, 2, 4, two), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein1d(Counts{1, 0}, Counts{0, 1}, 1, 1, two), 1.0);
  double oracle = oracle::emd_transport({0.5, 0.5, 0}, {0, 0.5, 0.5}, three);
  EXPECT_DOUBLE_EQ(oracle, 1.0);
  EXPECT_DOUBLE_EQ(wasserstein1d(Counts{1, 1, 0}, Counts{0, 1, 1}, 2, 2, three), oracle);
}

TEST(Wasserstein, Errors) {
  std::vector<double> bad{0, 0}, short_pos{0};
  EXPECT_THROW(wasserstein1d(Counts{1, 0}, Counts{0, 1}, 1, 1, bad), InvalidInput);
  EXPECT_THROW(wasserstein1d(Counts{1, 0}, Counts{0, 1}, 1, 1, short_pos), InvalidInput);
}

TEST(Wasserstein, MatchesTransportPlanOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t c = 2 + rng() % 20;
    Counts ft(c), fi(c);
    std::vector<double> x(c);
    double pos = -3;
    for (std::size_t i = 0; i < c; ++i) {
      ft[i] = rng() % 30;
      fi[i] = rng() % 30;
      pos += 0.1 + static_cast<double>(rng() % 100) / 10.0;
      x[i] = pos;
    }
    ft[0] += 1;
    fi[c - 1] += 1;
    double got = wasserstein1d(ft, fi, total(ft), total(fi), x);
    EXPECT_NEAR(got, oracle::emd_transport(oracle::normalize(ft), oracle::normalize(fi), x), 1e-9);
  }
}

// Random training histogram with at least one positive count.
Counts random_counts(std::mt19937_64& rng, std::size_t c, std::uint64_t max) {
  Counts f(c);
  for (auto& v : f) v = rng() % (max + 1);
  f[rng() % c] += 1;
  return f;
}

TEST(SimilarityProperties, ExactnessSampleAndTrainingCountInvariance) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t c = 1 + rng() % 50;
    auto ft = random_counts(rng, c, 200);
    std::uint64_t scale_i = 1 + rng() % 40, scale_t = 1 + rng() % 40;
    Counts fi = ft, ft2 = ft;
    for (auto& v : fi) v *= scale_i;
    for (auto& v : ft2) v *= scale_t;
    EXPECT_EQ(similarity(ft, fi, total(ft), total(fi)).raw, 1.0);

    auto batch = random_counts(rng, c, 50);
    Counts batch_scaled = batch;
    for (auto& v : batch_scaled) v *= scale_i;
    double base = similarity(ft, batch, total(ft), total(batch)).raw;
    EXPECT_NEAR(similarity(ft, batch_scaled, total(ft), total(batch_scaled)).raw, base, 1e-12 * base);
    EXPECT_NEAR(similarity(ft2, batch, total(ft2), total(batch)).raw, base, 1e-12 * base);
  }
}

TEST(SimilarityProperties, NaiveFormAgreesWithFrequencyForm) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t c = 1 + rng() % 50;
    auto ft = random_counts(rng, c, 300);
    std::vector<std::size_t> samples(1 + rng() % 2000);
    for (auto& s : samples) s = rng() % c;
    Counts fi(c, 0);
    for (auto s : samples) ++fi[s];
    double freq = similarity(ft, fi, total(ft), total(fi)).raw;
    double naive = similarity_naive(ft, total(ft), samples);
    EXPECT_LE(std::abs(freq - naive), 1e-9 * std::max(1e-300, std::abs(freq)));
  }
}

TEST(SimilarityProperties, RareVersusCommonAsymmetry) {
  std::mt19937_64 rng(23);
  int checked = 0;
  while (checked < 300) {
    std::size_t c = 2 + rng() % 20;
    auto ft = random_counts(rng, c, 100);
    auto [mn, mx] = std::minmax_element(ft.begin(), ft.end());
    if (std::count(ft.begin(), ft.end(), *mn) != 1 || std::count(ft.begin(), ft.end(), *mx) != 1) continue;
    ++checked;
    Counts rare(c, 0), common(c, 0);
    rare[static_cast<std::size_t>(mn - ft.begin())] = 1;
    common[static_cast<std::size_t>(mx - ft.begin())] = 1;
    auto nt = total(ft);
    auto s_rare = similarity(ft, rare, nt, 1);
    auto s_common = similarity(ft, common, nt, 1);
    EXPECT_LT(s_rare.raw, s_common.raw);
    std::uint64_t self = 0;
    for (auto v : ft) self += v * v;
    if (*mx * nt >= self) {
      EXPECT_EQ(s_common.clipped, 1.0);
    }
    // Narrow-range non-penalization: concentrated on the mode never scores
    // below the proportional batch once clipped.
    EXPECT_GE(s_common.clipped, similarity(ft, ft, nt, nt).clipped);
  }
}

TEST(DivergenceProperties, ZeroIffEqualAndNonNegative) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t c = 1 + rng() % 30;
    auto ft = random_counts(rng, c, 50);
    auto fi = random_counts(rng, c, 50);
    std::vector<double> pos(c);
    for (std::size_t i = 0; i < c; ++i) pos[i] = static_cast<double>(i);
    auto nt = total(ft), ni = total(fi);
    bool equal = oracle::normalize(ft) == oracle::normalize(fi);
    Counts doubled = ft;
    for (auto& v : doubled) v *= 3;
    EXPECT_EQ(kl_divergence(ft, doubled, nt, 3 * nt), 0.0);
    EXPECT_EQ(rmse(ft, doubled, nt, 3 * nt), 0.0);
    EXPECT_EQ(wasserstein1d(ft, doubled, nt, 3 * nt, pos), 0.0);
    double k = kl_divergence(ft, fi, nt, ni), r = rmse(ft, fi, nt, ni), w = wasserstein1d(ft, fi, nt, ni, pos);
    EXPECT_GE(k, 0.0);
    EXPECT_GE(r, 0.0);
    EXPECT_GE(w, 0.0);
    if (!equal) {
      EXPECT_GT(r, 0.0);
      EXPECT_GT(w, 0.0);
    }
    if (std::isfinite(k)) {
      EXPECT_NEAR(k, oracle::kl(oracle::normalize(ft), oracle::normalize(fi)), 1e-9);
    }
  }
}

TEST(DivergenceProperties, KlAndRmseBlindToWhichEqualFrequencySlotGrows) {
  // Slots 1 and 2 have equal training frequency; slot 3 is rarer.
  Counts ft{50, 20, 20, 10};
  Counts more_on_1{40, 40, 10, 10}, more_on_2{40, 10, 40, 10}, more_on_3{40, 10, 20, 30};
  EXPECT_DOUBLE_EQ(kl_divergence(ft, more_on_1, 100, 100), kl_divergence(ft, more_on_2, 100, 100));
  EXPECT_DOUBLE_EQ(rmse(ft, more_on_1, 100, 100), rmse(ft, more_on_2, 100, 100));
  EXPECT_DOUBLE_EQ(similarity(ft, more_on_1, 100, 100).raw, similarity(ft, more_on_2, 100, 100).raw);
  // Shifting the excess onto a rarer slot is seen by similarity.
  EXPECT_LT(similarity(ft, more_on_3, 100, 100).raw, similarity(ft, more_on_1, 100, 100).raw);
}

TEST(DivergenceProperties, RmseExactlyInvariantToSlotRelabelling) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t c = 2 + rng() % 30;
    auto ft = random_counts(rng, c, 40);
    auto fi = random_counts(rng, c, 40);
    std::vector<std::size_t> perm(c);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Counts pt(c), pi(c);
    for (std::size_t i = 0; i < c; ++i) {
      pt[i] = ft[perm[i]];
      pi[i] = fi[perm[i]];
    }
    EXPECT_EQ(rmse(ft, fi, total(ft), total(fi)), rmse(pt, pi, total(pt), total(pi)));
  }
}

ProfileFeature cat_feature(const std::string& name, Counts f) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) labels.push_back("l" + std::to_string(i));
  return {FeatureSchema::categorical(name, labels), std::move(f), 1.0};
}

TEST(ScoreFeature, IdentityAndPoorCoverage) {
  auto pf = cat_feature("c", {10, 70, 20, 0});
  auto id = score_feature(pf, {"c", {10, 70, 20, 0}}, 100, 100);
  EXPECT_EQ(id.similarity, 1.0);
  EXPECT_EQ(id.kl, 0.0);
  EXPECT_EQ(id.rmse, 0.0);
  EXPECT_EQ(id.wasserstein, 0.0);

  auto poor = score_feature(pf, {"c", {10, 0, 0, 0}}, 100, 10);
  EXPECT_NEAR(poor.similarity, 1000.0 / 5400.0, 1e-12);
  EXPECT_EQ(poor.kl, kInf);
  EXPECT_GT(poor.rmse, 0.0);
  EXPECT_GT(poor.wasserstein, 0.0);

  auto empty_bin = score_feature(pf, {"c", {5, 5, 0, 0}}, 100, 10);
  EXPECT_EQ(empty_bin.kl, kInf);
  EXPECT_TRUE(std::isfinite(empty_bin.rmse));
  EXPECT_TRUE(std::isfinite(empty_bin.wasserstein));
  EXPECT_TRUE(std::isfinite(empty_bin.similarity));

  EXPECT_THROW(score_feature(pf, {"other", {1, 0, 0, 0}}, 100, 1), InvalidInput);
}

FeatureScore fs(std::string name, double sim, double kl = 0) {
  FeatureScore s;
  s.name = std::move(name);
  s.similarity = s.similarity_raw = sim;
  s.kl = kl;
  return s;
}

TEST(Aggregate, TopKSelectionAndMeans) {
  std::vector<double> imp{0.9, 0.1};
  auto h = aggregate({fs("a", 1.0), fs("b", 0.2)}, imp, 1);
  EXPECT_EQ(h.aggregate.similarity, 1.0);
  EXPECT_EQ(h.selected, (std::vector<std::string>{"a"}));

  auto all = aggregate({fs("a", 1.0), fs("b", 1.0)}, imp, 2);
  EXPECT_EQ(all.aggregate.similarity, 1.0);

  auto inf = aggregate({fs("a", 1.0, 0.1), fs("b", 1.0, kInf)}, imp, 2);
  EXPECT_EQ(inf.aggregate.kl, kInf);

  auto mean = aggregate({fs("a", 0.5), fs("b", 0.2)}, imp, 2);
  EXPECT_DOUBLE_EQ(mean.aggregate.similarity, 0.35);
}

TEST(Aggregate, TiesBrokenByName) {
  std::vector<double> imp{0.25, 0.25, 0.25, 0.25};
  auto h = aggregate({fs("d", 1), fs("b", 1), fs("c", 1), fs("a", 1)}, imp, 2);
  EXPECT_EQ(h.selected, (std::vector<std::string>{"a", "b"}));
}

TEST(Aggregate, Errors) {
  std::vector<double> imp{1.0};
  EXPECT_THROW(aggregate({fs("a", 1)}, imp, 0), InvalidInput);
  EXPECT_THROW(aggregate({}, {}, 1), InvalidInput);
  EXPECT_THROW(aggregate({fs("a", 1)}, imp, 2), InvalidInput);
}

TEST(HealthScoreJson, InfinityEncodedAsStringAndRoundTrips) {
  std::vector<double> imp{0.5, 0.5};
  auto h = aggregate({fs("a", 0.3, kInf), fs("b", 0.123456789012345678, 0.25)}, imp, 2);
  auto j = to_json(h);
  EXPECT_EQ(j["aggregate"]["kl"], "inf");
  EXPECT_EQ(j["features"][0]["kl"], "inf");
  auto back = health_score_from_json(j);
  EXPECT_EQ(back, h);
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

}  // namespace
}  // namespace mlhealth
