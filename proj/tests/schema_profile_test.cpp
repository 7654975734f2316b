#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "mlhealth/profile.hpp"
#include "mlhealth/schema.hpp"
#include "mlhealth/table.hpp"

namespace mlhealth {
namespace {

DataTable labels_table(const std::vector<std::string>& labels, const std::string& col = "c") {
  DataTable t({col});
  for (const auto& l : labels) t.add_row({Cell{l}});
  return t;
}

DataTable abc_table() {
  std::vector<std::string> labels;
  labels.insert(labels.end(), 10, "a");
  labels.insert(labels.end(), 70, "b");
  labels.insert(labels.end(), 20, "c");
  return labels_table(labels);
}

TEST(Csv, ParsesNumbersLabelsAndMissing) {
  auto t = csv::parse("x,y,z\n1.5,foo,\n-2,\"3\",7\n");
  ASSERT_EQ(t.num_rows(), 2u);
  EXPECT_EQ(std::get<double>(t.at(0, 0)), 1.5);
  EXPECT_EQ(std::get<std::string>(t.at(0, 1)), "foo");
  EXPECT_TRUE(is_missing(t.at(0, 2)));
  EXPECT_EQ(std::get<double>(t.at(1, 0)), -2.0);
  // Quoted numerics stay labels.
  EXPECT_EQ(std::get<std::string>(t.at(1, 1)), "3");
}

TEST(Csv, RejectsRaggedRowsAndDuplicateColumns) {
  EXPECT_THROW(csv::parse("a,b\n1\n"), InvalidInput);
  EXPECT_THROW(csv::parse("a,a\n1,2\n"), InvalidInput);
  EXPECT_THROW(csv::parse(""), InvalidInput);
}

TEST(Csv, WriteReadRoundTrip) {
  DataTable t({"num", "lab"});
  t.add_row({0.1, std::string("x,y")});
  t.add_row({std::monostate{}, std::string("12")});
  t.add_row({1e-300, std::string("he said \"hi\"")});
  std::ostringstream out;
  csv::write(out, t);
  EXPECT_EQ(csv::parse(out.str()), t);
}

TEST(ComputeBins, EqualWidthEdges) {
  EXPECT_EQ(compute_bins({0.0, 10.0}, 2).edges(), (std::vector<double>{0, 5, 10}));
  EXPECT_EQ(compute_bins({-1.0, 1.0}, 1).edges(), (std::vector<double>{-1, 1}));
}

TEST(ComputeBins, DegenerateRangeGetsUnitBin) {
  EXPECT_EQ(compute_bins({3.0, 3.0, 3.0}, 7).edges(), (std::vector<double>{3, 4}));
}

TEST(ComputeBins, Errors) {
  EXPECT_THROW(compute_bins(std::span<const double>{}, 3), InvalidInput);
  EXPECT_THROW(compute_bins({1.0}, 0), InvalidInput);
  EXPECT_THROW(compute_bins({std::nan("")}, 2), InvalidInput);
}

TEST(BinSpec, RejectsNonIncreasingEdges) {
  EXPECT_THROW(BinSpec({1.0}), InvalidInput);
  EXPECT_THROW(BinSpec({1.0, 1.0}), InvalidInput);
  EXPECT_THROW(BinSpec({2.0, 1.0}), InvalidInput);
}

TEST(Discretize, ContinuousIntervals) {
  auto s = FeatureSchema::continuous("x", BinSpec({0, 5, 10}));
  EXPECT_EQ(s.category_count(), 4u);
  EXPECT_EQ(discretize(-3.0, s), 0u);
  EXPECT_EQ(discretize(0.0, s), 1u);
  EXPECT_EQ(discretize(4.999, s), 1u);
  EXPECT_EQ(discretize(5.0, s), 2u);
  EXPECT_EQ(discretize(10.0, s), 2u);  // last interior bin is closed
  EXPECT_EQ(discretize(10.5, s), 3u);
  EXPECT_EQ(discretize(Cell{}, s), 3u);
  EXPECT_EQ(discretize(std::string("oops"), s), 3u);
}

// Oracle: direct interval membership check over every slot.
TEST(Discretize, ContinuousMatchesIntervalOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 15);
  std::vector<double> edges{0, 1.5, 2, 7, 10};
  auto s = FeatureSchema::continuous("x", BinSpec(edges));
  const std::size_t B = edges.size() - 1;
  for (int i = 0; i < 2000; ++i) {
    double v = i % 10 == 0 ? edges[static_cast<std::size_t>(i / 10) % edges.size()] : u(rng);
    std::size_t expected = 0;
    if (v < edges[0]) {
      expected = 0;
    } else if (v > edges[B]) {
      expected = B + 1;
    } else {
      for (std::size_t b = 0; b < B; ++b) {
        bool last = b + 1 == B;
        if (v >= edges[b] && (v < edges[b + 1] || (last && v == edges[b + 1]))) expected = b + 1;
      }
    }
    ASSERT_EQ(discretize(v, s), expected) << v;
  }
}

TEST(Discretize, CategoricalUnseenAndMissing) {
  auto s = FeatureSchema::categorical("c", {"a", "b"});
  EXPECT_EQ(s.category_count(), 3u);
  EXPECT_EQ(discretize(std::string("a"), s), 0u);
  EXPECT_EQ(discretize(std::string("b"), s), 1u);
  EXPECT_EQ(discretize(std::string("z"), s), 2u);
  EXPECT_EQ(discretize(Cell{}, s), 2u);
}

TEST(FeatureSchema, Invariants) {
  EXPECT_THROW(FeatureSchema::categorical("c", {}), InvalidInput);
  EXPECT_THROW(FeatureSchema::categorical("c", {"a", "a"}), InvalidInput);
}

TEST(InferSchema, LabelColumnIsCategorical) {
  auto schemas = infer_schema(labels_table({"a", "b", "a"}));
  ASSERT_EQ(schemas.size(), 1u);
  EXPECT_TRUE(schemas[0].is_categorical());
  EXPECT_EQ(schemas[0].categories(), (std::vector<std::string>{"a", "b"}));
}

TEST(InferSchema, NumericColumnGetsEqualWidthBins) {
  DataTable t({"x"});
  for (int i = 0; i < 10; ++i) t.add_row({static_cast<double>(i)});
  auto schemas = infer_schema(t, {}, 10);
  ASSERT_FALSE(schemas[0].is_categorical());
  const auto& e = schemas[0].bins().edges();
  ASSERT_EQ(e.size(), 11u);
  // Hand-computed: width 0.9 from 0 to 9.
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], 0.9 * static_cast<double>(i), 1e-12);
  EXPECT_EQ(e.front(), 0.0);
  EXPECT_EQ(e.back(), 9.0);
}

TEST(InferSchema, OverridesAndErrors) {
  DataTable t({"x", "y"});
  t.add_row({1.0, Cell{}});
  t.add_row({2.0, Cell{}});
  EXPECT_THROW(infer_schema(t), InvalidInput);  // all-missing column
  EXPECT_THROW(infer_schema(DataTable({"x"})), InvalidInput);

  DataTable u({"code"});
  u.add_row({1.0});
  u.add_row({2.0});
  u.add_row({1.0});
  auto s = infer_schema(u, {{"code", FeatureKind::categorical}});
  EXPECT_TRUE(s[0].is_categorical());
  EXPECT_EQ(s[0].categories(), (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(discretize(2.0, s[0]), 1u);
  EXPECT_THROW(infer_schema(labels_table({"a"}), {{"c", FeatureKind::continuous}}), InvalidInput);
}

TEST(BuildProfile, DirectCounts) {
  auto t = abc_table();
  auto p = build_profile(t, infer_schema(t), "m1");
  EXPECT_EQ(p.n_train, 100u);
  EXPECT_EQ(p.features[0].freq, (Counts{10, 70, 20, 0}));
  EXPECT_DOUBLE_EQ(p.features[0].importance, 1.0);
  EXPECT_NO_THROW(validate(p));
}

TEST(BuildProfile, OneRowAndImportances) {
  DataTable t({"x", "c"});
  t.add_row({4.0, std::string("q")});
  auto p = build_profile(t, infer_schema(t), "m", std::vector<double>{2, 2});
  EXPECT_EQ(p.n_train, 1u);
  for (const auto& f : p.features) EXPECT_EQ(total(f.freq), 1u);
  EXPECT_EQ(p.importances(), (std::vector<double>{0.5, 0.5}));
  EXPECT_THROW(build_profile(t, infer_schema(t), "m", std::vector<double>{1}), InvalidInput);
  EXPECT_THROW(build_profile(DataTable({"x", "c"}), infer_schema(t), "m"), InvalidInput);
}

TEST(BatchFrequencies, CountsAgainstTrainingSchema) {
  auto p = build_profile(abc_table(), infer_schema(abc_table()), "m1");
  auto b = batch_frequencies(labels_table(std::vector<std::string>(10, "b")), p, "b1");
  EXPECT_EQ(b.n_infer, 10u);
  EXPECT_EQ(b.features[0].freq, (Counts{0, 10, 0, 0}));

  auto same = batch_frequencies(abc_table(), p);
  EXPECT_EQ(same.features[0].freq, p.features[0].freq);
  EXPECT_EQ(same.n_infer, p.n_train);

  auto unseen = batch_frequencies(labels_table({"a", "zz", "b"}), p);
  EXPECT_EQ(unseen.features[0].freq, (Counts{1, 1, 0, 1}));
}

TEST(BatchFrequencies, Errors) {
  auto p = build_profile(abc_table(), infer_schema(abc_table()), "m1");
  EXPECT_THROW(batch_frequencies(labels_table({"a"}, "renamed"), p), NotFound);
  EXPECT_THROW(batch_frequencies(DataTable({"c"}), p), InvalidInput);
}

DataTable random_mixed_table(std::mt19937_64& rng, std::size_t rows) {
  std::normal_distribution<double> g(0, 2);
  std::uniform_int_distribution<int> cat(0, 4);
  std::bernoulli_distribution miss(0.05);
  DataTable t({"x", "y", "c"});
  for (std::size_t r = 0; r < rows; ++r) {
    t.add_row({miss(rng) ? Cell{} : Cell{g(rng)}, Cell{g(rng) * 10 + 3},
               miss(rng) ? Cell{} : Cell{std::string(1, static_cast<char>('a' + cat(rng)))}});
  }
  return t;
}

TEST(ProfileProperties, RebinningTrainingReproducesCounts) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = random_mixed_table(rng, 1 + rng() % 300);
    auto p = build_profile(t, infer_schema(t, {}, 1 + rng() % 15), "m");
    auto b = batch_frequencies(t, p);
    for (std::size_t f = 0; f < p.features.size(); ++f) {
      EXPECT_EQ(b.features[f].freq, p.features[f].freq);
      EXPECT_EQ(total(p.features[f].freq), p.n_train);
    }
  }
}

TEST(ProfileProperties, ShuffleAndConcatenation) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto train = random_mixed_table(rng, 200);
    auto p = build_profile(train, infer_schema(train), "m");
    auto b1 = random_mixed_table(rng, 1 + rng() % 50);
    auto b2 = random_mixed_table(rng, 1 + rng() % 50);

    auto shuffled = b1;
    std::shuffle(shuffled.mutable_rows().begin(), shuffled.mutable_rows().end(), rng);
    EXPECT_EQ(batch_frequencies(shuffled, p).features, batch_frequencies(b1, p).features);

    auto s1 = batch_frequencies(b1, p), s2 = batch_frequencies(b2, p);
    auto both = batch_frequencies(b1.concat(b2), p);
    EXPECT_EQ(both.n_infer, s1.n_infer + s2.n_infer);
    for (std::size_t f = 0; f < both.features.size(); ++f) {
      for (std::size_t i = 0; i < both.features[f].freq.size(); ++i) {
        EXPECT_EQ(both.features[f].freq[i], s1.features[f].freq[i] + s2.features[f].freq[i]);
      }
    }
  }
}

TEST(ProfileProperties, SerializationIsByteStable) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = random_mixed_table(rng, 50 + rng() % 100);
    std::vector<double> imp{0.3 + static_cast<double>(rng() % 7), 1.0 / 3.0, 0.1};
    auto p = build_profile(t, infer_schema(t, {}, 1 + rng() % 12), "model-" + std::to_string(trial), imp,
                           static_cast<TimestampMs>(rng() % 1000));
    auto text = serialize(p);
    auto back = parse_profile(text);
    EXPECT_EQ(back, p);
    EXPECT_EQ(serialize(back), text);
  }
}

TEST(ProfileJson, RejectsInvalidDocuments) {
  auto p = build_profile(abc_table(), infer_schema(abc_table()), "m1");
  auto j = to_json(p);
  auto bad_sum = j;
  bad_sum["features"][0]["freq"][0] = 11;
  EXPECT_THROW(profile_from_json(bad_sum), InvalidInput);
  auto bad_len = j;
  bad_len["features"][0]["freq"].erase(3);
  EXPECT_THROW(profile_from_json(bad_len), InvalidInput);
  auto bad_version = j;
  bad_version["version"] = 2;
  EXPECT_THROW(profile_from_json(bad_version), InvalidInput);
  auto both = j;
  both["features"][0]["edges"] = {0, 1};
  EXPECT_THROW(profile_from_json(both), InvalidInput);
  EXPECT_THROW(parse_profile("{not json"), InvalidInput);
  EXPECT_THROW(profile_from_json(json{{"model_id", "x"}}), InvalidInput);
}

TEST(BatchJson, RoundTripAndAlignment) {
  auto p = build_profile(abc_table(), infer_schema(abc_table()), "m1");
  auto b = batch_frequencies(labels_table({"a", "b"}), p, "batch-7", 1234);
  auto back = batch_from_json(to_json(b));
  EXPECT_EQ(back, b);
  EXPECT_NO_THROW(validate(back, p));
  back.features[0].name = "other";
  EXPECT_THROW(validate(back, p), InvalidInput);
}

}  // namespace
}  // namespace mlhealth
