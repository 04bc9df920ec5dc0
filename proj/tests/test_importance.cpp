#include "tamrf/error.hpp"
#include "tamrf/importance.hpp"
#include "tamrf/io.hpp"
#include "tamrf/synthetic.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace tamrf;

namespace {

template <typename Tag>
void expect_sums_to_100(const WeightTable<Tag>& t, double tol = 1e-6) {
  for (const auto& target : t.targets()) EXPECT_NEAR(t.total(target), 100.0, tol) << target;
}

}  // namespace

TEST(RelativeImportance, Proportional) {
  const auto w = relative_importance({{"a", 4.0}, {"b", 1.0}});
  EXPECT_DOUBLE_EQ(w.at("a"), 80.0);
  EXPECT_DOUBLE_EQ(w.at("b"), 20.0);
  EXPECT_DOUBLE_EQ(relative_importance({{"a", 7.0}}).at("a"), 100.0);
  EXPECT_THROW(relative_importance({{"a", 0.0}, {"b", 0.0}}), ModelError);
}

TEST(RelativeImportance, ScaleInvariantAndClamped) {
  const std::map<std::string, double> raw{{"a", 3.3}, {"b", 0.7}, {"c", 12.0}};
  std::map<std::string, double> scaled;
  for (const auto& [k, v] : raw) scaled[k] = v * 1234.5;
  const auto w1 = relative_importance(raw), w2 = relative_importance(scaled);
  for (const auto& [k, v] : w1) EXPECT_NEAR(v, w2.at(k), 1e-9);
  const auto clamped = relative_importance({{"a", -1.0}, {"b", 3.0}});
  EXPECT_EQ(clamped.at("a"), 0.0);
  EXPECT_DOUBLE_EQ(clamped.at("b"), 100.0);
}

TEST(ImportanceTable, InvariantsEnforced) {
  EXPECT_THROW(ImportanceTable({{"a", "t", 60}, {"b", "t", 30}}), DataError);
  EXPECT_THROW(ImportanceTable({{"a", "t", 100}, {"a", "t", 0}}), DataError);
  EXPECT_THROW(ImportanceTable({{"a", "t", 110}, {"b", "t", -10}}), DataError);
  const ImportanceTable t({{"b", "t", 40}, {"a", "t", 60}});
  EXPECT_EQ(t.rows().front().predictor, "a");
  EXPECT_EQ(t.weight("b", "t"), 40.0);
  EXPECT_FALSE(t.weight("c", "t").has_value());
}

TEST(ImportanceTable, SingleModelSinglePredictor) {
  const auto t = build_importance_table({{"Y", {{"X", 2.5}}}});
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.rows()[0].weight, 100.0);
}

TEST(ImportanceTable, SharedPredictorsKeyedByPair) {
  const auto t = build_importance_table({{"Y1", {{"X", 1.0}, {"Z", 3.0}}}, {"Y2", {{"X", 1.0}, {"Z", 1.0}}}});
  EXPECT_EQ(t.size(), 4u);
  EXPECT_DOUBLE_EQ(*t.weight("X", "Y1"), 25.0);
  EXPECT_DOUBLE_EQ(*t.weight("X", "Y2"), 50.0);
}

TEST(ImportanceTable, CsvRoundTrip) {
  const ImportanceTable t({{"a", "t", 100.0 / 3.0}, {"b", "t", 200.0 / 3.0}});
  const auto csv = to_csv(t);
  const ImportanceTable back(read_weight_rows(csv));
  EXPECT_EQ(back.rows().size(), 2u);
  EXPECT_EQ(*back.weight("a", "t"), *t.weight("a", "t"));
  EXPECT_EQ(to_csv(t, 2), "predictor,target,weight\na,t,33.33\nb,t,66.67\n");
  EXPECT_THROW(read_weight_rows("predictor,target\na,b\n"), DataError);
}

TEST(AggregateFactors, ReferenceBehaviouralIntentionColumn) {
  const auto schema = test::sav_schema();
  // Item-level split of the reference BI factor weights across a few items.
  const std::vector<WeightRow> rows{{"A1", "BI4", 30.00}, {"A3", "BI4", 31.94}, {"PR2", "BI4", 6.85},
                                    {"PR7", "BI4", 5.00}, {"PU1", "BI4", 9.54}, {"T5", "BI4", 8.60},
                                    {"PEOU2", "BI4", 7.75}, {"PO", "BI4", 0.32}};
  const ImportanceTable items(rows, 1e-9);
  const auto f = aggregate_factors(items, schema);
  EXPECT_EQ(f.targets(), std::vector<std::string>{"BI"});
  EXPECT_NEAR(*f.weight("A", "BI"), 61.94, 1e-9);
  EXPECT_NEAR(*f.weight("PR", "BI"), 11.85, 1e-9);
  EXPECT_NEAR(*f.weight("PO", "BI"), 0.32, 1e-9);
  EXPECT_NEAR(f.total("BI"), 100.0, 1e-9);
}

TEST(AggregateFactors, SingleFactorAndOrphans) {
  const auto schema = test::sav_schema();
  const ImportanceTable t({{"T1", "T7", 70}, {"T2", "T7", 30}});
  const auto f = aggregate_factors(t, schema);
  EXPECT_EQ(f.size(), 1u);
  EXPECT_EQ(*f.weight("T", "T"), 100.0);
  const ImportanceTable orphan({{"Q1", "T7", 100}});
  EXPECT_THROW(aggregate_factors(orphan, schema), DataError);
}

TEST(ModelSpecs, ExternalAndInternalFamilies) {
  const auto schema = test::sav_schema();
  const auto ext = model_specs(schema, ModelClass::External);
  ASSERT_EQ(ext.size(), 6u);
  std::size_t rows = 0;
  for (const auto& s : ext) rows += s.predictors.size();
  EXPECT_EQ(rows, 146u);
  const auto in = model_specs(schema, ModelClass::Internal);
  ASSERT_EQ(in.size(), 6u);
  EXPECT_EQ(in[0].target, "PR8");
  EXPECT_EQ(in[0].predictors.size(), 7u);
}

class FittedTables : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    schema_ = new ConstructSchema(test::sav_schema());
    data_ = new Dataset(generate_synthetic(SyntheticSpec{}, *schema_, 51));
  }
  static void TearDownTestSuite() {
    delete schema_;
    delete data_;
  }
  static ConstructSchema* schema_;
  static Dataset* data_;
};
ConstructSchema* FittedTables::schema_ = nullptr;
Dataset* FittedTables::data_ = nullptr;

TEST_F(FittedTables, ExternalTableHas146Rows) {
  ForestConfig cfg;
  cfg.n_trees = 30;
  cfg.seed = 5;
  const auto models = fit_models(*data_, model_specs(*schema_, ModelClass::External), cfg);
  const auto t = build_importance_table(models);
  EXPECT_EQ(t.size(), 146u);
  EXPECT_EQ(t.targets().size(), 6u);
  expect_sums_to_100(t);
  const auto f = aggregate_factors(t, *schema_);
  expect_sums_to_100(f);
  std::set<std::string> preds;
  for (const auto& r : f.rows()) preds.insert(r.predictor);
  EXPECT_EQ(preds.size(), 6u);  // five construct factors + PO per target (BI never predicts)
  EXPECT_EQ(preds.count("BI"), 0u);
}

TEST_F(FittedTables, SegmentsBuildAndAreDeterministic) {
  const auto labeled = label_adoption(*data_, "BI4");
  ForestConfig cfg;
  cfg.n_trees = 20;
  SegmentOptions opts;
  const auto s1 = segment_importance(labeled, *schema_, cfg, 8, opts);
  EXPECT_GT(s1.n_adopter, s1.n_non_adopter);
  EXPECT_GE(s1.n_non_adopter, 20u);
  expect_sums_to_100(s1.adopter);
  expect_sums_to_100(s1.non_adopter);
  opts.workers = 4;
  const auto s2 = segment_importance(labeled, *schema_, cfg, 8, opts);
  EXPECT_EQ(to_csv(s1.adopter), to_csv(s2.adopter));
  EXPECT_EQ(to_csv(s1.non_adopter), to_csv(s2.non_adopter));
}

TEST_F(FittedTables, AllAdoptersFailsCleanly) {
  std::vector<std::optional<Adoption>> labels(static_cast<std::size_t>(data_->rows()), Adoption::Adopter);
  const auto all = data_->with_adoption(labels);
  ForestConfig cfg;
  cfg.n_trees = 5;
  EXPECT_THROW(segment_importance(all, *schema_, cfg, 1), DataError);
}
