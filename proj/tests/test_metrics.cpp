#include <gtest/gtest.h>

#include <cmath>

#include "lbaug/metrics.hpp"

using namespace lbaug;

namespace {

// 4 examples, 2 labels. Predictions at 0.5: [1,0] [1,1] [0,1] [0,0].
PredictionSet fixture() {
    PredictionSet p;
    p.n = 4;
    p.num_labels = 2;
    p.scores = {0.9, 0.2, 0.6, 0.7, 0.3, 0.8, 0.1, 0.4};
    p.targets = {1, 0, 0, 1, 1, 1, 0, 0};
    return p;
}

}  // namespace

TEST(Metrics, MeanAccuracyHandValue) {
    const auto m = mean_accuracy(fixture());
    EXPECT_EQ(m.per_label[0], 0.5);
    EXPECT_EQ(m.per_label[1], 1.0);
    EXPECT_EQ(m.mA, 0.75);
    EXPECT_TRUE(m.excluded.empty());
}

TEST(Metrics, ExampleBasedHandValues) {
    const auto e = example_accu_f1(fixture());
    EXPECT_EQ(e.accu, 0.75);
    EXPECT_DOUBLE_EQ(e.f1, 5.0 / 6.0);
}

TEST(Metrics, RankBasedHandValues) {
    const auto r = map_cf1_of1(fixture());
    EXPECT_DOUBLE_EQ(r.ap[0], 5.0 / 6.0);
    EXPECT_EQ(r.ap[1], 1.0);
    EXPECT_DOUBLE_EQ(r.mAP, 11.0 / 12.0);
    EXPECT_EQ(r.label_f1[0], 0.5);
    EXPECT_EQ(r.CF1, 0.75);
    EXPECT_EQ(r.OF1, 0.75);
}

TEST(Metrics, AveragePrecisionFiveSixths) {
    EXPECT_DOUBLE_EQ(average_precision({0.9, 0.5, 0.1}, {1, 0, 1}), 5.0 / 6.0);
    EXPECT_EQ(average_precision({0.9, 0.5, 0.1}, {1, 1, 0}), 1.0);
    EXPECT_TRUE(std::isnan(average_precision({0.2, 0.1}, {0, 0})));
    // Equal scores keep example order.
    EXPECT_EQ(average_precision({0.5, 0.5}, {1, 0}), 1.0);
    EXPECT_EQ(average_precision({0.5, 0.5}, {0, 1}), 0.5);
}

TEST(Metrics, PerfectPredictionsScoreOne) {
    PredictionSet p;
    p.n = 3;
    p.num_labels = 2;
    p.scores = {1, 0, 0, 1, 1, 1};
    p.targets = {1, 0, 0, 1, 1, 1};
    const auto r = evaluate(p);
    EXPECT_EQ(r.mA, 1.0);
    EXPECT_EQ(r.accu, 1.0);
    EXPECT_EQ(r.f1, 1.0);
    EXPECT_EQ(r.mAP, 1.0);
    EXPECT_EQ(r.CF1, 1.0);
    EXPECT_EQ(r.OF1, 1.0);
}

TEST(Metrics, DegenerateLabelsAreExcludedFromMeanAccuracy) {
    PredictionSet p;
    p.n = 2;
    p.num_labels = 2;
    p.scores = {0.9, 0.9, 0.1, 0.9};
    p.targets = {1, 1, 0, 1};  // label 1 has no negatives
    const auto m = mean_accuracy(p);
    ASSERT_EQ(m.excluded, std::vector<int>{1});
    EXPECT_EQ(m.mA, 1.0);
    p.targets = {1, 1, 1, 1};
    EXPECT_THROW(mean_accuracy(p), MetricError);
}

TEST(Metrics, EmptyPredictionAndTargetCountAsPerfect) {
    PredictionSet p;
    p.n = 1;
    p.num_labels = 3;
    p.scores = {0.1, 0.2, 0.3};
    p.targets = {0, 0, 0};
    const auto e = example_accu_f1(p);
    EXPECT_EQ(e.accu, 1.0);
    EXPECT_EQ(e.f1, 1.0);
}

TEST(Metrics, ValidationRejectsBadShapes) {
    auto p = fixture();
    p.scores.pop_back();
    EXPECT_THROW(evaluate(p), MetricError);
    p = fixture();
    p.scores[0] = std::nan("");
    EXPECT_THROW(evaluate(p), MetricError);
}

TEST(Metrics, VerdictThreshold) {
    EXPECT_EQ(classify_delta(0.006, 0.005), Verdict::positive);
    EXPECT_EQ(classify_delta(0.005, 0.005), Verdict::neutral);
    EXPECT_EQ(classify_delta(-0.006, 0.005), Verdict::negative);
}

TEST(Metrics, LabelStudyTable) {
    const auto base = fixture();
    auto better = base;
    better.scores[4] = 0.7;  // example 2 label 0 now predicted
    auto worse = base;
    worse.scores[3] = 0.1;  // example 1 label 1 now missed
    const auto t = label_study(base, {{OpId::Contrast, better}, {OpId::Invert, worse}}, 0.005);
    ASSERT_EQ(t.cells.size(), 4u);
    EXPECT_EQ(t.at(OpId::Contrast, 0).verdict, Verdict::positive);
    EXPECT_DOUBLE_EQ(t.at(OpId::Contrast, 0).delta, 0.25);
    EXPECT_EQ(t.at(OpId::Contrast, 1).verdict, Verdict::neutral);
    EXPECT_EQ(t.at(OpId::Invert, 1).verdict, Verdict::negative);
    const auto csv = study_to_csv(t, {"a", "b"});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "operator,label,delta,verdict");
    EXPECT_NE(csv.find("Contrast,a,0.25,P"), std::string::npos);
    auto other = base;
    other.targets[0] = 0;
    EXPECT_THROW(label_study(base, {{OpId::Color, other}}, 0.005), MetricError);
}

TEST(Metrics, JsonReportCarriesAllMetrics) {
    const auto j = report_to_json(evaluate(fixture()), {"a", "b"});
    for (const char* k : {"mA", "Accu", "F1", "mAP", "CF1", "OF1"}) EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(j["per_label"]["b"]["mA"].get<double>(), 1.0);
}
