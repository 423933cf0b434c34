#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gridsense/evaluation.hpp"
#include "test_util.hpp"

using namespace gridsense;

namespace {

std::vector<int> labels_with_counts(const std::vector<std::size_t>& counts) {
    std::vector<int> y;
    for (std::size_t c = 0; c < counts.size(); ++c) y.insert(y.end(), counts[c], static_cast<int>(c));
    return y;
}

EvalConfig quick_config(int k = 5) {
    EvalConfig c;
    c.k = k;
    c.seed = 3;
    c.learner.gbdt.n_iterations = 20;
    c.learner.gbdt.min_data_in_leaf = 3;
    c.learner.gbdt.num_leaves = 8;
    c.smote_k = 3;
    return c;
}

}  // namespace

TEST(StratifiedKFold, UnevenFoldSizes) {
    const auto y = labels_with_counts({495, 495, 495});
    const auto plan = stratified_kfold(y, 10, 1);
    int folds_49 = 0, folds_50 = 0;
    for (int f = 0; f < 10; ++f) {
        for (int c = 0; c < 3; ++c) {
            const auto n = plan.class_counts[static_cast<std::size_t>(f)][static_cast<std::size_t>(c)];
            EXPECT_TRUE(n == 49 || n == 50);
            (n == 49 ? folds_49 : folds_50)++;
        }
    }
    EXPECT_EQ(folds_49, 15);
    EXPECT_EQ(folds_50, 15);
}

TEST(StratifiedKFold, ExactDivisionAndErrors) {
    const auto plan = stratified_kfold(labels_with_counts({10}), 10, 0);
    for (int f = 0; f < 10; ++f) EXPECT_EQ(plan.test_rows(f).size(), 1u);
    try {
        stratified_kfold(labels_with_counts({20, 9}), 10, 0);
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
    }
}

TEST(StratifiedKFold, CoversEveryRowOnce) {
    const auto y = labels_with_counts({37, 12, 15});
    const auto plan = stratified_kfold(y, 6, 7);
    std::vector<int> seen(y.size(), 0);
    for (int f = 0; f < 6; ++f) {
        const auto test = plan.test_rows(f);
        const auto train = plan.train_rows(f);
        EXPECT_EQ(test.size() + train.size(), y.size());
        for (auto r : test) ++seen[r];
        // Per-class fold sizes differ by at most one.
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    for (std::size_t c = 0; c < 3; ++c) {
        std::size_t lo = SIZE_MAX, hi = 0;
        for (int f = 0; f < 6; ++f) {
            lo = std::min(lo, plan.class_counts[static_cast<std::size_t>(f)][c]);
            hi = std::max(hi, plan.class_counts[static_cast<std::size_t>(f)][c]);
        }
        EXPECT_LE(hi - lo, 1u);
    }
    EXPECT_EQ(stratified_kfold(y, 6, 7).fold_of, plan.fold_of);
    EXPECT_NE(stratified_kfold(y, 6, 8).fold_of, plan.fold_of);
}

TEST(Confusion, Examples) {
    const std::vector<int> perfect{0, 1, 2, 2, 1, 0};
    const auto id = confusion_matrix(perfect, perfect);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(id.row_normalized[i][j], i == j ? 1.0 : 0.0);
    }
    const auto cm = confusion_matrix(std::vector<std::string>{"A", "A", "B"}, std::vector<std::string>{"A", "B", "B"},
                                     {"A", "B"});
    EXPECT_EQ(cm.counts, (std::vector<std::vector<std::size_t>>{{1, 1}, {0, 1}}));
    const auto one = confusion_matrix(std::vector<int>{0, 1, 2, 1}, std::vector<int>{1, 1, 1, 1});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(one.row_normalized[i][1], 1.0);
    EXPECT_THROW(confusion_matrix(std::vector<std::string>{"A"}, std::vector<std::string>{"C"}, {"A", "B"}),
                 PreconditionError);
    const auto empty_row = confusion_matrix(std::vector<int>{0, 0}, std::vector<int>{0, 1});
    EXPECT_TRUE(empty_row.empty_rows[2]);
    EXPECT_EQ(empty_row.row_normalized[2], (std::vector<double>{0, 0, 0}));
}

TEST(Metrics, HandComputedTwoClass) {
    const auto m = metrics_from_confusion(std::vector<std::vector<std::size_t>>{{8, 2}, {3, 7}});
    EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
    const double pa = 8.0 / 11, ra = 0.8, pb = 7.0 / 9, rb = 0.7;
    EXPECT_NEAR(m.precision, (pa + pb) / 2, 1e-15);
    EXPECT_NEAR(m.recall, (ra + rb) / 2, 1e-15);
    EXPECT_NEAR(m.f1, (2 * pa * ra / (pa + ra) + 2 * pb * rb / (pb + rb)) / 2, 1e-15);
    const auto w = metrics_from_confusion(std::vector<std::vector<std::size_t>>{{8, 2}, {3, 7}}, Averaging::Weighted);
    EXPECT_NEAR(w.recall, 0.75, 1e-15);  // equal supports
}

TEST(Metrics, IdentityAndDegenerate) {
    const auto m = metrics_from_confusion(std::vector<std::vector<std::size_t>>{{5, 0, 0}, {0, 3, 0}, {0, 0, 9}});
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.precision, 1.0);
    EXPECT_EQ(m.recall, 1.0);
    EXPECT_EQ(m.f1, 1.0);
    const auto z = metrics_from_confusion(std::vector<std::vector<std::size_t>>{{0, 4}, {0, 0}});
    EXPECT_EQ(z.precision, 0.0);
    EXPECT_EQ(z.f1, 0.0);
    EXPECT_THROW(metrics_from_confusion(std::vector<std::vector<std::size_t>>{}), PreconditionError);
}

TEST(Metrics, PublishedConfusionRecall) {
    // Row-normalized confusion matrix of the best reported model, in percent.
    const std::vector<std::vector<double>> table{
        {90.71, 4.44, 4.85},
        {3.43, 89.70, 6.87},
        {5.25, 6.67, 88.08},
    };
    std::vector<std::vector<double>> rows = table;
    for (auto& r : rows) {
        for (auto& v : r) v /= 100.0;
    }
    EXPECT_NEAR(metrics_from_confusion(rows).recall, 0.8950, 0.0005);
}

TEST(Metrics, AccuracyAndRecallIdentities) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> yt, yp;
        for (int i = 0; i < 60; ++i) {
            yt.push_back(static_cast<int>(rng.below(3)));
            yp.push_back(rng.uniform() < 0.6 ? yt.back() : static_cast<int>(rng.below(3)));
        }
        if (std::set<int>(yt.begin(), yt.end()).size() < 3) continue;
        const auto cm = confusion_matrix(yt, yp);
        const auto m = metrics_from_confusion(cm);
        double direct = 0;
        for (std::size_t i = 0; i < yt.size(); ++i) direct += yt[i] == yp[i];
        EXPECT_NEAR(m.accuracy, direct / yt.size(), 1e-12);
        double diag = 0;
        for (std::size_t i = 0; i < 3; ++i) diag += cm.row_normalized[i][i] / 3;
        EXPECT_NEAR(m.recall, diag, 1e-12);
        for (const auto& r : cm.row_normalized) EXPECT_NEAR(r[0] + r[1] + r[2], 1.0, 1e-9);
    }
}

TEST(StageModes, RoundTrip) {
    for (auto m : {StageMode::PerFold, StageMode::Global, StageMode::Off}) EXPECT_EQ(parse_stage_mode(to_string(m)), m);
    EXPECT_THROW(parse_stage_mode("sometimes"), PreconditionError);
}

TEST(CrossValidate, StructureAndNoSyntheticInTestFolds) {
    const auto m = testutil::planted(30, 2, 6, 21, 0.5);
    // Unbalance the classes so SMOTE has work to do.
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        if (m.labels()[r] == 0 || r % 3 == 0) keep.push_back(r);
    }
    const auto data = m.select_rows(keep);
    const auto report = cross_validate(data, quick_config(5));
    ASSERT_EQ(report.folds.size(), 5u);
    std::size_t tested = 0;
    for (const auto& f : report.folds) {
        EXPECT_EQ(f.synthetic_test, 0u);
        EXPECT_GT(f.synthetic_train, 0u);
        tested += f.test_rows;
        EXPECT_TRUE(std::isfinite(f.metrics.f1));
    }
    EXPECT_EQ(tested, data.rows());
    EXPECT_EQ(report.confusion.total(), data.rows());
    EXPECT_GT(report.mean.accuracy, 0.8);
}

TEST(CrossValidate, StdUsesSampleDenominator) {
    EvalReport r;
    for (double a : {0.5, 0.7, 0.9}) {
        FoldResult f;
        f.metrics = {a, a, a, a};
        r.folds.push_back(f);
    }
    aggregate_folds(r);
    EXPECT_NEAR(r.mean.accuracy, 0.7, 1e-15);
    EXPECT_NEAR(r.std.accuracy, 0.2, 1e-15);
}

TEST(CrossValidate, DeterministicAndRoundTrips) {
    const auto m = testutil::planted(15, 2, 5, 22, 0.8);
    const auto a = cross_validate(m, quick_config(3));
    const auto b = cross_validate(m, quick_config(3));
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    const auto j = a.to_json();
    for (const char* f : {"config", "seed", "folds", "mean", "std", "confusion"}) EXPECT_TRUE(j.contains(f)) << f;
    EXPECT_EQ(EvalReport::from_json(j).to_json(), j);
}

TEST(CrossValidate, GlobalModeAndFoldContext) {
    const auto m = testutil::planted(15, 2, 5, 23, 0.8);
    auto c = quick_config(3);
    c.balance = StageMode::Global;
    c.scaling = StageMode::Global;
    EXPECT_EQ(cross_validate(m, c).folds.size(), 3u);
    auto bad = quick_config(3);
    bad.learner.gbdt.min_data_in_leaf = 1000;
    try {
        cross_validate(m, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("fold 0"), std::string::npos) << e.what();
    }
}

TEST(CrossValidate, ShuffledLabelsNearChance) {
    double acc = 0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        auto m = testutil::planted(20, 0, 6, 400 + s);
        Rng rng(s);
        for (auto& y : m.labels()) y = static_cast<int>(rng.below(3));
        auto c = quick_config(4);
        c.seed = static_cast<std::uint64_t>(s);
        acc += cross_validate(m, c).mean.accuracy / seeds;
    }
    EXPECT_NEAR(acc, 1.0 / 3, 0.1);
}

TEST(Holdout, PerClassSplit) {
    const auto m = testutil::planted(30, 2, 5, 24, 0.5);
    const auto r = holdout(m, quick_config(), 0.1);
    ASSERT_EQ(r.folds.size(), 1u);
    EXPECT_EQ(r.folds[0].test_rows, 9u);
    EXPECT_EQ(r.folds[0].train_rows + r.folds[0].test_rows - r.folds[0].synthetic_train, m.rows());
    EXPECT_THROW(holdout(m, quick_config(), 0.0), PreconditionError);
}
