#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridsense/feature_matrix.hpp"
#include "gridsense/learners.hpp"

namespace gridsense {

struct FoldPlan {
    int k = 10;
    std::uint64_t seed = 0;
    std::vector<int> fold_of;                        // per row
    std::vector<std::vector<std::size_t>> class_counts;  // [fold][class]

    std::vector<std::size_t> test_rows(int fold) const;
    std::vector<std::size_t> train_rows(int fold) const;
};

/// Rows of each class are shuffled (seeded per class) and dealt round-robin
/// to the folds. Every class present must have at least k rows.
FoldPlan stratified_kfold(std::span<const int> labels, int k = 10, std::uint64_t seed = 0);

struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<std::size_t>> counts;  // [true][predicted]
    std::vector<std::vector<double>> row_normalized;
    std::vector<bool> empty_rows;

    std::size_t total() const;
    nlohmann::json to_json() const;
    static ConfusionMatrix from_json(const nlohmann::json& j);
};

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 const std::vector<std::string>& classes = {"Nor", "Pre", "Post"});
ConfusionMatrix confusion_matrix(const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred,
                                 const std::vector<std::string>& classes);

enum class Averaging { Macro, Weighted };

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// From integer counts.
Metrics metrics_from_confusion(const std::vector<std::vector<std::size_t>>& counts,
                               Averaging averaging = Averaging::Macro);
/// From real-valued (e.g. row-normalized) weights.
Metrics metrics_from_confusion(const std::vector<std::vector<double>>& weights, Averaging averaging = Averaging::Macro);
Metrics metrics_from_confusion(const ConfusionMatrix& cm, Averaging averaging = Averaging::Macro);

nlohmann::json to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);

/// Where scaling or SMOTE is fitted: inside each training fold, once on the
/// whole matrix before folding, or not at all.
enum class StageMode { PerFold, Global, Off };

std::string_view to_string(StageMode m);
StageMode parse_stage_mode(std::string_view s);

struct EvalConfig {
    LearnerConfig learner;
    int k = 10;
    std::uint64_t seed = 0;
    int smote_k = 5;
    StageMode balance = StageMode::PerFold;
    StageMode scaling = StageMode::PerFold;
    Averaging averaging = Averaging::Macro;
    std::vector<std::string> classes{"Nor", "Pre", "Post"};
    int threads = 1;

    nlohmann::json to_json() const;
};

struct FoldResult {
    Metrics metrics;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t synthetic_train = 0;
    std::size_t synthetic_test = 0;
};

struct EvalReport {
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::vector<FoldResult> folds;
    Metrics mean;
    Metrics std;  // n - 1 denominator
    ConfusionMatrix confusion;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

/// Mean and sample standard deviation of each metric across folds.
void aggregate_folds(EvalReport& report);

EvalReport cross_validate(const FeatureMatrix& matrix, const EvalConfig& config);

/// Single stratified train/test split with `test_frac` of each class held out.
EvalReport holdout(const FeatureMatrix& matrix, const EvalConfig& config, double test_frac = 0.1);

}  // namespace gridsense
