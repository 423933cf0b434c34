#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gridsense/feature_matrix.hpp"
#include "gridsense/learners.hpp"

namespace gridsense {

struct SmoteOptions {
    int k = 5;
    std::uint64_t seed = 0;
    /// Desired rows per class; defaults to the largest class count for every
    /// class present.
    std::optional<std::vector<std::size_t>> target;
};

/// Oversamples minority classes by interpolating between a row and one of its
/// k nearest same-class neighbours. Original rows come first, unchanged.
FeatureMatrix smote(const FeatureMatrix& matrix, const SmoteOptions& options = {});

struct EliminationStep {
    std::string name;
    int iteration = 0;
};

struct SelectionResult {
    std::vector<std::string> names;  // ranked, best first
    std::vector<double> scores;      // aligned with names, sum 1
    std::vector<EliminationStep> history;
    std::uint64_t seed = 0;
    LearnerConfig learner;
    double step_frac = 0.1;

    nlohmann::json to_json() const;
    static SelectionResult from_json(const nlohmann::json& j);
};

/// Recursive feature elimination down to `target_k` columns. Each round drops
/// max(1, floor(surviving * step_frac)) lowest-importance columns (ties: the
/// lexicographically larger name goes first).
SelectionResult rfe(const FeatureMatrix& matrix, const LearnerConfig& learner, std::size_t target_k,
                    double step_frac = 0.1, std::uint64_t seed = 0);

/// Top-k (name, score) by score descending, ties by name ascending.
std::vector<std::pair<std::string, double>> report_top_features(const SelectionResult& result, std::size_t k);

/// Two-column text table of report_top_features.
std::string format_top_features(const SelectionResult& result, std::size_t k);

}  // namespace gridsense
