#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "gridsense/feature_matrix.hpp"

namespace gridsense {

/// Per-feature quantile bin edges. Bin b of feature f holds values in
/// (edges[f][b-1], edges[f][b]]; the last bin is unbounded above.
struct BinMapper {
    std::vector<std::vector<double>> edges;

    static BinMapper fit(const FeatureMatrix& matrix, int n_bins);

    std::size_t features() const { return edges.size(); }
    std::size_t bin_count(std::size_t feature) const { return edges[feature].size() + 1; }
    std::uint16_t bin(std::size_t feature, double value) const;
};

struct TreeNode {
    int feature = -1;  // -1 for leaves
    int bin = -1;      // split bin: bins <= bin go left
    double threshold = 0.0;  // value <= threshold goes left
    int left = -1;
    int right = -1;
    bool default_left = true;
    std::vector<double> value;  // leaf output: 1 entry for boosting, class distribution for forests
    double gain = 0.0;          // split gain (boosting) or weighted impurity decrease (forests)
    std::size_t count = 0;      // training rows (bootstrap draws for forests) reaching the node

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    const TreeNode& leaf_for(std::span<const double> row) const;
    std::size_t leaf_count() const;
    int depth() const;
};

enum class GrowthPolicy { LeafWise, LevelWise };
enum class LearnerKind { GbdtLeafWise, GbdtLevelWise, RandomForest };

std::string_view to_string(LearnerKind k);
LearnerKind parse_learner_kind(std::string_view s);

struct GbdtParams {
    int n_iterations = 200;
    double learning_rate = 0.1;
    int num_leaves = 31;  // leaf-wise only
    int max_depth = 6;    // level-wise only
    int min_data_in_leaf = 20;
    double lambda = 1.0;
    double gamma = 0.0;
    int n_bins = 64;
    GrowthPolicy growth = GrowthPolicy::LeafWise;
    double base_score = 0.0;

    void validate() const;
};

struct RfParams {
    int n_trees = 300;
    int max_depth = -1;  // -1: unlimited
    int min_samples_leaf = 1;
    int n_bins = 64;
    bool bootstrap = true;
    bool feature_sampling = true;  // ceil(sqrt(p)) candidate features per node
    int threads = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, const GbdtParams& p);
void from_json(const nlohmann::json& j, GbdtParams& p);
void to_json(nlohmann::json& j, const RfParams& p);
void from_json(const nlohmann::json& j, RfParams& p);

struct LearnerConfig {
    LearnerKind kind = LearnerKind::GbdtLeafWise;
    GbdtParams gbdt;
    RfParams rf;
};

void to_json(nlohmann::json& j, const LearnerConfig& c);
void from_json(const nlohmann::json& j, LearnerConfig& c);

struct GbdtModel {
    int n_classes = 0;
    GbdtParams params;
    std::vector<std::string> feature_names;
    BinMapper bins;
    std::vector<Tree> trees;  // iteration-major: trees[t * n_classes + k]
    std::uint64_t seed = 0;

    std::size_t iterations() const { return n_classes ? trees.size() / static_cast<std::size_t>(n_classes) : 0; }
    /// Raw per-class scores using the first `iterations` rounds (all when unset).
    std::vector<double> raw_scores(std::span<const double> row, std::optional<std::size_t> iterations = {}) const;
};

struct RfModel {
    int n_classes = 0;
    RfParams params;
    std::vector<std::string> feature_names;
    BinMapper bins;
    std::vector<Tree> trees;
    std::vector<std::uint64_t> tree_seeds;
    std::optional<double> oob_accuracy;
    std::uint64_t seed = 0;
};

using EnsembleModel = std::variant<GbdtModel, RfModel>;

// --- softmax objective --------------------------------------------------------

std::vector<double> softmax(std::span<const double> scores);
/// Cross-entropy -ln p_label of the softmax of `scores`.
double softmax_loss(std::span<const double> scores, int label);

struct GradPair {
    std::vector<double> grad;  // p_c - y_c
    std::vector<double> hess;  // p_c (1 - p_c)
};

GradPair softmax_gradients(std::span<const double> scores, int label);

// --- training -------------------------------------------------------------------

GbdtModel fit_gbdt(const FeatureMatrix& matrix, const GbdtParams& params, std::uint64_t seed);
RfModel fit_random_forest(const FeatureMatrix& matrix, const RfParams& params, std::uint64_t seed);
/// One unpruned Gini tree on all rows and all features.
Tree fit_decision_tree(const FeatureMatrix& matrix, const RfParams& params, const BinMapper& bins);

EnsembleModel fit_model(const FeatureMatrix& matrix, const LearnerConfig& config, std::uint64_t seed);

// --- inference ------------------------------------------------------------------

std::vector<double> predict_proba(const GbdtModel& model, std::span<const double> row);
std::vector<double> predict_proba(const RfModel& model, std::span<const double> row);
std::vector<double> predict_proba(const EnsembleModel& model, std::span<const double> row);
/// Class distribution of a single tree's leaf.
std::vector<double> predict_proba(const Tree& tree, std::span<const double> row);

int predict_class(const EnsembleModel& model, std::span<const double> row);
std::vector<int> predict_classes(const EnsembleModel& model, const FeatureMatrix& matrix);

/// Mean training log-loss of a boosted model after `iterations` rounds.
double training_loss(const GbdtModel& model, const FeatureMatrix& matrix, std::optional<std::size_t> iterations = {});

/// Scores aligned with the model's feature names: total split gain (boosting)
/// or size-weighted Gini decrease (forests), normalized to sum 1 when nonzero.
std::vector<double> feature_importance(const EnsembleModel& model);
std::vector<double> feature_importance(const GbdtModel& model);
std::vector<double> feature_importance(const RfModel& model);

const std::vector<std::string>& feature_names(const EnsembleModel& model);

// --- serialization --------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

std::string serialize(const EnsembleModel& model);
/// Throws VersionError for an unknown schema_version, FormatError otherwise.
EnsembleModel deserialize(std::string_view payload);

}  // namespace gridsense
