#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridsense/balance.hpp"
#include "gridsense/evaluation.hpp"
#include "gridsense/features.hpp"
#include "gridsense/learners.hpp"
#include "gridsense/signal.hpp"
#include "gridsense/synthgen.hpp"

namespace gridsense {

struct SelectionConfig {
    std::string method = "rfe";
    int target_k = 20;
    double step = 0.1;
    /// Learner used inside the elimination loop (lighter than the final one).
    LearnerConfig learner = default_selection_learner();

    static LearnerConfig default_selection_learner();
};

struct PipelineConfig {
    std::filesystem::path data_path = "data/channels.csv";
    std::filesystem::path log_path = "data/events.csv";
    std::filesystem::path workdir = "work";

    ScenarioConfig scenario = default_scenario();
    SegmentationOptions segmentation;
    double outlier_k = 3.0;
    WindowSpec windows;
    FeatureParams feature_params;
    std::vector<std::string> feature_exclude;
    SelectionConfig selection;
    int smote_k = 5;
    StageMode balance = StageMode::PerFold;
    StageMode scaling = StageMode::PerFold;
    LearnerConfig learner;
    int eval_k = 10;
    std::uint64_t seed = 0;
    Averaging averaging = Averaging::Macro;
    bool paper_compat = false;
    bool strict = true;
    int threads = 1;

    nlohmann::json to_json() const;
    /// Applies the values present in `j` over the defaults. Call
    /// validate_config first to reject malformed documents.
    static PipelineConfig from_json(const nlohmann::json& j);

    EvalConfig eval_config() const;
    FeatureSchema schema() const;
};

struct Violation {
    std::string path;  // JSON pointer, "" for the document
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;
    std::vector<Violation> warnings;
    bool ok() const { return violations.empty(); }
};

/// Checks structure (unknown keys, types) and value ranges. In lenient mode
/// target_k outside {10, 15, 20} is a warning instead of a violation.
ValidationResult validate_config(const nlohmann::json& j, bool lenient = false);
ValidationResult validate_config_file(const std::filesystem::path& path, bool lenient = false);

/// Column names belonging to the given window sizes (by `__w` suffix), in
/// matrix order.
std::vector<std::string> columns_for_scales(const std::vector<std::string>& columns, const std::vector<double>& sizes_s);

struct ScaleCase {
    std::string name;
    std::vector<double> sizes_s;
    SelectionResult selection;
    EvalReport report;
};

struct ScaleComparison {
    std::uint64_t seed = 0;
    std::vector<ScaleCase> cases;

    nlohmann::json to_json(const nlohmann::json& config) const;
};

/// Selection plus cross-validation on the columns of one set of scales.
ScaleCase evaluate_scales(const FeatureMatrix& multiscale, const std::vector<double>& sizes_s,
                          const SelectionConfig& selection, const EvalConfig& eval);

/// One case per single scale followed by the combined case, all with the
/// same seeds.
ScaleComparison compare_scales(const FeatureMatrix& multiscale, const WindowSpec& spec,
                               const SelectionConfig& selection, const EvalConfig& eval);

/// Segments (outliers removed) and their multi-scale feature matrix.
struct ExtractedData {
    std::vector<Segment> segments;
    std::vector<DroppedSegment> dropped;
    std::vector<std::string> warnings;
    FeatureMatrix features;
};

ExtractedData extract_from_channels(const ChannelSet& channels, const DisturbanceLog& log, const PipelineConfig& config);

/// Confusion heatmap plus top-k importance bars.
std::string render_report_svg(const EvalReport& report, const SelectionResult* selection, std::size_t top_k = 20);

}  // namespace gridsense
