#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "gridsense/common.hpp"
#include "gridsense/pipeline.hpp"

namespace gridsense {

/// Stage failure with the process exit code to report (2: validation or
/// missing artifact, 3: runtime).
class StageError : public Error {
public:
    StageError(int code, const std::string& what) : Error(what), code_(code) {}
    int exit_code() const { return code_; }

private:
    int code_;
};

namespace artifact {
inline constexpr const char* kSegments = "segments.json";
inline constexpr const char* kDropped = "dropped.json";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kSchema = "schema.json";
inline constexpr const char* kSelection = "selection.json";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kHoldout = "holdout.json";
inline constexpr const char* kCompare = "compare.json";
inline constexpr const char* kSvg = "report.svg";
}  // namespace artifact

/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Exclusive per-workdir lock held for the lifetime of the object.
class WorkdirLock {
public:
    explicit WorkdirLock(const std::filesystem::path& workdir);
    ~WorkdirLock();
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    std::filesystem::path path_;
};

struct StageContext {
    PipelineConfig config;
    std::ostream* log = nullptr;

    std::filesystem::path workdir() const { return config.workdir; }
    std::filesystem::path in_workdir(const std::string& name) const { return config.workdir / name; }
    /// Relative input paths are resolved against the workdir.
    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

void run_synth(const StageContext& ctx, const std::optional<std::filesystem::path>& out_dir = {});
void run_ingest(const StageContext& ctx);
void run_extract(const StageContext& ctx, const std::optional<std::filesystem::path>& schema_out = {});
void run_select(const StageContext& ctx);
void run_train(const StageContext& ctx);
void run_evaluate(const StageContext& ctx, const std::optional<double>& holdout_frac = {});
void run_compare_scales(const StageContext& ctx);
void run_report(const StageContext& ctx, std::size_t top_k = 20);

}  // namespace gridsense
