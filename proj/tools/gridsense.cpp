#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridsense/stages.hpp"

namespace fs = std::filesystem;
using namespace gridsense;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct GlobalOptions {
    std::string config;
    std::string workdir;
    std::optional<std::uint64_t> seed;
    bool paper_compat = false;
    std::optional<int> threads;
    bool lenient = false;
};

void print_violations(const ValidationResult& r) {
    for (const auto& v : r.violations) std::cerr << "error: " << (v.path.empty() ? "/" : v.path) << ": " << v.message << "\n";
    for (const auto& w : r.warnings) std::cerr << "warning: " << w.path << ": " << w.message << "\n";
}

PipelineConfig resolve_config(const GlobalOptions& g) {
    PipelineConfig c;
    if (!g.config.empty()) {
        const auto r = validate_config_file(g.config, g.lenient);
        print_violations(r);
        if (!r.ok()) throw StageError(kExitValidation, "invalid configuration " + g.config);
        std::ifstream in(g.config);
        c = PipelineConfig::from_json(nlohmann::json::parse(in));
    }
    if (g.lenient) c.strict = false;
    if (!g.workdir.empty()) {
        c.workdir = g.workdir;
    } else if (const char* env = std::getenv("GRIDSENSE_WORKDIR"); env && *env) {
        c.workdir = env;
    }
    if (g.seed) {
        c.seed = *g.seed;
        c.scenario.seed = *g.seed;
    }
    if (g.paper_compat) c.paper_compat = true;
    if (g.threads) c.threads = *g.threads;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-scale PMU failure-prediction pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--config", g.config, "Pipeline configuration (JSON)");
    app.add_option("--workdir", g.workdir, "Artifact directory (default: $GRIDSENSE_WORKDIR or paths.workdir)");
    app.add_option("--seed", g.seed, "Master seed for generation, selection and evaluation");
    app.add_flag("--paper-compat", g.paper_compat, "Fit scaling and SMOTE on all rows before folding");
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("--lenient", g.lenient, "Downgrade target_k range violations to warnings");

    std::optional<std::string> synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario (CSV data, event log, truth.json)");
    synth->add_option("--out", synth_out, "Output directory (default: directory of paths.data in the workdir)");

    auto* ingest = app.add_subcommand("ingest", "Load CSVs, segment around events, reject outliers");

    std::optional<std::string> schema_out;
    auto* extract = app.add_subcommand("extract", "Compute the multi-scale feature matrix");
    extract->add_option("--schema", schema_out, "Also write the active feature schema to this file");

    auto* select = app.add_subcommand("select", "Recursive feature elimination");
    auto* train = app.add_subcommand("train", "Fit the configured learner on all rows");

    std::optional<double> holdout_frac;
    auto* evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
    evaluate->add_option("--holdout", holdout_frac, "Single stratified split with this test fraction instead")
        ->check(CLI::Range(0.0, 1.0));

    auto* compare = app.add_subcommand("compare-scales", "Evaluate each window scale against the combined set");

    std::size_t top_k = 20;
    auto* report = app.add_subcommand("report", "Render report.svg from report.json");
    report->add_option("--top", top_k, "Importance bars to draw");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a configuration file");
    validate->add_option("path", validate_path, "Configuration file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    try {
        if (validate->parsed()) {
            const auto r = validate_config_file(validate_path, g.lenient);
            print_violations(r);
            if (!r.ok()) return kExitValidation;
            std::cout << "ok\n";
            return 0;
        }

        StageContext ctx;
        ctx.config = resolve_config(g);
        ctx.log = &std::cerr;
        WorkdirLock lock(ctx.config.workdir);
        if (synth->parsed()) run_synth(ctx, synth_out ? std::optional<fs::path>(*synth_out) : std::nullopt);
        else if (ingest->parsed()) run_ingest(ctx);
        else if (extract->parsed()) run_extract(ctx, schema_out ? std::optional<fs::path>(*schema_out) : std::nullopt);
        else if (select->parsed()) run_select(ctx);
        else if (train->parsed()) run_train(ctx);
        else if (evaluate->parsed()) run_evaluate(ctx, holdout_frac);
        else if (compare->parsed()) run_compare_scales(ctx);
        else if (report->parsed()) run_report(ctx, top_k);
        return 0;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
