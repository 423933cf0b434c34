#include "gridsense/stages.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace gridsense {

namespace fs = std::filesystem;
using nlohmann::json;

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StageError(3, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw StageError(3, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StageError(2, "missing artifact: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

WorkdirLock::WorkdirLock(const fs::path& workdir) : path_(workdir / ".gridsense.lock") {
    fs::create_directories(workdir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            path_.clear();
            throw StageError(3, "workdir is locked by another stage (" + (workdir / ".gridsense.lock").string() +
                                    "); remove it if no stage is running");
        }
        path_.clear();
        throw StageError(3, "cannot create lockfile in " + workdir.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

WorkdirLock::~WorkdirLock() {
    if (!path_.empty()) {
        std::error_code ec;
        fs::remove(path_, ec);
    }
}

fs::path StageContext::resolve(const fs::path& p) const { return p.is_absolute() ? p : config.workdir / p; }

namespace {

std::ostream& log_of(const StageContext& ctx) { return ctx.log ? *ctx.log : std::clog; }

void require_artifact(const fs::path& p) {
    if (!fs::exists(p)) throw StageError(2, "missing artifact: " + p.string());
}

json read_json(const fs::path& p) {
    require_artifact(p);
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw StageError(3, p.string() + " is not valid JSON: " + e.what());
    }
}

FeatureMatrix load_features(const StageContext& ctx) {
    const auto path = ctx.in_workdir(artifact::kFeatures);
    require_artifact(path);
    std::ifstream in(path);
    return read_feature_csv(in);
}

SelectionResult load_selection(const StageContext& ctx) {
    return SelectionResult::from_json(read_json(ctx.in_workdir(artifact::kSelection)));
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

void run_synth(const StageContext& ctx, const std::optional<fs::path>& out_dir) {
    const fs::path dir = out_dir ? *out_dir : ctx.resolve(ctx.config.data_path).parent_path();
    const auto sc = generate(ctx.config.scenario, ctx.config.segmentation);
    std::ostringstream channels, log;
    write_channels_csv(channels, sc.channels);
    write_disturbance_log(log, sc.log);
    fs::path data = dir / ctx.config.data_path.filename();
    fs::path events = dir / ctx.config.log_path.filename();
    write_atomic(data, channels.str());
    write_atomic(events, log.str());
    write_atomic(dir / "truth.json", dump(truth_to_json(sc.truth)));
    write_atomic(dir / "scenario.json", dump(ctx.config.scenario.to_json()));
    log_of(ctx) << "synth: " << sc.log.events.size() << " events, " << sc.truth.size() << " truth segments -> "
                << dir.string() << "\n";
}

void run_ingest(const StageContext& ctx) {
    const fs::path data = ctx.resolve(ctx.config.data_path);
    const fs::path events = ctx.resolve(ctx.config.log_path);
    require_artifact(data);
    require_artifact(events);
    const auto ingest = ingest_csv(data);
    const auto log = read_disturbance_log(events);
    auto seg = segment_by_events(ingest.channels, log, ctx.config.segmentation);
    auto outliers = reject_outlier_segments(std::move(seg.segments), ctx.config.outlier_k);

    json segments = json::array();
    for (const auto& s : outliers.kept) {
        segments.push_back({{"id", s.id()},
                            {"terminal", s.terminal_id},
                            {"origin", std::string(to_string(s.label.origin))},
                            {"label", std::string(to_string(s.label.cls))},
                            {"event_index", s.event_index},
                            {"start", format_rfc3339(s.start)},
                            {"end", format_rfc3339(s.end)},
                            {"voltage_offset", s.voltage_offset},
                            {"current_offset", s.current_offset},
                            {"length", s.length()}});
    }
    json gaps = json::array();
    for (const auto& g : ingest.gaps) {
        gaps.push_back({{"terminal", g.terminal_id}, {"channel", g.channel_name}, {"after", format_rfc3339(g.after)},
                        {"seconds", g.seconds}});
    }
    const json manifest = {{"config", ctx.config.to_json()},
                           {"source", {{"data", data.string()}, {"log", events.string()}}},
                           {"kept", outliers.kept.size()},
                           {"dropped", outliers.dropped.size()},
                           {"warnings", seg.warnings},
                           {"gaps", gaps},
                           {"segments", segments}};
    write_atomic(ctx.in_workdir(artifact::kSegments), dump(manifest));
    write_atomic(ctx.in_workdir(artifact::kDropped), dump(dropped_report(outliers.dropped)));
    log_of(ctx) << "ingest: " << ingest.channels.size() << " channels, " << outliers.kept.size() << " segments kept, "
                << outliers.dropped.size() << " dropped, " << seg.warnings.size() << " warnings\n";
}

void run_extract(const StageContext& ctx, const std::optional<fs::path>& schema_out) {
    const auto schema = ctx.config.schema();
    if (schema_out) write_atomic(*schema_out, dump(schema.to_json()));
    const json manifest = read_json(ctx.in_workdir(artifact::kSegments));
    const fs::path data = manifest.at("source").at("data").get<std::string>();
    require_artifact(data);
    const auto ingest = ingest_csv(data);
    std::map<std::string, std::pair<const PmuChannel*, const PmuChannel*>> terminals;
    for (const auto& ch : ingest.channels) {
        auto& slot = terminals[ch.terminal_id];
        if (ch.channel_name == kVoltageChannel) slot.first = &ch;
        if (ch.channel_name == kCurrentChannel) slot.second = &ch;
    }
    std::vector<Segment> segments;
    for (const auto& js : manifest.at("segments")) {
        const auto terminal = js.at("terminal").get<std::string>();
        const auto it = terminals.find(terminal);
        if (it == terminals.end() || !it->second.first || !it->second.second) {
            throw StageError(3, "segment manifest names terminal " + terminal + " absent from " + data.string());
        }
        const auto origin = parse_segment_origin(js.at("origin").get<std::string>());
        segments.push_back(cut_segment(*it->second.first, *it->second.second, js.at("voltage_offset").get<std::size_t>(),
                                       js.at("current_offset").get<std::size_t>(), js.at("length").get<std::size_t>(),
                                       {class_of(origin), origin}, js.at("event_index").get<std::size_t>()));
    }
    const auto matrix =
        extract_matrix(segments, ctx.config.windows, ctx.config.feature_params, schema, ctx.config.threads);
    std::ostringstream csv;
    write_feature_csv(csv, matrix);
    write_atomic(ctx.in_workdir(artifact::kFeatures), csv.str());
    write_atomic(ctx.in_workdir(artifact::kSchema), dump(schema.to_json()));
    log_of(ctx) << "extract: " << matrix.rows() << " rows x " << matrix.cols() << " features\n";
}

void run_select(const StageContext& ctx) {
    const auto matrix = load_features(ctx);
    const auto& sel = ctx.config.selection;
    const auto target = static_cast<std::size_t>(sel.target_k);
    if (target > matrix.cols()) {
        throw StageError(2, "selection.target_k " + std::to_string(target) + " exceeds the " +
                                std::to_string(matrix.cols()) + " available features");
    }
    const auto result = rfe(matrix, sel.learner, target, sel.step, ctx.config.seed);
    json j = result.to_json();
    j["config"] = ctx.config.to_json();
    write_atomic(ctx.in_workdir(artifact::kSelection), dump(j));
    log_of(ctx) << "select: kept " << result.names.size() << " of " << matrix.cols() << " features\n"
                << format_top_features(result, std::min<std::size_t>(10, result.names.size()));
}

void run_train(const StageContext& ctx) {
    const auto all = load_features(ctx);
    const auto selection = load_selection(ctx);
    FeatureMatrix m = all.select_columns(selection.names);
    const auto eval = ctx.config.eval_config();
    json preprocessing = {{"selected", selection.names}};
    if (eval.scaling != StageMode::Off) {
        std::vector<std::size_t> rows(m.rows());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        auto [scaled, params] = minmax_scale_columns(m, rows);
        m = std::move(scaled);
        preprocessing["scaling"] = {{"min", params.min}, {"max", params.max}};
    } else {
        preprocessing["scaling"] = nullptr;
    }
    if (eval.balance != StageMode::Off) m = smote(m, {eval.smote_k, mix_seed(ctx.config.seed, 0x5307E), std::nullopt});
    const auto model = fit_model(m, ctx.config.learner, ctx.config.seed);
    json j = json::parse(serialize(model));
    j["preprocessing"] = preprocessing;
    j["config"] = ctx.config.to_json();
    write_atomic(ctx.in_workdir(artifact::kModel), dump(j));
    log_of(ctx) << "train: " << to_string(ctx.config.learner.kind) << " on " << m.rows() << " rows ("
                << m.synthetic_count() << " synthetic)\n";
}

void run_evaluate(const StageContext& ctx, const std::optional<double>& holdout_frac) {
    const auto all = load_features(ctx);
    const auto selection = load_selection(ctx);
    const FeatureMatrix m = all.select_columns(selection.names);
    const auto eval = ctx.config.eval_config();
    EvalReport report = holdout_frac ? holdout(m, eval, *holdout_frac) : cross_validate(m, eval);
    report.config = ctx.config.to_json();
    json j = report.to_json();
    j["selection_seed"] = selection.seed;
    if (holdout_frac) j["holdout_fraction"] = *holdout_frac;
    write_atomic(ctx.in_workdir(holdout_frac ? artifact::kHoldout : artifact::kReport), dump(j));
    char buf[160];
    std::snprintf(buf, sizeof buf, "evaluate: accuracy %.4f +- %.4f, macro F1 %.4f +- %.4f over %zu fold(s)\n",
                  report.mean.accuracy, report.std.accuracy, report.mean.f1, report.std.f1, report.folds.size());
    log_of(ctx) << buf;
}

void run_compare_scales(const StageContext& ctx) {
    const auto all = load_features(ctx);
    const auto cmp = compare_scales(all, ctx.config.windows, ctx.config.selection, ctx.config.eval_config());
    write_atomic(ctx.in_workdir(artifact::kCompare), dump(cmp.to_json(ctx.config.to_json())));
    auto& os = log_of(ctx);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-16s %-17s %-17s %-17s %-17s\n", "case", "accuracy", "precision", "recall", "f1");
    os << buf;
    for (const auto& c : cmp.cases) {
        const auto& mu = c.report.mean;
        const auto& sd = c.report.std;
        std::snprintf(buf, sizeof buf, "%-16s %.3f +- %.3f    %.3f +- %.3f    %.3f +- %.3f    %.3f +- %.3f\n",
                      c.name.c_str(), mu.accuracy, sd.accuracy, mu.precision, sd.precision, mu.recall, sd.recall,
                      mu.f1, sd.f1);
        os << buf;
    }
}

void run_report(const StageContext& ctx, std::size_t top_k) {
    const auto report = EvalReport::from_json(read_json(ctx.in_workdir(artifact::kReport)));
    std::optional<SelectionResult> selection;
    if (fs::exists(ctx.in_workdir(artifact::kSelection))) selection = load_selection(ctx);
    write_atomic(ctx.in_workdir(artifact::kSvg), render_report_svg(report, selection ? &*selection : nullptr, top_k));
    log_of(ctx) << "report: wrote " << ctx.in_workdir(artifact::kSvg).string() << "\n";
}

}  // namespace gridsense
