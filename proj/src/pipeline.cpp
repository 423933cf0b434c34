#include "gridsense/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "gridsense/common.hpp"

namespace gridsense {

using nlohmann::json;

LearnerConfig SelectionConfig::default_selection_learner() {
    LearnerConfig c;
    c.kind = LearnerKind::GbdtLeafWise;
    c.gbdt.n_iterations = 50;
    return c;
}

// --- config ------------------------------------------------------------------------

json PipelineConfig::to_json() const {
    json params;
    gridsense::to_json(params, feature_params);
    return {{"paths", {{"data", data_path.string()}, {"log", log_path.string()}, {"workdir", workdir.string()}}},
            {"scenario", scenario.to_json()},
            {"segmentation",
             {{"segment_s", segmentation.segment_s}, {"offsets_min", segmentation.offsets_min}, {"outlier_k", outlier_k}}},
            {"windows", {{"sizes_s", windows.sizes_s}}},
            {"features", {{"params", params}, {"exclude", feature_exclude}}},
            {"selection",
             {{"method", selection.method},
              {"target_k", selection.target_k},
              {"step", selection.step},
              {"learner", selection.learner}}},
            {"balance", {{"smote_k", smote_k}, {"mode", std::string(to_string(balance))}}},
            {"scaling", {{"mode", std::string(to_string(scaling))}}},
            {"learner", learner},
            {"eval", {{"k", eval_k}, {"seed", seed}, {"averaging", averaging == Averaging::Macro ? "macro" : "weighted"}}},
            {"compat", {{"paper_compat", paper_compat}, {"strict", strict}}},
            {"threads", threads}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    auto section = [&](const char* key) -> const json* {
        if (!j.contains(key)) return nullptr;
        return &j.at(key);
    };
    if (const auto* p = section("paths")) {
        if (p->contains("data")) c.data_path = p->at("data").get<std::string>();
        if (p->contains("log")) c.log_path = p->at("log").get<std::string>();
        if (p->contains("workdir")) c.workdir = p->at("workdir").get<std::string>();
    }
    if (const auto* s = section("scenario")) {
        json sj = *s;
        if (!sj.contains("seed")) sj["seed"] = c.scenario.seed;
        c.scenario = ScenarioConfig::from_json(sj);
    }
    if (const auto* s = section("segmentation")) {
        if (s->contains("segment_s")) s->at("segment_s").get_to(c.segmentation.segment_s);
        if (s->contains("offsets_min")) s->at("offsets_min").get_to(c.segmentation.offsets_min);
        if (s->contains("outlier_k")) s->at("outlier_k").get_to(c.outlier_k);
    }
    if (const auto* w = section("windows")) {
        if (w->contains("sizes_s")) w->at("sizes_s").get_to(c.windows.sizes_s);
    }
    if (const auto* f = section("features")) {
        if (f->contains("params")) f->at("params").get_to(c.feature_params);
        if (f->contains("exclude")) f->at("exclude").get_to(c.feature_exclude);
    }
    if (const auto* s = section("selection")) {
        if (s->contains("method")) s->at("method").get_to(c.selection.method);
        if (s->contains("target_k")) s->at("target_k").get_to(c.selection.target_k);
        if (s->contains("step")) s->at("step").get_to(c.selection.step);
        if (s->contains("learner")) {
            json lj = json(c.selection.learner);
            lj.merge_patch(s->at("learner"));
            lj.get_to(c.selection.learner);
        }
    }
    if (const auto* b = section("balance")) {
        if (b->contains("smote_k")) b->at("smote_k").get_to(c.smote_k);
        if (b->contains("mode")) c.balance = parse_stage_mode(b->at("mode").get<std::string>());
    }
    if (const auto* s = section("scaling")) {
        if (s->contains("mode")) c.scaling = parse_stage_mode(s->at("mode").get<std::string>());
    }
    if (const auto* l = section("learner")) l->get_to(c.learner);
    if (const auto* e = section("eval")) {
        if (e->contains("k")) e->at("k").get_to(c.eval_k);
        if (e->contains("seed")) e->at("seed").get_to(c.seed);
        if (e->contains("averaging")) {
            c.averaging = e->at("averaging").get<std::string>() == "weighted" ? Averaging::Weighted : Averaging::Macro;
        }
    }
    if (const auto* cp = section("compat")) {
        if (cp->contains("paper_compat")) cp->at("paper_compat").get_to(c.paper_compat);
        if (cp->contains("strict")) cp->at("strict").get_to(c.strict);
    }
    if (j.contains("threads")) j.at("threads").get_to(c.threads);
    return c;
}

EvalConfig PipelineConfig::eval_config() const {
    EvalConfig e;
    e.learner = learner;
    e.k = eval_k;
    e.seed = seed;
    e.smote_k = smote_k;
    e.balance = paper_compat ? StageMode::Global : balance;
    e.scaling = paper_compat ? StageMode::Global : scaling;
    e.averaging = averaging;
    e.threads = threads;
    return e;
}

FeatureSchema PipelineConfig::schema() const { return FeatureSchema::build(feature_params, feature_exclude); }

// --- validation -----------------------------------------------------------------------

namespace {

std::string escape_pointer(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

bool same_kind(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) {
        // Integer template fields do not accept fractional values.
        if ((a.is_number_integer() || a.is_number_unsigned()) && b.is_number_float()) return false;
        return true;
    }
    return a.type() == b.type();
}

const char* kind_name(const json& j) {
    if (j.is_number_integer() || j.is_number_unsigned()) return "integer";
    if (j.is_number()) return "number";
    if (j.is_boolean()) return "boolean";
    if (j.is_string()) return "string";
    if (j.is_array()) return "array";
    if (j.is_object()) return "object";
    return "null";
}

void check_structure(const json& doc, const json& tmpl, const std::string& path, std::vector<Violation>& out) {
    if (!same_kind(tmpl, doc)) {
        out.push_back({path, std::string("expected ") + kind_name(tmpl) + ", got " + kind_name(doc)});
        return;
    }
    if (doc.is_object()) {
        for (const auto& [key, value] : doc.items()) {
            const std::string child = path + "/" + escape_pointer(key);
            if (!tmpl.contains(key)) {
                out.push_back({child, "unknown key '" + key + "'"});
                continue;
            }
            check_structure(value, tmpl.at(key), child, out);
        }
    } else if (doc.is_array() && !tmpl.empty()) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
            check_structure(doc[i], tmpl[0], path + "/" + std::to_string(i), out);
        }
    } else if (doc.is_array()) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
            if (!doc[i].is_string()) out.push_back({path + "/" + std::to_string(i), "expected string"});
        }
    }
}

template <class F>
void check(std::vector<Violation>& out, const std::string& path, F&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        out.push_back({path, e.what()});
    }
}

}  // namespace

ValidationResult validate_config(const json& j, bool lenient) {
    ValidationResult r;
    if (!j.is_object()) {
        r.violations.push_back({"", "configuration must be a JSON object"});
        return r;
    }
    const json tmpl = PipelineConfig{}.to_json();
    check_structure(j, tmpl, "", r.violations);
    if (!r.ok()) return r;

    PipelineConfig c;
    try {
        c = PipelineConfig::from_json(j);
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        std::string path;
        if (msg.rfind("scenario.", 0) == 0) path = "/scenario/" + msg.substr(9, msg.find(' ') - 9);
        r.violations.push_back({path, msg});
        return r;
    }
    auto& v = r.violations;
    check(v, "/scenario", [&] { c.scenario.validate(); });
    if (!v.empty() && v.back().path == "/scenario") {
        const std::string& msg = v.back().message;
        if (msg.rfind("scenario.", 0) == 0) v.back().path = "/scenario/" + msg.substr(9, msg.find(' ') - 9);
    }
    if (c.data_path.empty()) v.push_back({"/paths/data", "must not be empty"});
    if (c.log_path.empty()) v.push_back({"/paths/log", "must not be empty"});
    if (c.workdir.empty()) v.push_back({"/paths/workdir", "must not be empty"});
    if (!(c.segmentation.segment_s > 0.0)) v.push_back({"/segmentation/segment_s", "must be positive"});
    for (std::size_t i = 0; i < c.segmentation.offsets_min.size(); ++i) {
        if (!origin_for_offset(c.segmentation.offsets_min[i])) {
            v.push_back({"/segmentation/offsets_min/" + std::to_string(i), "must be one of 10, 20, 30, 40, 50"});
        }
    }
    if (!(c.outlier_k > 0.0)) v.push_back({"/segmentation/outlier_k", "must be positive"});
    check(v, "/windows/sizes_s", [&] { c.windows.validate(c.scenario.rate_hz); });
    if (!c.windows.sizes_s.empty() && c.windows.sizes_s.back() > c.segmentation.segment_s) {
        v.push_back({"/windows/sizes_s", "largest window exceeds the segment length"});
    }
    const auto& fp = c.feature_params;
    if (fp.n_blocks < 1) v.push_back({"/features/params/n_blocks", "must be >= 1"});
    if (fp.n_fft < 1) v.push_back({"/features/params/n_fft", "must be >= 1"});
    if (fp.hist_bins < 1) v.push_back({"/features/params/hist_bins", "must be >= 1"});
    if (fp.perm_order < 2 || fp.perm_order > 10) v.push_back({"/features/params/perm_order", "must be in [2, 10]"});
    if (fp.perm_delay < 1) v.push_back({"/features/params/perm_delay", "must be >= 1"});
    if (fp.sampen_m < 1) v.push_back({"/features/params/sampen_m", "must be >= 1"});
    if (!(fp.sampen_r >= 0.0)) v.push_back({"/features/params/sampen_r", "must be >= 0"});
    if (fp.dfa_scales < 3) v.push_back({"/features/params/dfa_scales", "must be >= 3"});
    if (fp.wavelet_levels < 1) v.push_back({"/features/params/wavelet_levels", "must be >= 1"});
    for (std::size_t i = 0; i < fp.cov_lags.size(); ++i) {
        if (fp.cov_lags[i] < 1) v.push_back({"/features/params/cov_lags/" + std::to_string(i), "must be >= 1"});
    }
    const auto families = FeatureSchema::families();
    for (std::size_t i = 0; i < c.feature_exclude.size(); ++i) {
        if (std::find(families.begin(), families.end(), c.feature_exclude[i]) == families.end()) {
            v.push_back({"/features/exclude/" + std::to_string(i), "unknown feature family '" + c.feature_exclude[i] + "'"});
        }
    }
    if (c.selection.method != "rfe") v.push_back({"/selection/method", "only 'rfe' is supported"});
    if (c.selection.target_k < 1) {
        v.push_back({"/selection/target_k", "must be >= 1"});
    } else if (c.selection.target_k != 10 && c.selection.target_k != 15 && c.selection.target_k != 20) {
        Violation t{"/selection/target_k", "must be one of {10, 15, 20}, got " + std::to_string(c.selection.target_k)};
        (lenient || !c.strict ? r.warnings : v).push_back(t);
    }
    if (!(c.selection.step > 0.0 && c.selection.step < 1.0)) v.push_back({"/selection/step", "must be in (0, 1)"});
    check(v, "/selection/learner/gbdt", [&] { c.selection.learner.gbdt.validate(); });
    check(v, "/selection/learner/rf", [&] { c.selection.learner.rf.validate(); });
    if (c.smote_k < 1) v.push_back({"/balance/smote_k", "must be >= 1"});
    check(v, "/learner/gbdt", [&] { c.learner.gbdt.validate(); });
    check(v, "/learner/rf", [&] { c.learner.rf.validate(); });
    if (c.eval_k < 2) v.push_back({"/eval/k", "must be >= 2"});
    if (j.contains("eval") && j["eval"].contains("averaging")) {
        const auto a = j["eval"]["averaging"].get<std::string>();
        if (a != "macro" && a != "weighted") v.push_back({"/eval/averaging", "must be 'macro' or 'weighted'"});
    }
    if (c.threads < 0) v.push_back({"/threads", "must be >= 0"});
    return r;
}

ValidationResult validate_config_file(const std::filesystem::path& path, bool lenient) {
    std::ifstream in(path);
    if (!in) return {{{"", "cannot read " + path.string()}}, {}};
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        return {{{"", std::string("syntax: ") + e.what()}}, {}};
    }
    return validate_config(j, lenient);
}

// --- scale comparison -----------------------------------------------------------------

std::vector<std::string> columns_for_scales(const std::vector<std::string>& columns, const std::vector<double>& sizes_s) {
    std::vector<std::string> suffixes;
    for (double s : sizes_s) suffixes.push_back(scale_suffix(s));
    std::vector<std::string> out;
    for (const auto& c : columns) {
        for (const auto& suf : suffixes) {
            if (c.size() > suf.size() && c.compare(c.size() - suf.size(), suf.size(), suf) == 0) {
                out.push_back(c);
                break;
            }
        }
    }
    return out;
}

namespace {

std::string case_name(const std::vector<double>& sizes) {
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%g", sizes[i]);
        out += (i ? "+" : "") + std::string(buf);
    }
    return out + "s";
}

}  // namespace

ScaleCase evaluate_scales(const FeatureMatrix& multiscale, const std::vector<double>& sizes_s,
                          const SelectionConfig& selection, const EvalConfig& eval) {
    ScaleCase sc;
    sc.name = case_name(sizes_s);
    sc.sizes_s = sizes_s;
    const auto cols = columns_for_scales(multiscale.columns(), sizes_s);
    if (cols.empty()) throw PreconditionError("no feature columns for case " + sc.name);
    const FeatureMatrix sub = multiscale.select_columns(cols);
    const std::size_t target = std::min<std::size_t>(static_cast<std::size_t>(selection.target_k), cols.size());
    sc.selection = rfe(sub, selection.learner, target, selection.step, eval.seed);
    sc.report = cross_validate(sub.select_columns(sc.selection.names), eval);
    return sc;
}

ScaleComparison compare_scales(const FeatureMatrix& multiscale, const WindowSpec& spec,
                               const SelectionConfig& selection, const EvalConfig& eval) {
    ScaleComparison cmp;
    cmp.seed = eval.seed;
    for (double s : spec.sizes_s) cmp.cases.push_back(evaluate_scales(multiscale, {s}, selection, eval));
    if (spec.sizes_s.size() > 1) cmp.cases.push_back(evaluate_scales(multiscale, spec.sizes_s, selection, eval));
    return cmp;
}

json ScaleComparison::to_json(const json& config) const {
    json cases_json = json::array();
    for (const auto& c : cases) {
        json metrics = json::object();
        for (const char* m : {"accuracy", "precision", "recall", "f1"}) {
            metrics[m] = {{"mean", gridsense::to_json(c.report.mean)[m]}, {"std", gridsense::to_json(c.report.std)[m]}};
        }
        cases_json.push_back({{"name", c.name},
                              {"sizes_s", c.sizes_s},
                              {"seed", c.report.seed},
                              {"selected", c.selection.to_json()["selected"]},
                              {"metrics", metrics},
                              {"confusion", c.report.confusion.to_json()}});
    }
    bool same_seed = true;
    for (const auto& c : cases) same_seed = same_seed && c.report.seed == seed && c.selection.seed == seed;
    return {{"config", config}, {"seed", seed}, {"identical_seeds", same_seed}, {"cases", cases_json}};
}

ExtractedData extract_from_channels(const ChannelSet& channels, const DisturbanceLog& log, const PipelineConfig& config) {
    ExtractedData out;
    auto seg = segment_by_events(channels, log, config.segmentation);
    out.warnings = std::move(seg.warnings);
    auto outliers = reject_outlier_segments(std::move(seg.segments), config.outlier_k);
    out.segments = std::move(outliers.kept);
    out.dropped = std::move(outliers.dropped);
    out.features = extract_matrix(out.segments, config.windows, config.feature_params, config.schema(), config.threads);
    return out;
}

// --- SVG ----------------------------------------------------------------------------------

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_report_svg(const EvalReport& report, const SelectionResult* selection, std::size_t top_k) {
    const auto& cm = report.confusion;
    const std::size_t n = cm.classes.size();
    const int cell = 70, left = 80, top = 60;
    std::vector<std::pair<std::string, double>> bars;
    if (selection) bars = report_top_features(*selection, std::min(top_k, selection->names.size()));
    const int heat_w = left + static_cast<int>(n) * cell + 40;
    const int bar_left = heat_w + 220;
    const int width = bars.empty() ? heat_w : bar_left + 260;
    const int height = std::max(top + static_cast<int>(n) * cell + 60, top + static_cast<int>(bars.size()) * 22 + 40);

    std::ostringstream os;
    char buf[128];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">Confusion matrix (row-normalized)</text>\n";
    os << "<text x=\"" << left << "\" y=\"" << top - 8 << "\">predicted</text>\n";
    for (std::size_t i = 0; i < n; ++i) {
        os << "<text x=\"" << left - 10 << "\" y=\"" << top + static_cast<int>(i) * cell + cell / 2 + 4
           << "\" text-anchor=\"end\">" << xml_escape(cm.classes[i]) << "</text>\n";
        os << "<text x=\"" << left + static_cast<int>(i) * cell + cell / 2 << "\" y=\"" << top + static_cast<int>(n) * cell + 16
           << "\" text-anchor=\"middle\">" << xml_escape(cm.classes[i]) << "</text>\n";
        for (std::size_t j = 0; j < n; ++j) {
            const double v = cm.row_normalized.empty() ? 0.0 : cm.row_normalized[i][j];
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            std::snprintf(buf, sizeof buf, "rgb(%d,%d,255)", shade, shade);
            os << "<rect x=\"" << left + static_cast<int>(j) * cell << "\" y=\"" << top + static_cast<int>(i) * cell
               << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"" << buf << "\" stroke=\"#444\"/>\n";
            std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
            os << "<text x=\"" << left + static_cast<int>(j) * cell + cell / 2 << "\" y=\""
               << top + static_cast<int>(i) * cell + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
               << (v > 0.5 ? "white" : "black") << "\">" << buf << "</text>\n";
        }
    }
    if (!bars.empty()) {
        const double mx = bars.front().second > 0.0 ? bars.front().second : 1.0;
        os << "<text x=\"" << heat_w << "\" y=\"24\" font-size=\"14\">Top " << bars.size()
           << " feature importances</text>\n";
        for (std::size_t i = 0; i < bars.size(); ++i) {
            const int y = top + static_cast<int>(i) * 22;
            const int w = static_cast<int>(std::lround(240.0 * bars[i].second / mx));
            os << "<text x=\"" << bar_left - 6 << "\" y=\"" << y + 13 << "\" text-anchor=\"end\">"
               << xml_escape(bars[i].first) << "</text>\n";
            os << "<rect x=\"" << bar_left << "\" y=\"" << y << "\" width=\"" << w
               << "\" height=\"16\" fill=\"#3a7\"/>\n";
            std::snprintf(buf, sizeof buf, "%.3f", bars[i].second);
            os << "<text x=\"" << bar_left + w + 4 << "\" y=\"" << y + 13 << "\">" << buf << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace gridsense
