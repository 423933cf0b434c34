#include <gtest/gtest.h>

#include <fstream>

#include "gridsense/pipeline.hpp"
#include "test_util.hpp"

using namespace gridsense;
using nlohmann::json;

namespace {

bool has_path(const std::vector<Violation>& v, const std::string& path) {
    for (const auto& x : v) {
        if (x.path == path) return true;
    }
    return false;
}

/// Three blobs repeated across the 30/60/180 scales; only the 180 s copy
/// carries signal.
FeatureMatrix scaled_blobs(std::uint64_t seed) {
    const auto base = testutil::blobs(30, seed, 0.3);
    std::vector<std::string> names;
    for (const char* w : {"30", "60", "180"}) {
        for (const char* c : {"x", "y"}) names.push_back(std::string("VA_M__") + c + "__w" + w);
    }
    FeatureMatrix m(names);
    Rng rng(seed);
    for (std::size_t r = 0; r < base.rows(); ++r) {
        std::vector<double> row;
        for (int s = 0; s < 2; ++s) {
            row.push_back(rng.normal());
            row.push_back(rng.normal());
        }
        row.push_back(base.at(r, 0));
        row.push_back(base.at(r, 1));
        m.add_row(row, base.labels()[r], base.ids()[r]);
    }
    return m;
}

}  // namespace

TEST(ValidateConfig, DefaultIsClean) {
    const auto r = validate_config(PipelineConfig{}.to_json());
    EXPECT_TRUE(r.ok());
    EXPECT_TRUE(r.warnings.empty());
}

TEST(ValidateConfig, TargetKOutsideRange) {
    auto j = PipelineConfig{}.to_json();
    j["selection"]["target_k"] = 7;
    const auto strict = validate_config(j);
    EXPECT_FALSE(strict.ok());
    EXPECT_TRUE(has_path(strict.violations, "/selection/target_k"));
    const auto lenient = validate_config(j, true);
    EXPECT_TRUE(lenient.ok());
    EXPECT_TRUE(has_path(lenient.warnings, "/selection/target_k"));
}

TEST(ValidateConfig, UnknownKeyAndTypeErrors) {
    auto j = PipelineConfig{}.to_json();
    j["learnerr"] = json::object();
    auto r = validate_config(j);
    ASSERT_FALSE(r.ok());
    EXPECT_NE(r.violations[0].path.find("learnerr"), std::string::npos);

    j = PipelineConfig{}.to_json();
    j["eval"]["k"] = "ten";
    r = validate_config(j);
    EXPECT_TRUE(has_path(r.violations, "/eval/k"));

    j = PipelineConfig{}.to_json();
    j["scenario"]["recovery_tau_s"] = -2.0;
    r = validate_config(j);
    EXPECT_TRUE(has_path(r.violations, "/scenario/recovery_tau_s"));
}

TEST(ValidateConfig, SyntaxErrorFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "gridsense_bad_config.json";
    {
        std::ofstream out(path);
        out << "{\"eval\": {\"k\": 10,}";
    }
    const auto r = validate_config_file(path);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.violations[0].message.rfind("syntax", 0), 0u) << r.violations[0].message;
    std::filesystem::remove(path);
    EXPECT_FALSE(validate_config_file(path).ok());
}

TEST(PipelineConfig, JsonRoundTrip) {
    PipelineConfig c;
    c.seed = 77;
    c.selection.target_k = 15;
    c.balance = StageMode::Global;
    c.learner.kind = LearnerKind::RandomForest;
    c.feature_exclude = {"p_entropy"};
    c.windows.sizes_s = {30.0, 60.0};
    const auto j = c.to_json();
    const auto back = PipelineConfig::from_json(j);
    EXPECT_EQ(back.to_json(), j);
    EXPECT_EQ(back.seed, 77u);
    EXPECT_EQ(back.selection.target_k, 15);
    EXPECT_EQ(back.eval_config().balance, StageMode::Global);
    EXPECT_EQ(back.schema().entries.size(), 40u);
}

TEST(PipelineConfig, CompatModeFitsGlobally) {
    PipelineConfig c;
    c.paper_compat = true;
    const auto e = c.eval_config();
    EXPECT_EQ(e.balance, StageMode::Global);
    EXPECT_EQ(e.scaling, StageMode::Global);
}

TEST(ColumnsForScales, SelectsBySuffix) {
    const std::vector<std::string> cols{"VA_M__mean__w30", "VA_M__mean__w60", "IA_M__std__w30", "IA_M__std__w180"};
    EXPECT_EQ(columns_for_scales(cols, {30.0}), (std::vector<std::string>{"VA_M__mean__w30", "IA_M__std__w30"}));
    EXPECT_EQ(columns_for_scales(cols, {60.0, 180.0}),
              (std::vector<std::string>{"VA_M__mean__w60", "IA_M__std__w180"}));
    EXPECT_EQ(columns_for_scales(cols, {30.0, 60.0, 180.0}), cols);
}

TEST(CompareScales, CasesInOrderWithSharedSeed) {
    const auto m = scaled_blobs(4);
    SelectionConfig sel;
    sel.target_k = 2;
    sel.learner.gbdt.n_iterations = 10;
    sel.learner.gbdt.min_data_in_leaf = 3;
    EvalConfig eval;
    eval.k = 3;
    eval.seed = 11;
    eval.learner.gbdt.n_iterations = 20;
    eval.learner.gbdt.min_data_in_leaf = 3;
    eval.smote_k = 3;
    const auto cmp = compare_scales(m, WindowSpec{}, sel, eval);
    ASSERT_EQ(cmp.cases.size(), 4u);
    EXPECT_EQ(cmp.cases[0].name, "30s");
    EXPECT_EQ(cmp.cases[1].name, "60s");
    EXPECT_EQ(cmp.cases[2].name, "180s");
    EXPECT_EQ(cmp.cases[3].name, "30+60+180s");
    for (const auto& c : cmp.cases) {
        EXPECT_EQ(c.report.seed, eval.seed);
        EXPECT_EQ(c.selection.names.size(), 2u);
    }
    EXPECT_GT(cmp.cases[2].report.mean.f1, cmp.cases[0].report.mean.f1);
    EXPECT_GE(cmp.cases[3].report.mean.f1, 0.95);
    const auto j = cmp.to_json(json::object());
    EXPECT_EQ(j.at("cases").size(), 4u);
}

TEST(ReportSvg, ContainsHeatmapAndBars) {
    EvalReport r;
    r.confusion = confusion_matrix(std::vector<int>{0, 1, 2, 2}, std::vector<int>{0, 1, 2, 1});
    SelectionResult s;
    s.names = {"VA_M__dfa__w30", "IA_M__std__w60"};
    s.scores = {0.7, 0.3};
    const auto svg = render_report_svg(r, &s, 2);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("VA_M__dfa__w30"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_NE(render_report_svg(r, nullptr).find("</svg>"), std::string::npos);
}
