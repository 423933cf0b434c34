#include "gridsense/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridsense/balance.hpp"
#include "gridsense/common.hpp"
#include "gridsense/signal.hpp"

namespace gridsense {

using nlohmann::json;

std::vector<std::size_t> FoldPlan::test_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) rows.push_back(i);
    }
    return rows;
}

std::vector<std::size_t> FoldPlan::train_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) rows.push_back(i);
    }
    return rows;
}

FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw PreconditionError("k-fold needs k >= 2");
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.fold_of.assign(labels.size(), -1);
    int n_classes = 0;
    for (int l : labels) {
        if (l < 0) throw PreconditionError("negative class label");
        n_classes = std::max(n_classes, l + 1);
    }
    plan.class_counts.assign(static_cast<std::size_t>(k), std::vector<std::size_t>(static_cast<std::size_t>(n_classes), 0));
    for (int cls = 0; cls < n_classes; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) members.push_back(i);
        }
        if (members.empty()) continue;
        if (members.size() < static_cast<std::size_t>(k)) {
            throw PreconditionError("class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                                    " rows, fewer than k = " + std::to_string(k));
        }
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls)));
        for (std::size_t i = members.size() - 1; i > 0; --i) std::swap(members[i], members[rng.below(i + 1)]);
        for (std::size_t j = 0; j < members.size(); ++j) {
            const int fold = static_cast<int>(j % static_cast<std::size_t>(k));
            plan.fold_of[members[j]] = fold;
            ++plan.class_counts[static_cast<std::size_t>(fold)][static_cast<std::size_t>(cls)];
        }
    }
    return plan;
}

// --- confusion -------------------------------------------------------------------

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& r : counts) t = std::accumulate(r.begin(), r.end(), t);
    return t;
}

namespace {

void normalize_rows(ConfusionMatrix& cm) {
    const std::size_t n = cm.counts.size();
    cm.row_normalized.assign(n, std::vector<double>(n, 0.0));
    cm.empty_rows.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = std::accumulate(cm.counts[i].begin(), cm.counts[i].end(), std::size_t{0});
        if (s == 0) {
            cm.empty_rows[i] = true;
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            cm.row_normalized[i][j] = static_cast<double>(cm.counts[i][j]) / static_cast<double>(s);
        }
    }
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 const std::vector<std::string>& classes) {
    if (y_true.size() != y_pred.size()) throw PreconditionError("y_true and y_pred differ in length");
    const std::size_t n = classes.size();
    ConfusionMatrix cm;
    cm.classes = classes;
    cm.counts.assign(n, std::vector<std::size_t>(n, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        for (int v : {y_true[i], y_pred[i]}) {
            if (v < 0 || static_cast<std::size_t>(v) >= n) {
                throw PreconditionError("unknown label index " + std::to_string(v));
            }
        }
        ++cm.counts[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
    }
    normalize_rows(cm);
    return cm;
}

ConfusionMatrix confusion_matrix(const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred,
                                 const std::vector<std::string>& classes) {
    auto index = [&](const std::string& s) {
        const auto it = std::find(classes.begin(), classes.end(), s);
        if (it == classes.end()) throw PreconditionError("unknown label '" + s + "'");
        return static_cast<int>(it - classes.begin());
    };
    std::vector<int> t, p;
    for (const auto& s : y_true) t.push_back(index(s));
    for (const auto& s : y_pred) p.push_back(index(s));
    return confusion_matrix(t, p, classes);
}

json ConfusionMatrix::to_json() const {
    return {{"classes", classes}, {"counts", counts}, {"row_normalized", row_normalized}, {"empty_rows", empty_rows}};
}

ConfusionMatrix ConfusionMatrix::from_json(const json& j) {
    ConfusionMatrix cm;
    j.at("classes").get_to(cm.classes);
    j.at("counts").get_to(cm.counts);
    j.at("row_normalized").get_to(cm.row_normalized);
    j.at("empty_rows").get_to(cm.empty_rows);
    return cm;
}

// --- metrics ------------------------------------------------------------------------

Metrics metrics_from_confusion(const std::vector<std::vector<double>>& w, Averaging averaging) {
    const std::size_t n = w.size();
    if (n == 0) throw PreconditionError("empty confusion matrix");
    for (const auto& r : w) {
        if (r.size() != n) throw PreconditionError("confusion matrix must be square");
    }
    double total = 0.0, trace = 0.0;
    std::vector<double> row(n, 0.0), col(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            total += w[i][j];
            row[i] += w[i][j];
            col[j] += w[i][j];
        }
        trace += w[i][i];
    }
    if (!(total > 0.0)) throw PreconditionError("confusion matrix has no entries");
    Metrics m;
    m.accuracy = trace / total;
    for (std::size_t c = 0; c < n; ++c) {
        const double tp = w[c][c];
        const double precision = col[c] > 0.0 ? tp / col[c] : 0.0;
        const double recall = row[c] > 0.0 ? tp / row[c] : 0.0;
        const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        const double weight = averaging == Averaging::Macro ? 1.0 / static_cast<double>(n) : row[c] / total;
        m.precision += weight * precision;
        m.recall += weight * recall;
        m.f1 += weight * f1;
    }
    return m;
}

Metrics metrics_from_confusion(const std::vector<std::vector<std::size_t>>& counts, Averaging averaging) {
    std::vector<std::vector<double>> w;
    for (const auto& r : counts) w.emplace_back(r.begin(), r.end());
    return metrics_from_confusion(w, averaging);
}

Metrics metrics_from_confusion(const ConfusionMatrix& cm, Averaging averaging) {
    return metrics_from_confusion(cm.counts, averaging);
}

json to_json(const Metrics& m) {
    return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

Metrics metrics_from_json(const json& j) {
    Metrics m;
    j.at("accuracy").get_to(m.accuracy);
    j.at("precision").get_to(m.precision);
    j.at("recall").get_to(m.recall);
    j.at("f1").get_to(m.f1);
    return m;
}

// --- cross-validation ------------------------------------------------------------------

std::string_view to_string(StageMode m) {
    switch (m) {
        case StageMode::PerFold: return "per_fold";
        case StageMode::Global: return "global";
        case StageMode::Off: return "off";
    }
    return "?";
}

StageMode parse_stage_mode(std::string_view s) {
    if (s == "per_fold") return StageMode::PerFold;
    if (s == "global") return StageMode::Global;
    if (s == "off") return StageMode::Off;
    throw PreconditionError("unknown mode '" + std::string(s) + "' (expected per_fold, global or off)");
}

json EvalConfig::to_json() const {
    return {{"learner", learner},
            {"k", k},
            {"seed", seed},
            {"smote_k", smote_k},
            {"balance", std::string(gridsense::to_string(balance))},
            {"scaling", std::string(gridsense::to_string(scaling))},
            {"averaging", averaging == Averaging::Macro ? "macro" : "weighted"},
            {"classes", classes}};
}

json EvalReport::to_json() const {
    json jf = json::array();
    for (const auto& f : folds) {
        json j = gridsense::to_json(f.metrics);
        j["train_rows"] = f.train_rows;
        j["test_rows"] = f.test_rows;
        j["synthetic_train"] = f.synthetic_train;
        j["synthetic_test"] = f.synthetic_test;
        jf.push_back(std::move(j));
    }
    return {{"config", config},
            {"seed", seed},
            {"folds", jf},
            {"mean", gridsense::to_json(mean)},
            {"std", gridsense::to_json(std)},
            {"confusion", confusion.to_json()}};
}

EvalReport EvalReport::from_json(const json& j) {
    try {
        EvalReport r;
        r.config = j.at("config");
        r.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& jf : j.at("folds")) {
            FoldResult f;
            f.metrics = metrics_from_json(jf);
            f.train_rows = jf.value("train_rows", std::size_t{0});
            f.test_rows = jf.value("test_rows", std::size_t{0});
            f.synthetic_train = jf.value("synthetic_train", std::size_t{0});
            f.synthetic_test = jf.value("synthetic_test", std::size_t{0});
            r.folds.push_back(f);
        }
        r.mean = metrics_from_json(j.at("mean"));
        r.std = metrics_from_json(j.at("std"));
        r.confusion = ConfusionMatrix::from_json(j.at("confusion"));
        return r;
    } catch (const std::exception& e) {
        throw FormatError(std::string("malformed evaluation report: ") + e.what());
    }
}

void aggregate_folds(EvalReport& report) {
    const double n = static_cast<double>(report.folds.size());
    auto stat = [&](double Metrics::*field, double Metrics::*out_mean) {
        double s = 0.0;
        for (const auto& f : report.folds) s += f.metrics.*field;
        const double mean = n > 0 ? s / n : 0.0;
        double ss = 0.0;
        for (const auto& f : report.folds) ss += (f.metrics.*field - mean) * (f.metrics.*field - mean);
        report.mean.*out_mean = mean;
        report.std.*out_mean = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    };
    stat(&Metrics::accuracy, &Metrics::accuracy);
    stat(&Metrics::precision, &Metrics::precision);
    stat(&Metrics::recall, &Metrics::recall);
    stat(&Metrics::f1, &Metrics::f1);
}

namespace {

struct SplitOutcome {
    FoldResult result;
    std::vector<int> y_true;
    std::vector<int> y_pred;
};

FeatureMatrix prepare_global(const FeatureMatrix& matrix, const EvalConfig& config) {
    FeatureMatrix m = matrix;
    if (config.scaling == StageMode::Global) {
        std::vector<std::size_t> all(m.rows());
        std::iota(all.begin(), all.end(), std::size_t{0});
        m = minmax_scale_columns(m, all).first;
    }
    if (config.balance == StageMode::Global) {
        m = smote(m, {config.smote_k, mix_seed(config.seed, 0x5307E), std::nullopt});
    }
    return m;
}

SplitOutcome run_split(const FeatureMatrix& data, const std::vector<std::size_t>& train_idx,
                       const std::vector<std::size_t>& test_idx, const EvalConfig& config, std::uint64_t split_seed) {
    FeatureMatrix train = data.select_rows(train_idx);
    FeatureMatrix test = data.select_rows(test_idx);
    if (config.scaling == StageMode::PerFold) {
        std::vector<std::size_t> all(train.rows());
        std::iota(all.begin(), all.end(), std::size_t{0});
        auto [scaled, params] = minmax_scale_columns(train, all);
        train = std::move(scaled);
        test = apply_minmax(test, params);
    }
    if (config.balance == StageMode::PerFold) {
        train = smote(train, {config.smote_k, mix_seed(split_seed, 1), std::nullopt});
    }
    const auto model = fit_model(train, config.learner, mix_seed(split_seed, 2));
    SplitOutcome out;
    out.y_true = test.labels();
    out.y_pred = predict_classes(model, test);
    const auto cm = confusion_matrix(out.y_true, out.y_pred, config.classes);
    out.result.metrics = metrics_from_confusion(cm, config.averaging);
    out.result.train_rows = train.rows();
    out.result.test_rows = test.rows();
    out.result.synthetic_train = train.synthetic_count();
    out.result.synthetic_test = test.synthetic_count();
    return out;
}

EvalReport assemble(const std::vector<SplitOutcome>& outcomes, const EvalConfig& config) {
    EvalReport report;
    report.config = config.to_json();
    report.seed = config.seed;
    std::vector<int> all_true, all_pred;
    for (const auto& o : outcomes) {
        report.folds.push_back(o.result);
        all_true.insert(all_true.end(), o.y_true.begin(), o.y_true.end());
        all_pred.insert(all_pred.end(), o.y_pred.begin(), o.y_pred.end());
    }
    report.confusion = confusion_matrix(all_true, all_pred, config.classes);
    aggregate_folds(report);
    return report;
}

}  // namespace

EvalReport cross_validate(const FeatureMatrix& matrix, const EvalConfig& config) {
    if (matrix.class_count() > static_cast<int>(config.classes.size())) {
        throw PreconditionError("matrix has more classes than configured class names");
    }
    const FeatureMatrix data = prepare_global(matrix, config);
    const FoldPlan plan = stratified_kfold(data.labels(), config.k, config.seed);
    std::vector<SplitOutcome> outcomes(static_cast<std::size_t>(config.k));
    parallel_for(outcomes.size(), config.threads, [&](std::size_t f) {
        const int fold = static_cast<int>(f);
        try {
            outcomes[f] = run_split(data, plan.train_rows(fold), plan.test_rows(fold), config,
                                    mix_seed(config.seed, 100 + f));
        } catch (const Error& e) {
            throw Error("fold " + std::to_string(f) + ": " + e.what());
        }
    });
    return assemble(outcomes, config);
}

EvalReport holdout(const FeatureMatrix& matrix, const EvalConfig& config, double test_frac) {
    if (!(test_frac > 0.0 && test_frac < 1.0)) throw PreconditionError("holdout fraction must be in (0, 1)");
    const FeatureMatrix data = prepare_global(matrix, config);
    std::vector<std::size_t> train, test;
    for (int cls = 0; cls < data.class_count(); ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            if (data.labels()[i] == cls) members.push_back(i);
        }
        if (members.empty()) continue;
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(cls)));
        for (std::size_t i = members.size() - 1; i > 0; --i) std::swap(members[i], members[rng.below(i + 1)]);
        const auto n_test = static_cast<std::size_t>(std::lround(test_frac * static_cast<double>(members.size())));
        if (n_test == 0 || n_test == members.size()) {
            throw PreconditionError("holdout leaves class " + std::to_string(cls) + " without train or test rows");
        }
        test.insert(test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
        train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    std::vector<SplitOutcome> outcomes{run_split(data, train, test, config, mix_seed(config.seed, 100))};
    return assemble(outcomes, config);
}

}  // namespace gridsense
