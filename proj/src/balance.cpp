#include "gridsense/balance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gridsense/common.hpp"

namespace gridsense {

using nlohmann::json;

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

FeatureMatrix smote(const FeatureMatrix& matrix, const SmoteOptions& options) {
    if (options.k < 1) throw PreconditionError("smote k must be >= 1");
    if (matrix.empty()) throw PreconditionError("smote needs a non-empty matrix");
    matrix.require_finite();

    const auto counts = matrix.class_counts();
    std::vector<std::size_t> target = options.target.value_or(std::vector<std::size_t>{});
    if (!options.target) {
        const std::size_t mx = *std::max_element(counts.begin(), counts.end());
        for (std::size_t c : counts) target.push_back(c > 0 ? mx : 0);
    }
    if (target.size() != counts.size()) {
        throw PreconditionError("smote target has " + std::to_string(target.size()) + " classes, data has " +
                                std::to_string(counts.size()));
    }

    FeatureMatrix out = matrix;
    Rng rng(options.seed);
    for (std::size_t cls = 0; cls < counts.size(); ++cls) {
        if (counts[cls] >= target[cls]) continue;
        if (counts[cls] < 2) {
            throw PreconditionError("smote: class " + std::to_string(cls) + " has " + std::to_string(counts[cls]) +
                                    " row(s); at least 2 are needed to interpolate");
        }
        std::vector<std::size_t> members;
        for (std::size_t r = 0; r < matrix.rows(); ++r) {
            if (matrix.labels()[r] == static_cast<int>(cls)) members.push_back(r);
        }
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(options.k), members.size() - 1);

        std::vector<std::vector<std::size_t>> neighbours(members.size());
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t a = 0; a < members.size(); ++a) {
            dist.clear();
            for (std::size_t b = 0; b < members.size(); ++b) {
                if (a != b) dist.emplace_back(squared_distance(matrix.row(members[a]), matrix.row(members[b])), b);
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
            for (std::size_t i = 0; i < k; ++i) neighbours[a].push_back(members[dist[i].second]);
        }

        std::vector<double> row(matrix.cols());
        const std::size_t needed = target[cls] - counts[cls];
        for (std::size_t s = 0; s < needed; ++s) {
            const std::size_t a = rng.below(members.size());
            const std::size_t z = neighbours[a][rng.below(k)];
            const double u = rng.uniform();
            const auto x = matrix.row(members[a]);
            const auto y = matrix.row(z);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] = x[c] + u * (y[c] - x[c]);
            out.add_row(row, static_cast<int>(cls), "smote/" + std::to_string(cls) + "/" + std::to_string(s), true);
        }
    }
    return out;
}

SelectionResult rfe(const FeatureMatrix& matrix, const LearnerConfig& learner, std::size_t target_k, double step_frac,
                    std::uint64_t seed) {
    if (target_k < 1 || target_k > matrix.cols()) {
        throw PreconditionError("rfe target_k must be in [1, " + std::to_string(matrix.cols()) + "], got " +
                                std::to_string(target_k));
    }
    if (!(step_frac > 0.0 && step_frac < 1.0)) throw PreconditionError("rfe step_frac must be in (0, 1)");

    SelectionResult result;
    result.seed = seed;
    result.learner = learner;
    result.step_frac = step_frac;

    std::vector<std::size_t> surviving(matrix.cols());
    std::iota(surviving.begin(), surviving.end(), std::size_t{0});
    int iteration = 0;
    std::vector<double> importance;
    for (;;) {
        try {
            const auto model = fit_model(matrix.select_columns(surviving), learner, seed);
            importance = feature_importance(model);
        } catch (const Error& e) {
            throw Error("rfe iteration " + std::to_string(iteration) + ": " + e.what());
        }
        if (surviving.size() <= target_k) break;

        const std::size_t step =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(surviving.size()) * step_frac)));
        const std::size_t drop = std::min(step, surviving.size() - target_k);
        std::vector<std::size_t> order(surviving.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (importance[a] != importance[b]) return importance[a] < importance[b];
            return matrix.columns()[surviving[a]] > matrix.columns()[surviving[b]];
        });
        std::vector<char> dropped(surviving.size(), 0);
        for (std::size_t i = 0; i < drop; ++i) {
            dropped[order[i]] = 1;
            result.history.push_back({matrix.columns()[surviving[order[i]]], iteration});
        }
        std::vector<std::size_t> next;
        for (std::size_t i = 0; i < surviving.size(); ++i) {
            if (!dropped[i]) next.push_back(surviving[i]);
        }
        surviving = std::move(next);
        ++iteration;
    }

    double total = std::accumulate(importance.begin(), importance.end(), 0.0);
    if (!(total > 0.0)) {
        std::fill(importance.begin(), importance.end(), 1.0);
        total = static_cast<double>(importance.size());
    }
    std::vector<std::size_t> order(surviving.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (importance[a] != importance[b]) return importance[a] > importance[b];
        return matrix.columns()[surviving[a]] < matrix.columns()[surviving[b]];
    });
    for (std::size_t i : order) {
        result.names.push_back(matrix.columns()[surviving[i]]);
        result.scores.push_back(importance[i] / total);
    }
    return result;
}

std::vector<std::pair<std::string, double>> report_top_features(const SelectionResult& result, std::size_t k) {
    if (k > result.names.size()) {
        throw PreconditionError("requested top " + std::to_string(k) + " of " + std::to_string(result.names.size()) +
                                " selected features");
    }
    std::vector<std::pair<std::string, double>> rows;
    for (std::size_t i = 0; i < result.names.size(); ++i) rows.emplace_back(result.names[i], result.scores[i]);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    rows.resize(k);
    return rows;
}

std::string format_top_features(const SelectionResult& result, std::size_t k) {
    const auto rows = report_top_features(result, k);
    std::size_t width = 7;
    for (const auto& [name, score] : rows) width = std::max(width, name.size());
    std::ostringstream os;
    char buf[64];
    os << "Feature" << std::string(width - 7 + 2, ' ') << "Score\n";
    for (const auto& [name, score] : rows) {
        std::snprintf(buf, sizeof buf, "%.3f", score);
        os << name << std::string(width - name.size() + 2, ' ') << buf << '\n';
    }
    return os.str();
}

json SelectionResult::to_json() const {
    json selected = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) selected.push_back({{"name", names[i]}, {"score", scores[i]}});
    json hist = json::array();
    for (const auto& h : history) hist.push_back({{"name", h.name}, {"dropped_at_iter", h.iteration}});
    return {{"selected", selected}, {"history", hist}, {"seed", seed}, {"learner_config", learner}, {"step_frac", step_frac}};
}

SelectionResult SelectionResult::from_json(const json& j) {
    try {
        SelectionResult r;
        for (const auto& s : j.at("selected")) {
            r.names.push_back(s.at("name").get<std::string>());
            r.scores.push_back(s.at("score").get<double>());
        }
        for (const auto& h : j.at("history")) {
            r.history.push_back({h.at("name").get<std::string>(), h.at("dropped_at_iter").get<int>()});
        }
        r.seed = j.at("seed").get<std::uint64_t>();
        j.at("learner_config").get_to(r.learner);
        if (j.contains("step_frac")) r.step_frac = j.at("step_frac").get<double>();
        return r;
    } catch (const std::exception& e) {
        throw FormatError(std::string("malformed selection: ") + e.what());
    }
}

}  // namespace gridsense
