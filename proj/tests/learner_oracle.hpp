#pragma once

// Exhaustive re-derivation of every boosted-tree split from raw gradients.

#include <algorithm>
#include <cmath>
#include <vector>

#include "gridsense/learners.hpp"

namespace oracle {

struct SplitAudit {
    int splits = 0;
    int leaves = 0;
    double max_gain_error = 0.0;   // |stored gain - exhaustive max|, relative to max(1, |max|)
    double max_choice_error = 0.0; // |gain of the chosen split recomputed - exhaustive max|
    double max_leaf_error = 0.0;   // |stored leaf - (-G/(H+lambda))|
    int unsplit_positive = 0;      // leaves with a positive-gain candidate although growth was not capped
};

inline std::vector<double> softmax_direct(const std::vector<double>& s) {
    double mx = *std::max_element(s.begin(), s.end());
    std::vector<double> p(s.size());
    double z = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) z += (p[k] = std::exp(s[k] - mx));
    for (auto& v : p) v /= z;
    return p;
}

struct Candidate {
    double gain = -1e300;
    bool any = false;
};

inline double gain_of(double GL, double HL, double GR, double HR, double lambda, double gamma) {
    const double G = GL + GR, H = HL + HR;
    return 0.5 * (GL * GL / (HL + lambda) + GR * GR / (HR + lambda) - G * G / (H + lambda)) - gamma;
}

/// Best gain over every (feature, bin edge) with min_data rows per side.
inline Candidate exhaustive_best(const gridsense::FeatureMatrix& m, const gridsense::GbdtModel& model,
                                 const std::vector<std::size_t>& rows, const std::vector<double>& g,
                                 const std::vector<double>& h) {
    const auto& p = model.params;
    Candidate best;
    for (std::size_t f = 0; f < m.cols(); ++f) {
        for (double edge : model.bins.edges[f]) {
            double GL = 0, HL = 0, GR = 0, HR = 0;
            std::size_t nl = 0, nr = 0;
            for (std::size_t r : rows) {
                if (m.at(r, f) <= edge) {
                    GL += g[r];
                    HL += h[r];
                    ++nl;
                } else {
                    GR += g[r];
                    HR += h[r];
                    ++nr;
                }
            }
            if (nl < static_cast<std::size_t>(p.min_data_in_leaf) || nr < static_cast<std::size_t>(p.min_data_in_leaf)) {
                continue;
            }
            const double gain = gain_of(GL, HL, GR, HR, p.lambda, p.gamma);
            if (!best.any || gain > best.gain) best = {gain, true};
        }
    }
    return best;
}

inline void audit_node(const gridsense::FeatureMatrix& m, const gridsense::GbdtModel& model, const gridsense::Tree& tree,
                       int id, int depth, const std::vector<std::size_t>& rows, const std::vector<double>& g,
                       const std::vector<double>& h, bool leaves_capped, SplitAudit& a) {
    const bool leaf_wise = model.params.growth == gridsense::GrowthPolicy::LeafWise;
    const bool capped = leaf_wise ? leaves_capped : depth >= model.params.max_depth;
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    const auto best = exhaustive_best(m, model, rows, g, h);
    if (node.is_leaf()) {
        ++a.leaves;
        double G = 0, H = 0;
        for (std::size_t r : rows) {
            G += g[r];
            H += h[r];
        }
        a.max_leaf_error = std::max(a.max_leaf_error, std::abs(node.value.at(0) - (-G / (H + model.params.lambda))));
        if (!capped && best.any && best.gain > 1e-9) ++a.unsplit_positive;
        return;
    }
    ++a.splits;
    const double scale = std::max(1.0, std::abs(best.gain));
    a.max_gain_error = std::max(a.max_gain_error, best.any ? std::abs(node.gain - best.gain) / scale : 1e300);

    std::vector<std::size_t> left, right;
    double GL = 0, HL = 0, GR = 0, HR = 0;
    for (std::size_t r : rows) {
        if (m.at(r, static_cast<std::size_t>(node.feature)) <= node.threshold) {
            left.push_back(r);
            GL += g[r];
            HL += h[r];
        } else {
            right.push_back(r);
            GR += g[r];
            HR += h[r];
        }
    }
    const double chosen = gain_of(GL, HL, GR, HR, model.params.lambda, model.params.gamma);
    a.max_choice_error = std::max(a.max_choice_error, std::abs(chosen - best.gain) / scale);
    audit_node(m, model, tree, node.left, depth + 1, left, g, h, leaves_capped, a);
    audit_node(m, model, tree, node.right, depth + 1, right, g, h, leaves_capped, a);
}

/// Replays boosting from the stored trees and audits every node.
inline SplitAudit audit_gbdt(const gridsense::GbdtModel& model, const gridsense::FeatureMatrix& m) {
    SplitAudit a;
    const std::size_t K = static_cast<std::size_t>(model.n_classes);
    const std::size_t n = m.rows();
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    for (std::size_t t = 0; t < model.iterations(); ++t) {
        std::vector<std::vector<double>> probs(n);
        for (std::size_t i = 0; i < n; ++i) probs[i] = softmax_direct(model.raw_scores(m.row(i), t));
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<double> g(n), h(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double p = probs[i][k];
                g[i] = p - (m.labels()[i] == static_cast<int>(k) ? 1.0 : 0.0);
                h[i] = p * (1.0 - p);
            }
            const auto& tree = model.trees[t * K + k];
            const bool full = static_cast<int>(tree.leaf_count()) >= model.params.num_leaves;
            audit_node(m, model, tree, 0, 0, all, g, h, full, a);
        }
    }
    return a;
}

}  // namespace oracle
