#include "gridsense/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gridsense/common.hpp"

namespace gridsense {

using nlohmann::json;

// --- binning ------------------------------------------------------------------

BinMapper BinMapper::fit(const FeatureMatrix& matrix, int n_bins) {
    if (n_bins < 2 || n_bins > 65535) throw PreconditionError("n_bins must be in [2, 65535]");
    BinMapper m;
    m.edges.resize(matrix.cols());
    std::vector<double> col(matrix.rows());
    const std::size_t nb = static_cast<std::size_t>(n_bins);
    for (std::size_t f = 0; f < matrix.cols(); ++f) {
        for (std::size_t r = 0; r < matrix.rows(); ++r) col[r] = matrix.at(r, f);
        std::sort(col.begin(), col.end());
        auto& e = m.edges[f];
        if (col.empty()) continue;
        const double top = col.back();
        std::vector<double> distinct;
        std::unique_copy(col.begin(), col.end(), std::back_inserter(distinct));
        if (distinct.size() <= nb) {
            e.assign(distinct.begin(), distinct.end() - 1);
            continue;
        }
        const std::size_t n = col.size();
        for (std::size_t q = 1; q < nb; ++q) {
            const std::size_t idx = (q * n + nb - 1) / nb - 1;
            const double v = col[idx];
            if (v < top && (e.empty() || v > e.back())) e.push_back(v);
        }
    }
    return m;
}

std::uint16_t BinMapper::bin(std::size_t feature, double value) const {
    const auto& e = edges[feature];
    return static_cast<std::uint16_t>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
}

namespace {

struct BinnedData {
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<std::uint16_t> bins;  // feature-major
    std::vector<std::size_t> offset;  // histogram offset per feature
    std::vector<std::size_t> nbins;
    std::size_t total_bins = 0;

    std::uint16_t at(std::size_t f, std::size_t i) const { return bins[f * n + i]; }
};

BinnedData bin_matrix(const FeatureMatrix& m, const BinMapper& mapper) {
    BinnedData d;
    d.n = m.rows();
    d.p = m.cols();
    d.bins.resize(d.n * d.p);
    for (std::size_t f = 0; f < d.p; ++f) {
        d.offset.push_back(d.total_bins);
        d.nbins.push_back(mapper.bin_count(f));
        d.total_bins += mapper.bin_count(f);
        for (std::size_t i = 0; i < d.n; ++i) d.bins[f * d.n + i] = mapper.bin(f, m.at(i, f));
    }
    return d;
}

void check_training_input(const FeatureMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw PreconditionError("training matrix is empty");
    if (m.classes_present() < 2) throw PreconditionError("training data must contain at least 2 classes");
    for (int l : m.labels()) {
        if (l < 0) throw PreconditionError("negative class label");
    }
    m.require_finite();
}

}  // namespace

// --- trees -----------------------------------------------------------------------

const TreeNode& Tree::leaf_for(std::span<const double> row) const {
    const TreeNode* node = &nodes.at(0);
    while (!node->is_leaf()) {
        const double v = row[static_cast<std::size_t>(node->feature)];
        const bool left = std::isnan(v) ? node->default_left : v <= node->threshold;
        node = &nodes[static_cast<std::size_t>(left ? node->left : node->right)];
    }
    return *node;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int Tree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].is_leaf()) continue;
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        best = std::max(best, d[i] + 1);
    }
    return best;
}

std::string_view to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::GbdtLeafWise: return "gbdt_leafwise";
        case LearnerKind::GbdtLevelWise: return "gbdt_levelwise";
        case LearnerKind::RandomForest: return "random_forest";
    }
    return "?";
}

LearnerKind parse_learner_kind(std::string_view s) {
    if (s == "gbdt_leafwise") return LearnerKind::GbdtLeafWise;
    if (s == "gbdt_levelwise") return LearnerKind::GbdtLevelWise;
    if (s == "random_forest") return LearnerKind::RandomForest;
    throw PreconditionError("unknown learner kind '" + std::string(s) + "'");
}

void GbdtParams::validate() const {
    if (n_iterations < 0) throw PreconditionError("gbdt n_iterations must be >= 0");
    if (!(learning_rate > 0.0)) throw PreconditionError("gbdt learning_rate must be > 0");
    if (num_leaves < 2) throw PreconditionError("gbdt num_leaves must be >= 2");
    if (max_depth < 1) throw PreconditionError("gbdt max_depth must be >= 1");
    if (min_data_in_leaf < 1) throw PreconditionError("gbdt min_data_in_leaf must be >= 1");
    if (!(lambda >= 0.0)) throw PreconditionError("gbdt lambda must be >= 0");
    if (!(gamma >= 0.0)) throw PreconditionError("gbdt gamma must be >= 0");
    if (n_bins < 2 || n_bins > 65535) throw PreconditionError("gbdt n_bins must be in [2, 65535]");
    if (!std::isfinite(base_score)) throw PreconditionError("gbdt base_score must be finite");
}

void RfParams::validate() const {
    if (n_trees < 1) throw PreconditionError("rf n_trees must be >= 1");
    if (max_depth == 0 || max_depth < -1) throw PreconditionError("rf max_depth must be -1 or >= 1");
    if (min_samples_leaf < 1) throw PreconditionError("rf min_samples_leaf must be >= 1");
    if (n_bins < 2 || n_bins > 65535) throw PreconditionError("rf n_bins must be in [2, 65535]");
}

void to_json(json& j, const GbdtParams& p) {
    j = {{"n_iterations", p.n_iterations},
         {"learning_rate", p.learning_rate},
         {"num_leaves", p.num_leaves},
         {"max_depth", p.max_depth},
         {"min_data_in_leaf", p.min_data_in_leaf},
         {"lambda", p.lambda},
         {"gamma", p.gamma},
         {"n_bins", p.n_bins},
         {"growth", p.growth == GrowthPolicy::LeafWise ? "leaf_wise" : "level_wise"},
         {"base_score", p.base_score}};
}

void from_json(const json& j, GbdtParams& p) {
    p = GbdtParams{};
    if (j.contains("n_iterations")) j.at("n_iterations").get_to(p.n_iterations);
    if (j.contains("learning_rate")) j.at("learning_rate").get_to(p.learning_rate);
    if (j.contains("num_leaves")) j.at("num_leaves").get_to(p.num_leaves);
    if (j.contains("max_depth")) j.at("max_depth").get_to(p.max_depth);
    if (j.contains("min_data_in_leaf")) j.at("min_data_in_leaf").get_to(p.min_data_in_leaf);
    if (j.contains("lambda")) j.at("lambda").get_to(p.lambda);
    if (j.contains("gamma")) j.at("gamma").get_to(p.gamma);
    if (j.contains("n_bins")) j.at("n_bins").get_to(p.n_bins);
    if (j.contains("base_score")) j.at("base_score").get_to(p.base_score);
    if (j.contains("growth")) {
        const auto g = j.at("growth").get<std::string>();
        if (g == "leaf_wise") p.growth = GrowthPolicy::LeafWise;
        else if (g == "level_wise") p.growth = GrowthPolicy::LevelWise;
        else throw PreconditionError("unknown growth policy '" + g + "'");
    }
}

void to_json(json& j, const RfParams& p) {
    j = {{"n_trees", p.n_trees},     {"max_depth", p.max_depth}, {"min_samples_leaf", p.min_samples_leaf},
         {"n_bins", p.n_bins},       {"bootstrap", p.bootstrap}, {"feature_sampling", p.feature_sampling}};
}

void from_json(const json& j, RfParams& p) {
    p = RfParams{};
    if (j.contains("n_trees")) j.at("n_trees").get_to(p.n_trees);
    if (j.contains("max_depth")) j.at("max_depth").get_to(p.max_depth);
    if (j.contains("min_samples_leaf")) j.at("min_samples_leaf").get_to(p.min_samples_leaf);
    if (j.contains("n_bins")) j.at("n_bins").get_to(p.n_bins);
    if (j.contains("bootstrap")) j.at("bootstrap").get_to(p.bootstrap);
    if (j.contains("feature_sampling")) j.at("feature_sampling").get_to(p.feature_sampling);
}

void to_json(json& j, const LearnerConfig& c) {
    j = {{"kind", std::string(to_string(c.kind))}, {"gbdt", c.gbdt}, {"rf", c.rf}};
}

void from_json(const json& j, LearnerConfig& c) {
    c = LearnerConfig{};
    if (j.contains("kind")) c.kind = parse_learner_kind(j.at("kind").get<std::string>());
    if (j.contains("gbdt")) j.at("gbdt").get_to(c.gbdt);
    if (j.contains("rf")) j.at("rf").get_to(c.rf);
}

// --- softmax ------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> scores) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        p[k] = std::exp(scores[k] - mx);
        sum += p[k];
    }
    for (double& v : p) v /= sum;
    return p;
}

double softmax_loss(std::span<const double> scores, int label) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - mx);
    return std::log(sum) + mx - scores[static_cast<std::size_t>(label)];
}

GradPair softmax_gradients(std::span<const double> scores, int label) {
    GradPair gp;
    const auto p = softmax(scores);
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double y = static_cast<int>(k) == label ? 1.0 : 0.0;
        gp.grad.push_back(p[k] - y);
        gp.hess.push_back(p[k] * (1.0 - p[k]));
    }
    return gp;
}

// --- boosting ---------------------------------------------------------------------------

namespace {

struct GradBin {
    double g = 0.0;
    double h = 0.0;
    std::size_t n = 0;
};

using GradHist = std::vector<GradBin>;

struct Split {
    double gain = 0.0;
    int feature = -1;
    int bin = -1;
};

struct GbdtNode {
    int id = 0;
    int depth = 0;
    std::vector<std::uint32_t> rows;
    GradHist hist;
    double G = 0.0;
    double H = 0.0;
    Split split;
};

class GbdtTreeBuilder {
public:
    GbdtTreeBuilder(const BinnedData& data, const BinMapper& mapper, const GbdtParams& params,
                    const std::vector<double>& g, const std::vector<double>& h)
        : data_(data), mapper_(mapper), params_(params), g_(g), h_(h) {}

    Tree build() {
        std::vector<std::uint32_t> all(data_.n);
        std::iota(all.begin(), all.end(), 0u);
        GbdtNode root = make_node(std::move(all), 0, nullptr);
        return params_.growth == GrowthPolicy::LeafWise ? grow_leaf_wise(std::move(root))
                                                         : grow_level_wise(std::move(root));
    }

private:
    GbdtNode make_node(std::vector<std::uint32_t> rows, int depth, const GradHist* hist) {
        GbdtNode node;
        node.id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        node.depth = depth;
        node.rows = std::move(rows);
        for (std::uint32_t r : node.rows) {
            node.G += g_[r];
            node.H += h_[r];
        }
        if (hist) node.hist = *hist;
        else node.hist = build_hist(node.rows);
        tree_.nodes[static_cast<std::size_t>(node.id)].count = node.rows.size();
        node.split = find_split(node);
        return node;
    }

    GradHist build_hist(const std::vector<std::uint32_t>& rows) const {
        GradHist hist(data_.total_bins);
        for (std::size_t f = 0; f < data_.p; ++f) {
            GradBin* hf = hist.data() + data_.offset[f];
            const std::uint16_t* bins = data_.bins.data() + f * data_.n;
            for (std::uint32_t r : rows) {
                GradBin& b = hf[bins[r]];
                b.g += g_[r];
                b.h += h_[r];
                ++b.n;
            }
        }
        return hist;
    }

    double score(double G, double H) const { return G * G / (H + params_.lambda); }

    Split find_split(const GbdtNode& node) const {
        Split best;
        const std::size_t min_leaf = static_cast<std::size_t>(params_.min_data_in_leaf);
        if (node.rows.size() < 2 * min_leaf) return best;
        const double parent = score(node.G, node.H);
        for (std::size_t f = 0; f < data_.p; ++f) {
            const GradBin* hf = node.hist.data() + data_.offset[f];
            double GL = 0.0, HL = 0.0;
            std::size_t nL = 0;
            for (std::size_t b = 0; b + 1 < data_.nbins[f]; ++b) {
                GL += hf[b].g;
                HL += hf[b].h;
                nL += hf[b].n;
                const std::size_t nR = node.rows.size() - nL;
                if (nL < min_leaf) continue;
                if (nR < min_leaf) break;
                const double gain =
                    0.5 * (score(GL, HL) + score(node.G - GL, node.H - HL) - parent) - params_.gamma;
                if (gain > best.gain) best = {gain, static_cast<int>(f), static_cast<int>(b)};
            }
        }
        return best;
    }

    std::pair<GbdtNode, GbdtNode> split_node(GbdtNode& node) {
        const auto f = static_cast<std::size_t>(node.split.feature);
        const auto b = static_cast<std::uint16_t>(node.split.bin);
        std::vector<std::uint32_t> left, right;
        for (std::uint32_t r : node.rows) (data_.at(f, r) <= b ? left : right).push_back(r);

        TreeNode& tn = tree_.nodes[static_cast<std::size_t>(node.id)];
        tn.feature = node.split.feature;
        tn.bin = node.split.bin;
        tn.threshold = mapper_.edges[f][b];
        tn.gain = node.split.gain;

        // Histogram of the smaller child is built; the sibling's is derived.
        const bool left_small = left.size() <= right.size();
        GradHist small = build_hist(left_small ? left : right);
        GradHist large = node.hist;
        for (std::size_t i = 0; i < large.size(); ++i) {
            large[i].g -= small[i].g;
            large[i].h -= small[i].h;
            large[i].n -= small[i].n;
        }
        node.hist.clear();
        node.hist.shrink_to_fit();
        GbdtNode l = make_node(std::move(left), node.depth + 1, left_small ? &small : &large);
        GbdtNode r = make_node(std::move(right), node.depth + 1, left_small ? &large : &small);
        tree_.nodes[static_cast<std::size_t>(node.id)].left = l.id;
        tree_.nodes[static_cast<std::size_t>(node.id)].right = r.id;
        return {std::move(l), std::move(r)};
    }

    void finalize_leaf(const GbdtNode& node) {
        TreeNode& tn = tree_.nodes[static_cast<std::size_t>(node.id)];
        tn.value = {-node.G / (node.H + params_.lambda)};
    }

    Tree grow_leaf_wise(GbdtNode root) {
        std::vector<GbdtNode> leaves;
        leaves.push_back(std::move(root));
        while (static_cast<int>(leaves.size()) < params_.num_leaves) {
            std::size_t best = leaves.size();
            for (std::size_t i = 0; i < leaves.size(); ++i) {
                if (leaves[i].split.feature < 0) continue;
                if (best == leaves.size() || leaves[i].split.gain > leaves[best].split.gain ||
                    (leaves[i].split.gain == leaves[best].split.gain && leaves[i].id < leaves[best].id)) {
                    best = i;
                }
            }
            if (best == leaves.size()) break;
            GbdtNode parent = std::move(leaves[best]);
            leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(best));
            auto [l, r] = split_node(parent);
            leaves.push_back(std::move(l));
            leaves.push_back(std::move(r));
        }
        for (const auto& leaf : leaves) finalize_leaf(leaf);
        return std::move(tree_);
    }

    Tree grow_level_wise(GbdtNode root) {
        std::vector<GbdtNode> frontier;
        frontier.push_back(std::move(root));
        while (!frontier.empty()) {
            std::vector<GbdtNode> next;
            for (auto& node : frontier) {
                if (node.depth < params_.max_depth && node.split.feature >= 0) {
                    auto [l, r] = split_node(node);
                    next.push_back(std::move(l));
                    next.push_back(std::move(r));
                } else {
                    finalize_leaf(node);
                }
            }
            frontier = std::move(next);
        }
        return std::move(tree_);
    }

    const BinnedData& data_;
    const BinMapper& mapper_;
    const GbdtParams& params_;
    const std::vector<double>& g_;
    const std::vector<double>& h_;
    Tree tree_;
};

double leaf_output(const Tree& t, std::span<const double> row) { return t.leaf_for(row).value.at(0); }

}  // namespace

std::vector<double> GbdtModel::raw_scores(std::span<const double> row, std::optional<std::size_t> iters) const {
    if (row.size() != feature_names.size()) {
        throw PreconditionError("row has " + std::to_string(row.size()) + " values, model expects " +
                                std::to_string(feature_names.size()));
    }
    const std::size_t K = static_cast<std::size_t>(n_classes);
    const std::size_t T = std::min(iters.value_or(iterations()), iterations());
    std::vector<double> sums(K, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < K; ++k) sums[k] += leaf_output(trees[t * K + k], row);
    }
    std::vector<double> out(K);
    for (std::size_t k = 0; k < K; ++k) out[k] = params.base_score + params.learning_rate * sums[k];
    return out;
}

GbdtModel fit_gbdt(const FeatureMatrix& matrix, const GbdtParams& params, std::uint64_t seed) {
    params.validate();
    check_training_input(matrix);
    if (matrix.rows() < 2 * static_cast<std::size_t>(params.min_data_in_leaf)) {
        throw PreconditionError("gbdt needs at least 2 * min_data_in_leaf rows");
    }
    GbdtModel model;
    model.n_classes = std::max(2, matrix.class_count());
    model.params = params;
    model.feature_names = matrix.columns();
    model.bins = BinMapper::fit(matrix, params.n_bins);
    model.seed = seed;

    const BinnedData data = bin_matrix(matrix, model.bins);
    const std::size_t n = matrix.rows();
    const std::size_t K = static_cast<std::size_t>(model.n_classes);
    std::vector<double> sums(n * K, 0.0);
    std::vector<std::vector<double>> g(K, std::vector<double>(n)), h(K, std::vector<double>(n));
    std::vector<double> scores(K);

    for (int it = 0; it < params.n_iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < K; ++k) scores[k] = params.base_score + params.learning_rate * sums[i * K + k];
            const auto gp = softmax_gradients(scores, matrix.labels()[i]);
            for (std::size_t k = 0; k < K; ++k) {
                g[k][i] = gp.grad[k];
                h[k][i] = gp.hess[k];
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            Tree tree = GbdtTreeBuilder(data, model.bins, params, g[k], h[k]).build();
            for (std::size_t i = 0; i < n; ++i) sums[i * K + k] += leaf_output(tree, matrix.row(i));
            model.trees.push_back(std::move(tree));
        }
    }
    return model;
}

double training_loss(const GbdtModel& model, const FeatureMatrix& matrix, std::optional<std::size_t> iterations) {
    double total = 0.0;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        total += softmax_loss(model.raw_scores(matrix.row(i), iterations), matrix.labels()[i]);
    }
    return total / static_cast<double>(matrix.rows());
}

// --- forests ---------------------------------------------------------------------------

namespace {

double weighted_gini(const std::vector<std::size_t>& counts, std::size_t n) {
    if (n == 0) return 0.0;
    double sq = 0.0;
    for (std::size_t c : counts) sq += static_cast<double>(c) * static_cast<double>(c);
    return static_cast<double>(n) - sq / static_cast<double>(n);
}

class GiniTreeBuilder {
public:
    GiniTreeBuilder(const BinnedData& data, const BinMapper& mapper, const std::vector<int>& labels, int n_classes,
                    const RfParams& params, std::uint64_t seed)
        : data_(data), mapper_(mapper), labels_(labels), K_(static_cast<std::size_t>(n_classes)), params_(params),
          rng_(seed) {}

    Tree build(std::vector<std::uint32_t> rows) {
        struct Work {
            int id;
            int depth;
            std::vector<std::uint32_t> rows;
        };
        std::vector<Work> stack;
        tree_.nodes.emplace_back();
        stack.push_back({0, 0, std::move(rows)});
        while (!stack.empty()) {
            Work w = std::move(stack.back());
            stack.pop_back();
            std::vector<std::size_t> counts(K_, 0);
            for (std::uint32_t r : w.rows) ++counts[static_cast<std::size_t>(labels_[r])];
            TreeNode& tn = tree_.nodes[static_cast<std::size_t>(w.id)];
            tn.count = w.rows.size();

            const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
            const bool depth_ok = params_.max_depth < 0 || w.depth < params_.max_depth;
            Split best;
            if (!pure && depth_ok && w.rows.size() >= 2 * static_cast<std::size_t>(params_.min_samples_leaf)) {
                best = find_split(w.rows, counts);
            }
            if (best.feature < 0) {
                TreeNode& leaf = tree_.nodes[static_cast<std::size_t>(w.id)];
                leaf.value.resize(K_);
                for (std::size_t k = 0; k < K_; ++k) {
                    leaf.value[k] = static_cast<double>(counts[k]) / static_cast<double>(w.rows.size());
                }
                continue;
            }
            const auto f = static_cast<std::size_t>(best.feature);
            const auto b = static_cast<std::uint16_t>(best.bin);
            std::vector<std::uint32_t> left, right;
            for (std::uint32_t r : w.rows) (data_.at(f, r) <= b ? left : right).push_back(r);
            const int lid = static_cast<int>(tree_.nodes.size());
            tree_.nodes.emplace_back();
            tree_.nodes.emplace_back();
            TreeNode& split = tree_.nodes[static_cast<std::size_t>(w.id)];
            split.feature = best.feature;
            split.bin = best.bin;
            split.threshold = mapper_.edges[f][b];
            split.gain = best.gain;
            split.left = lid;
            split.right = lid + 1;
            // Right pushed first so the left subtree is expanded first.
            stack.push_back({lid + 1, w.depth + 1, std::move(right)});
            stack.push_back({lid, w.depth + 1, std::move(left)});
        }
        return std::move(tree_);
    }

private:
    std::vector<std::size_t> candidate_order() {
        std::vector<std::size_t> order(data_.p);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (!params_.feature_sampling) return order;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            std::swap(order[i], order[i + rng_.below(order.size() - i)]);
        }
        return order;
    }

    Split find_split(const std::vector<std::uint32_t>& rows, const std::vector<std::size_t>& counts) {
        const std::size_t n = rows.size();
        const std::size_t min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        const double parent = weighted_gini(counts, n);
        const std::size_t mtry = params_.feature_sampling
                                     ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(data_.p))))
                                     : data_.p;
        Split best;
        const auto order = candidate_order();
        std::vector<std::size_t> hist;
        std::vector<std::size_t> left(K_), right(K_);
        for (std::size_t c = 0; c < order.size(); ++c) {
            // Keep scanning past mtry only until some valid split exists.
            if (c >= mtry && best.feature >= 0) break;
            const std::size_t f = order[c];
            const std::size_t nb = data_.nbins[f];
            hist.assign(nb * K_, 0);
            for (std::uint32_t r : rows) ++hist[data_.at(f, r) * K_ + static_cast<std::size_t>(labels_[r])];
            std::fill(left.begin(), left.end(), 0);
            std::size_t nL = 0;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                for (std::size_t k = 0; k < K_; ++k) {
                    left[k] += hist[b * K_ + k];
                    nL += hist[b * K_ + k];
                }
                const std::size_t nR = n - nL;
                if (nL < min_leaf) continue;
                if (nR < min_leaf) break;
                for (std::size_t k = 0; k < K_; ++k) right[k] = counts[k] - left[k];
                const double decrease = parent - weighted_gini(left, nL) - weighted_gini(right, nR);
                if (decrease > 1e-12 && decrease > best.gain) {
                    best = {decrease, static_cast<int>(f), static_cast<int>(b)};
                }
            }
        }
        return best;
    }

    const BinnedData& data_;
    const BinMapper& mapper_;
    const std::vector<int>& labels_;
    std::size_t K_;
    const RfParams& params_;
    Rng rng_;
    Tree tree_;
};

}  // namespace

Tree fit_decision_tree(const FeatureMatrix& matrix, const RfParams& params, const BinMapper& bins) {
    params.validate();
    check_training_input(matrix);
    RfParams p = params;
    p.feature_sampling = false;
    const BinnedData data = bin_matrix(matrix, bins);
    std::vector<std::uint32_t> rows(matrix.rows());
    std::iota(rows.begin(), rows.end(), 0u);
    return GiniTreeBuilder(data, bins, matrix.labels(), std::max(2, matrix.class_count()), p, 0).build(std::move(rows));
}

RfModel fit_random_forest(const FeatureMatrix& matrix, const RfParams& params, std::uint64_t seed) {
    params.validate();
    check_training_input(matrix);
    RfModel model;
    model.n_classes = std::max(2, matrix.class_count());
    model.params = params;
    model.feature_names = matrix.columns();
    model.bins = BinMapper::fit(matrix, params.n_bins);
    model.seed = seed;

    const BinnedData data = bin_matrix(matrix, model.bins);
    const std::size_t n = matrix.rows();
    const std::size_t T = static_cast<std::size_t>(params.n_trees);
    for (std::size_t t = 0; t < T; ++t) model.tree_seeds.push_back(mix_seed(seed, t));
    model.trees.resize(T);
    std::vector<std::vector<char>> in_bag(T);

    parallel_for(T, params.threads, [&](std::size_t t) {
        Rng rng(model.tree_seeds[t]);
        std::vector<std::uint32_t> rows(n);
        in_bag[t].assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            rows[i] = params.bootstrap ? static_cast<std::uint32_t>(rng.below(n)) : static_cast<std::uint32_t>(i);
            in_bag[t][rows[i]] = 1;
        }
        model.trees[t] = GiniTreeBuilder(data, model.bins, matrix.labels(), model.n_classes, params, rng.next())
                             .build(std::move(rows));
    });

    if (params.bootstrap) {
        const std::size_t K = static_cast<std::size_t>(model.n_classes);
        std::size_t scored = 0, correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> acc(K, 0.0);
            bool any = false;
            for (std::size_t t = 0; t < T; ++t) {
                if (in_bag[t][i]) continue;
                const auto& v = model.trees[t].leaf_for(matrix.row(i)).value;
                for (std::size_t k = 0; k < K; ++k) acc[k] += v[k];
                any = true;
            }
            if (!any) continue;
            ++scored;
            const auto pred = std::max_element(acc.begin(), acc.end()) - acc.begin();
            if (pred == matrix.labels()[i]) ++correct;
        }
        if (scored > 0) model.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
    }
    return model;
}

EnsembleModel fit_model(const FeatureMatrix& matrix, const LearnerConfig& config, std::uint64_t seed) {
    switch (config.kind) {
        case LearnerKind::GbdtLeafWise: {
            GbdtParams p = config.gbdt;
            p.growth = GrowthPolicy::LeafWise;
            return fit_gbdt(matrix, p, seed);
        }
        case LearnerKind::GbdtLevelWise: {
            GbdtParams p = config.gbdt;
            p.growth = GrowthPolicy::LevelWise;
            return fit_gbdt(matrix, p, seed);
        }
        case LearnerKind::RandomForest: return fit_random_forest(matrix, config.rf, seed);
    }
    throw PreconditionError("unknown learner kind");
}

// --- inference --------------------------------------------------------------------------

std::vector<double> predict_proba(const GbdtModel& model, std::span<const double> row) {
    return softmax(model.raw_scores(row));
}

std::vector<double> predict_proba(const RfModel& model, std::span<const double> row) {
    if (row.size() != model.feature_names.size()) {
        throw PreconditionError("row has " + std::to_string(row.size()) + " values, model expects " +
                                std::to_string(model.feature_names.size()));
    }
    const std::size_t K = static_cast<std::size_t>(model.n_classes);
    std::vector<double> acc(K, 0.0);
    for (const auto& t : model.trees) {
        const auto& v = t.leaf_for(row).value;
        for (std::size_t k = 0; k < K; ++k) acc[k] += v[k];
    }
    for (double& v : acc) v /= static_cast<double>(model.trees.size());
    return acc;
}

std::vector<double> predict_proba(const EnsembleModel& model, std::span<const double> row) {
    return std::visit([&](const auto& m) { return predict_proba(m, row); }, model);
}

std::vector<double> predict_proba(const Tree& tree, std::span<const double> row) { return tree.leaf_for(row).value; }

int predict_class(const EnsembleModel& model, std::span<const double> row) {
    const auto p = predict_proba(model, row);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> predict_classes(const EnsembleModel& model, const FeatureMatrix& matrix) {
    std::vector<int> out(matrix.rows());
    for (std::size_t i = 0; i < matrix.rows(); ++i) out[i] = predict_class(model, matrix.row(i));
    return out;
}

namespace {

std::vector<double> split_totals(const std::vector<Tree>& trees, std::size_t p) {
    std::vector<double> imp(p, 0.0);
    for (const auto& t : trees) {
        for (const auto& n : t.nodes) {
            if (!n.is_leaf()) imp[static_cast<std::size_t>(n.feature)] += n.gain;
        }
    }
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0) {
        for (double& v : imp) v /= total;
    }
    return imp;
}

}  // namespace

std::vector<double> feature_importance(const GbdtModel& model) {
    return split_totals(model.trees, model.feature_names.size());
}

std::vector<double> feature_importance(const RfModel& model) {
    return split_totals(model.trees, model.feature_names.size());
}

std::vector<double> feature_importance(const EnsembleModel& model) {
    return std::visit([](const auto& m) { return feature_importance(m); }, model);
}

const std::vector<std::string>& feature_names(const EnsembleModel& model) {
    return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.feature_names; }, model);
}

// --- serialization ----------------------------------------------------------------------

namespace {

json tree_to_json(const Tree& t) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
        json j = {{"count", n.count}};
        if (n.is_leaf()) {
            j["value"] = n.value;
        } else {
            j["feature"] = n.feature;
            j["bin"] = n.bin;
            j["threshold"] = n.threshold;
            j["left"] = n.left;
            j["right"] = n.right;
            j["default_left"] = n.default_left;
            j["gain"] = n.gain;
        }
        nodes.push_back(std::move(j));
    }
    return nodes;
}

Tree tree_from_json(const json& j, std::size_t n_features) {
    Tree t;
    for (const auto& jn : j) {
        TreeNode n;
        n.count = jn.at("count").get<std::size_t>();
        if (jn.contains("value")) {
            jn.at("value").get_to(n.value);
            if (n.value.empty()) throw FormatError("leaf without value");
        } else {
            n.feature = jn.at("feature").get<int>();
            n.bin = jn.at("bin").get<int>();
            n.threshold = jn.at("threshold").get<double>();
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
            n.default_left = jn.at("default_left").get<bool>();
            n.gain = jn.at("gain").get<double>();
        }
        t.nodes.push_back(std::move(n));
    }
    if (t.nodes.empty()) throw FormatError("empty tree");
    const int size = static_cast<int>(t.nodes.size());
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const auto& n = t.nodes[i];
        if (n.is_leaf()) continue;
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_features || n.left <= static_cast<int>(i) ||
            n.right <= static_cast<int>(i) || n.left >= size || n.right >= size) {
            throw FormatError("malformed tree node " + std::to_string(i));
        }
    }
    return t;
}

json common_fields(std::string_view kind, int n_classes, const std::vector<std::string>& names, const BinMapper& bins,
                   const std::vector<Tree>& trees, std::uint64_t seed) {
    json jt = json::array();
    for (const auto& t : trees) jt.push_back(tree_to_json(t));
    return {{"schema_version", kModelSchemaVersion},
            {"kind", kind},
            {"n_classes", n_classes},
            {"feature_names", names},
            {"bin_edges", bins.edges},
            {"trees", std::move(jt)},
            {"seed", seed}};
}

}  // namespace

std::string serialize(const EnsembleModel& model) {
    json j;
    if (const auto* g = std::get_if<GbdtModel>(&model)) {
        j = common_fields(g->params.growth == GrowthPolicy::LeafWise ? "gbdt_leafwise" : "gbdt_levelwise", g->n_classes,
                          g->feature_names, g->bins, g->trees, g->seed);
        j["params"] = g->params;
    } else {
        const auto& r = std::get<RfModel>(model);
        j = common_fields("random_forest", r.n_classes, r.feature_names, r.bins, r.trees, r.seed);
        j["params"] = r.params;
        j["tree_seeds"] = r.tree_seeds;
        j["oob_accuracy"] = r.oob_accuracy ? json(*r.oob_accuracy) : json(nullptr);
    }
    return j.dump();
}

EnsembleModel deserialize(std::string_view payload) {
    json j;
    try {
        j = json::parse(payload);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("model payload is not valid JSON: ") + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("schema_version")) throw FormatError("model payload lacks schema_version");
        const int version = j.at("schema_version").get<int>();
        if (version != kModelSchemaVersion) {
            throw VersionError("unsupported model schema_version " + std::to_string(version) + " (expected " +
                               std::to_string(kModelSchemaVersion) + ")");
        }
        const auto kind = parse_learner_kind(j.at("kind").get<std::string>());
        const auto names = j.at("feature_names").get<std::vector<std::string>>();
        BinMapper bins;
        j.at("bin_edges").get_to(bins.edges);
        std::vector<Tree> trees;
        for (const auto& jt : j.at("trees")) trees.push_back(tree_from_json(jt, names.size()));
        const int n_classes = j.at("n_classes").get<int>();
        if (n_classes < 2) throw FormatError("n_classes must be >= 2");
        for (const auto& t : trees) {
            for (const auto& n : t.nodes) {
                if (n.is_leaf() && n.value.size() != (kind == LearnerKind::RandomForest ? std::size_t(n_classes) : 1)) {
                    throw FormatError("leaf value has the wrong width");
                }
            }
        }
        const auto seed = j.at("seed").get<std::uint64_t>();
        if (kind == LearnerKind::RandomForest) {
            RfModel m;
            m.n_classes = n_classes;
            m.params = j.at("params").get<RfParams>();
            m.feature_names = names;
            m.bins = std::move(bins);
            m.trees = std::move(trees);
            m.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
            if (!j.at("oob_accuracy").is_null()) m.oob_accuracy = j.at("oob_accuracy").get<double>();
            m.seed = seed;
            if (m.trees.empty()) throw FormatError("forest without trees");
            return m;
        }
        GbdtModel m;
        m.n_classes = n_classes;
        m.params = j.at("params").get<GbdtParams>();
        m.feature_names = names;
        m.bins = std::move(bins);
        m.trees = std::move(trees);
        m.seed = seed;
        if (m.trees.size() % static_cast<std::size_t>(n_classes) != 0) {
            throw FormatError("tree count is not a multiple of the class count");
        }
        return m;
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("malformed model payload: ") + e.what());
    }
}

}  // namespace gridsense
