#include "sisurr/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sisurr/error.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

std::string_view to_string(TreeFamily f)
{
    switch (f) {
    case TreeFamily::cart: return "cart";
    case TreeFamily::rfr: return "rfr";
    case TreeFamily::gbm: return "gbm";
    }
    return "cart";
}

TreeFamily parse_tree_family(std::string_view text)
{
    if (text == "cart") return TreeFamily::cart;
    if (text == "rfr") return TreeFamily::rfr;
    if (text == "gbm") return TreeFamily::gbm;
    fail(ErrorCode::invalid_hyper, "unknown tree family '" + std::string(text) + "'");
}

const double* RegressionTree::find(const double* x) const
{
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return values.data() + static_cast<Eigen::Index>(nodes[static_cast<std::size_t>(i)].leaf) * values.cols();
}

int RegressionTree::depth() const
{
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        if (n.feature < 0) continue;
        d[static_cast<std::size_t>(n.left)] = d[static_cast<std::size_t>(n.right)] = d[i] + 1;
        best = std::max(best, d[i] + 1);
    }
    return best;
}

namespace {

struct Grower {
    const Eigen::MatrixXd& X;
    const Eigen::MatrixXd& Y;
    int max_depth;
    int min_leaf;
    int max_features;
    Rng* rng;
    RegressionTree tree;
    std::vector<std::vector<double>> leaf_values;

    int make_leaf(const std::vector<std::size_t>& rows)
    {
        std::vector<double> mean(static_cast<std::size_t>(Y.cols()), 0.0);
        for (auto r : rows)
            for (Eigen::Index c = 0; c < Y.cols(); ++c) mean[static_cast<std::size_t>(c)] += Y(static_cast<Eigen::Index>(r), c);
        for (auto& v : mean) v /= static_cast<double>(rows.size());
        RegressionTree::Node n;
        n.leaf = static_cast<int>(leaf_values.size());
        leaf_values.push_back(std::move(mean));
        tree.nodes.push_back(n);
        return static_cast<int>(tree.nodes.size()) - 1;
    }

    bool constant_targets(const std::vector<std::size_t>& rows) const
    {
        const auto first = static_cast<Eigen::Index>(rows.front());
        for (auto r : rows)
            if (Y.row(static_cast<Eigen::Index>(r)) != Y.row(first)) return false;
        return true;
    }

    int grow(std::vector<std::size_t> rows, int depth)
    {
        const auto n = rows.size();
        if ((max_depth >= 0 && depth >= max_depth) || n < 2 * static_cast<std::size_t>(min_leaf) ||
            constant_targets(rows))
            return make_leaf(rows);

        const Eigen::Index q = Y.cols();
        const int d = static_cast<int>(X.cols());
        std::vector<int> features(static_cast<std::size_t>(d));
        std::iota(features.begin(), features.end(), 0);
        if (max_features > 0 && max_features < d && rng) {
            for (int i = 0; i < max_features; ++i) {
                std::uniform_int_distribution<int> pick(i, d - 1);
                std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(pick(*rng))]);
            }
            features.resize(static_cast<std::size_t>(max_features));
        }

        std::vector<double> total(static_cast<std::size_t>(q), 0.0), left(static_cast<std::size_t>(q));
        for (auto r : rows)
            for (Eigen::Index c = 0; c < q; ++c) total[static_cast<std::size_t>(c)] += Y(static_cast<Eigen::Index>(r), c);

        double best_score = -1;
        int best_feature = -1;
        double best_threshold = 0;
        std::vector<std::size_t> order = rows;
        for (int f : features) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return X(static_cast<Eigen::Index>(a), f) < X(static_cast<Eigen::Index>(b), f);
            });
            std::fill(left.begin(), left.end(), 0.0);
            for (std::size_t p = 0; p + 1 < n; ++p) {
                const auto r = static_cast<Eigen::Index>(order[p]);
                for (Eigen::Index c = 0; c < q; ++c) left[static_cast<std::size_t>(c)] += Y(r, c);
                const std::size_t nl = p + 1, nr = n - nl;
                if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf)) continue;
                const double xa = X(r, f), xb = X(static_cast<Eigen::Index>(order[p + 1]), f);
                if (!(xa < xb)) continue;
                // maximizing sum_c (S_L^2/n_L + S_R^2/n_R) minimizes the summed SSE
                double sl = 0, sr = 0;
                for (Eigen::Index c = 0; c < q; ++c) {
                    const double a = left[static_cast<std::size_t>(c)];
                    const double b = total[static_cast<std::size_t>(c)] - a;
                    sl += a * a;
                    sr += b * b;
                }
                const double score = sl / static_cast<double>(nl) + sr / static_cast<double>(nr);
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = 0.5 * (xa + xb);
                    if (!(best_threshold < xb)) best_threshold = xa;
                }
            }
        }
        if (best_feature < 0) return make_leaf(rows);

        std::vector<std::size_t> lrows, rrows;
        for (auto r : rows) (X(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? lrows : rrows).push_back(r);
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({best_feature, best_threshold, -1, -1, -1});
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(std::move(lrows), depth + 1);
        const int r = grow(std::move(rrows), depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left = l;
        tree.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

void check_options(const TreeOptions& o, Eigen::Index n, Eigen::Index d)
{
    if (o.min_leaf < 1) fail(ErrorCode::invalid_hyper, "min_leaf must be at least 1");
    if (o.min_leaf > n)
        fail(ErrorCode::invalid_hyper, "min_leaf " + std::to_string(o.min_leaf) + " leaves no room for a leaf with " +
                                           std::to_string(n) + " rows");
    if (o.n_trees < 1) fail(ErrorCode::invalid_hyper, "need at least one tree");
    if (o.max_depth < -1) fail(ErrorCode::invalid_hyper, "max_depth must be -1 or non-negative");
    if (o.max_features < 0 || o.max_features > d)
        fail(ErrorCode::invalid_hyper, "max_features must lie in [0, " + std::to_string(d) + "]");
    if (o.family == TreeFamily::gbm && !(o.shrinkage > 0 && o.shrinkage <= 1))
        fail(ErrorCode::invalid_hyper, "shrinkage must lie in (0, 1]");
}

}  // namespace

RegressionTree grow_tree(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<std::size_t>& rows,
                         int max_depth, int min_leaf, int max_features, Rng* feature_rng)
{
    if (rows.empty()) fail(ErrorCode::invalid_hyper, "cannot grow a tree on zero rows");
    Grower g{X, Y, max_depth, min_leaf, max_features, feature_rng, {}, {}};
    g.grow(rows, 0);
    g.tree.values.resize(static_cast<Eigen::Index>(g.leaf_values.size()), Y.cols());
    for (std::size_t i = 0; i < g.leaf_values.size(); ++i)
        for (Eigen::Index c = 0; c < Y.cols(); ++c) g.tree.values(static_cast<Eigen::Index>(i), c) = g.leaf_values[i][static_cast<std::size_t>(c)];
    return std::move(g.tree);
}

TreeModel tree_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const TreeOptions& opts)
{
    if (X.rows() != Y.rows()) fail(ErrorCode::dimension_mismatch, "tree inputs and targets differ in row count");
    if (X.rows() < 1) fail(ErrorCode::insufficient_data, "trees need training rows");
    require_unit_inputs(X, "tree model");
    check_options(opts, X.rows(), X.cols());
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);

    TreeModel m;
    m.family = opts.family;
    m.inputs = static_cast<int>(X.cols());
    m.f0 = Eigen::VectorXd::Zero(Y.cols());
    switch (opts.family) {
    case TreeFamily::cart: {
        m.trees.push_back(grow_tree(X, Y, all, opts.max_depth, opts.min_leaf, 0, nullptr));
        break;
    }
    case TreeFamily::rfr: {
        m.trees.resize(static_cast<std::size_t>(opts.n_trees));
        parallel_for(m.trees.size(), opts.workers, [&](std::size_t t) {
            Rng rng(derive_seed(opts.seed, t));
            std::vector<std::size_t> rows = all;
            if (opts.bootstrap) {
                std::uniform_int_distribution<std::size_t> pick(0, n - 1);
                for (auto& r : rows) r = pick(rng);
            }
            m.trees[t] = grow_tree(X, Y, rows, opts.max_depth, opts.min_leaf, opts.max_features, &rng);
        });
        break;
    }
    case TreeFamily::gbm: {
        m.shrinkage = opts.shrinkage;
        m.f0 = Y.colwise().mean().transpose();
        Eigen::MatrixXd F = m.f0.transpose().replicate(X.rows(), 1);
        Rng rng(derive_seed(opts.seed, "gbm"));
        for (int round = 0; round < opts.n_trees; ++round) {
            const Eigen::MatrixXd R = Y - F;
            auto tree = grow_tree(X, R, all, opts.max_depth, opts.min_leaf, opts.max_features, &rng);
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                const Eigen::VectorXd xi = X.row(i).transpose();
                const double* v = tree.find(xi.data());
                for (Eigen::Index c = 0; c < Y.cols(); ++c) F(i, c) += opts.shrinkage * v[c];
            }
            m.train_mse.push_back((Y - F).squaredNorm() / static_cast<double>(Y.size()));
            m.trees.push_back(std::move(tree));
        }
        break;
    }
    }
    return m;
}

Eigen::MatrixXd TreeModel::predict(const Eigen::MatrixXd& Xs) const
{
    if (Xs.cols() != inputs) fail(ErrorCode::dimension_mismatch, "tree model input width mismatch");
    require_unit_inputs(Xs, "tree model");
    const Eigen::Index q = trees.empty() ? f0.size() : trees.front().values.cols();
    Eigen::MatrixXd out(Xs.rows(), q);
    std::vector<double> acc(static_cast<std::size_t>(q));
    Eigen::VectorXd xi(Xs.cols());
    for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
        xi = Xs.row(i).transpose();
        std::fill(acc.begin(), acc.end(), 0.0);
        for (const auto& t : trees) {
            const double* v = t.find(xi.data());
            for (Eigen::Index c = 0; c < q; ++c) acc[static_cast<std::size_t>(c)] += v[c];
        }
        for (Eigen::Index c = 0; c < q; ++c) {
            const double sum = acc[static_cast<std::size_t>(c)];
            out(i, c) = family == TreeFamily::gbm ? f0[c] + shrinkage * sum : sum / static_cast<double>(trees.size());
        }
    }
    return out;
}

json TreeModel::to_json() const
{
    json ts = json::array();
    for (const auto& t : trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf});
        ts.push_back({{"nodes", nodes}, {"values", matrix_to_json(t.values)}});
    }
    return {{"family", to_string(family)}, {"f0", vector_to_json(f0)}, {"shrinkage", shrinkage},
            {"inputs", inputs},            {"train_mse", train_mse}, {"trees", ts}};
}

TreeModel TreeModel::from_json(const json& j)
{
    TreeModel m;
    m.family = parse_tree_family(j.at("family").get<std::string>());
    m.f0 = vector_from_json(j.at("f0"));
    m.shrinkage = j.at("shrinkage").get<double>();
    m.inputs = j.at("inputs").get<int>();
    m.train_mse = j.at("train_mse").get<std::vector<double>>();
    for (const auto& tj : j.at("trees")) {
        RegressionTree t;
        for (const auto& nj : tj.at("nodes"))
            t.nodes.push_back({nj[0].get<int>(), nj[1].get<double>(), nj[2].get<int>(), nj[3].get<int>(), nj[4].get<int>()});
        t.values = matrix_from_json(tj.at("values"));
        m.trees.push_back(std::move(t));
    }
    return m;
}

}  // namespace sisurr
