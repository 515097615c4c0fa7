#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/gpr.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

enum class TreeFamily { cart, rfr, gbm };

std::string_view to_string(TreeFamily f);
TreeFamily parse_tree_family(std::string_view text);

struct TreeOptions {
    TreeFamily family = TreeFamily::cart;
    int max_depth = -1;    // -1: grow until leaves are pure or too small
    int min_leaf = 1;
    int n_trees = 100;     // trees for rfr, boosting rounds for gbm
    int max_features = 0;  // features tried per split; 0 means all
    bool bootstrap = true; // rfr only
    double shrinkage = 0.1;  // gbm only
    std::uint64_t seed = 0;
    int workers = 1;
};

/// Multi-output regression tree; every leaf stores a mean vector.
struct RegressionTree {
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0;
        int left = -1;
        int right = -1;
        int leaf = -1;     // row of `values` for leaves
    };
    std::vector<Node> nodes;
    RowMatrix values;

    const double* find(const double* x) const;
    int depth() const;
};

class TreeModel {
public:
    TreeFamily family = TreeFamily::cart;
    Eigen::VectorXd f0;  // gbm initial constant, zero otherwise
    double shrinkage = 1.0;
    std::vector<RegressionTree> trees;
    std::vector<double> train_mse;  // gbm: training MSE after each round
    int inputs = 0;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& Xs) const;
    json to_json() const;
    static TreeModel from_json(const json& j);
};

TreeModel tree_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const TreeOptions& opts);

/// One tree grown on the given rows; splits minimize the summed per-output
/// squared error.
RegressionTree grow_tree(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<std::size_t>& rows,
                         int max_depth, int min_leaf, int max_features, Rng* feature_rng);

}  // namespace sisurr
