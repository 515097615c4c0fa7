#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/gpr.hpp"

namespace sisurr {

struct MlpOptions {
    std::vector<int> hidden{64, 64};
    int epochs = 500;
    int batch = 64;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int patience = 20;
    bool standardize_targets = true;
    std::uint64_t seed = 0;
};

/// Fully connected network, rectifier hidden layers, linear output layer.
/// Weights are stored input-major (fan_in x fan_out).
class MlpModel {
public:
    std::vector<RowMatrix> W;
    std::vector<Eigen::VectorXd> b;
    Eigen::VectorXd y_offset;
    Eigen::VectorXd y_scale;
    int best_epoch = 0;
    int epochs_run = 0;
    double best_val = 0;

    int inputs() const { return W.empty() ? 0 : static_cast<int>(W.front().rows()); }
    int outputs() const { return W.empty() ? 0 : static_cast<int>(W.back().cols()); }
    std::vector<int> widths() const;

    /// Random initialization (He-uniform hidden, Glorot-uniform output).
    static MlpModel init(const std::vector<int>& widths, std::uint64_t seed);

    Eigen::MatrixXd predict(const Eigen::MatrixXd& Xs) const;
    /// Network output before de-standardization, batched.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;

    Eigen::VectorXd flat_parameters() const;
    void set_flat_parameters(const Eigen::VectorXd& p);

    json to_json() const;
    static MlpModel from_json(const json& j);
};

/// Mean over all entries of (f(X) - Y)^2 in network output units; fills the
/// gradient with respect to flat_parameters() when grad is given.
double mlp_loss(const MlpModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, Eigen::VectorXd* grad = nullptr);

/// Adam on minibatches with early stopping on the validation set (patience
/// epochs without improvement); returns the best-validation weights. With an
/// empty validation set the training loss drives early stopping.
MlpModel mlp_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Xval,
                 const Eigen::MatrixXd& Yval, const MlpOptions& opts);

class EnsembleModel {
public:
    std::vector<MlpModel> members;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& Xs) const;
    json to_json() const;
    static EnsembleModel from_json(const json& j);
};

/// K members that differ only in their seed, derive_seed(base_seed, k).
EnsembleModel ensemble_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Xval,
                           const Eigen::MatrixXd& Yval, const MlpOptions& opts, int k, int workers = 1);

}  // namespace sisurr
