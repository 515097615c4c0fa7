#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/kernel.hpp"

namespace sisurr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Throws out_of_domain unless every entry lies in [0, 1] (inputs are
/// normalized by the parameter space before they reach a model).
void require_unit_inputs(const Eigen::MatrixXd& X, const char* model);

struct GprOptions {
    KernelForm form = KernelForm::aniso;
    int restarts = 5;
    int max_iters = 100;
    /// Hyperparameters are fitted on a seeded subset of at most this many rows.
    std::size_t hyper_subset = 1000;
    /// Exact solves are capped at this many training rows.
    std::size_t max_train = 5000;
    /// Above the cap, train on a seeded subset instead of failing.
    bool subsample_over_cap = false;
    /// One hyperparameter set for all outputs instead of one per output.
    bool shared_kernel = false;
    bool optimize = true;
    /// Used when optimize is false.
    KernelSpec kernel;
    double noise_var = 1e-6;
    bool center_targets = true;
    bool scale_targets = true;
    std::uint64_t seed = 0;
    int workers = 1;
};

/// Outputs that share one kernel, noise level and factorization.
struct GprGroup {
    KernelSpec kernel;
    double noise_var = 0;
    double jitter = 0;  // diagonal added on top of noise_var to factorize
    double nlml = 0;
    std::vector<int> outputs;
    RowMatrix alpha;  // N x |outputs|, (K + (noise + jitter) I)^-1 y
};

class GprModel {
public:
    Eigen::MatrixXd X;  // training inputs actually used
    Eigen::VectorXd y_offset;
    Eigen::VectorXd y_scale;
    std::vector<GprGroup> groups;
    std::size_t rows_offered = 0;
    bool subsampled = false;

    std::size_t outputs() const { return static_cast<std::size_t>(y_offset.size()); }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& Xs) const;
    /// Latent predictive variance per output, in target units.
    Eigen::MatrixXd predict_variance(const Eigen::MatrixXd& Xs) const;

    json to_json() const;
    static GprModel from_json(const json& j);

private:
    friend GprModel gpr_fit(const Eigen::MatrixXd&, const Eigen::MatrixXd&, const GprOptions&);
    struct Factor {
        std::once_flag once;
        std::vector<Eigen::LLT<Eigen::MatrixXd>> llt;
    };
    mutable std::shared_ptr<Factor> factor_ = std::make_shared<Factor>();
    const std::vector<Eigen::LLT<Eigen::MatrixXd>>& factors() const;
};

GprModel gpr_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const GprOptions& opts = {});

/// Hyperparameter vector layout: log signal_var, log lengthscale(s), log noise_var.
Eigen::VectorXd gpr_theta(const KernelSpec& k, double noise_var);
KernelSpec gpr_kernel_from_theta(const Eigen::VectorXd& theta, KernelForm form);

/// Negative log marginal likelihood summed over the columns of Y, which share
/// the kernel. Returns +inf when the Gram matrix cannot be factorized.
double gpr_nlml(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, KernelForm form, const Eigen::VectorXd& theta,
                Eigen::VectorXd* grad = nullptr);

/// Cholesky of K + noise I with the jitter ladder 1e-10 .. 1e-6 (relative to
/// the mean diagonal). Throws ill_conditioned with a condition estimate.
Eigen::LLT<Eigen::MatrixXd> factorize_gram(Eigen::MatrixXd K, double noise_var, double* jitter_used = nullptr);

}  // namespace sisurr
