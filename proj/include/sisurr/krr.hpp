#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "sisurr/gpr.hpp"
#include "sisurr/kernel.hpp"

namespace sisurr {

enum class OutputKernel { identity, output_correlation };

std::string_view to_string(OutputKernel b);
OutputKernel parse_output_kernel(std::string_view text);

struct KrrOptions {
    KernelSpec kernel;
    double lambda = 1e-3;
    OutputKernel b_mode = OutputKernel::identity;
    bool center_targets = true;
};

/// Vector-valued kernel ridge regression with a separable kernel k(x, x') B.
/// Coefficients solve (B kron K + lambda I) vec(C) = vec(Y); predictions are
/// k(x*, X) C B. With B = I this is ordinary per-output ridge regression.
class KrrModel {
public:
    KernelSpec kernel;
    double lambda = 0;
    OutputKernel b_mode = OutputKernel::identity;
    Eigen::MatrixXd X;
    Eigen::VectorXd y_offset;
    Eigen::VectorXd y_scale;
    Eigen::MatrixXd B;   // Q x Q
    RowMatrix CB;        // N x Q, C B precomputed for prediction

    Eigen::MatrixXd predict(const Eigen::MatrixXd& Xs) const;
    json to_json() const;
    static KrrModel from_json(const json& j);
};

KrrModel krr_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const KrrOptions& opts);

/// Rows of Xs times a row-major N x Q coefficient block, one query at a time so
/// that a row's result never depends on the batch it arrived in.
Eigen::MatrixXd kernel_expand(const KernelSpec& k, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xs,
                              const RowMatrix& coef);

}  // namespace sisurr
