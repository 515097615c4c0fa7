#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/serialize.hpp"

namespace sisurr {

enum class KernelForm { iso, aniso };

std::string_view to_string(KernelForm form);
KernelForm parse_kernel_form(std::string_view text);

/// Squared-exponential kernel sigma^2 exp(-0.5 sum_d (x_d - x'_d)^2 / l_d^2).
/// An iso kernel carries one lengthscale shared by every dimension.
struct KernelSpec {
    KernelForm form = KernelForm::iso;
    double signal_var = 1.0;
    std::vector<double> lengthscales{1.0};

    /// Throws invalid_kernel on non-positive values or a wrong aniso width.
    void validate(std::size_t dim) const;
    double lengthscale(std::size_t d) const { return form == KernelForm::iso ? lengthscales.at(0) : lengthscales.at(d); }

    json to_json() const;
    static KernelSpec from_json(const json& j);
};

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// k(A_i, B_j) for row sets A (n x d) and B (m x d). Every entry is computed
/// from its own pair of rows, so results do not depend on how rows are batched.
Eigen::MatrixXd kernel_matrix(const KernelSpec& k, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Symmetric Gram matrix of A with itself.
Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& A);

}  // namespace sisurr
