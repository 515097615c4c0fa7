#include "sisurr/kernel.hpp"

#include <cmath>

#include "sisurr/error.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

std::string_view to_string(KernelForm form)
{
    return form == KernelForm::iso ? "iso" : "aniso";
}

KernelForm parse_kernel_form(std::string_view text)
{
    if (text == "iso") return KernelForm::iso;
    if (text == "aniso") return KernelForm::aniso;
    fail(ErrorCode::invalid_kernel, "unknown kernel form '" + std::string(text) + "'");
}

void KernelSpec::validate(std::size_t dim) const
{
    if (!(signal_var > 0) || !std::isfinite(signal_var))
        fail(ErrorCode::invalid_kernel, "signal variance must be positive, got " + format_double(signal_var));
    const std::size_t want = form == KernelForm::iso ? 1 : dim;
    if (lengthscales.size() != want)
        fail(ErrorCode::invalid_kernel, std::string(to_string(form)) + " kernel needs " + std::to_string(want) +
                                            " lengthscales, got " + std::to_string(lengthscales.size()));
    for (double l : lengthscales)
        if (!(l > 0) || std::isnan(l)) fail(ErrorCode::invalid_kernel, "lengthscale must be positive, got " + format_double(l));
}

json KernelSpec::to_json() const
{
    return {{"form", to_string(form)}, {"signal_var", signal_var}, {"lengthscales", lengthscales}};
}

KernelSpec KernelSpec::from_json(const json& j)
{
    KernelSpec k;
    k.form = parse_kernel_form(j.at("form").get<std::string>());
    k.signal_var = j.at("signal_var").get<double>();
    k.lengthscales = j.at("lengthscales").get<std::vector<double>>();
    return k;
}

namespace {

Eigen::VectorXd inverse_lengthscales(const KernelSpec& k, Eigen::Index d)
{
    Eigen::VectorXd inv(d);
    for (Eigen::Index i = 0; i < d; ++i) inv[i] = 1.0 / k.lengthscale(static_cast<std::size_t>(i));
    return inv;
}

}  // namespace

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    if (a.size() != b.size()) fail(ErrorCode::dimension_mismatch, "kernel inputs differ in dimension");
    k.validate(static_cast<std::size_t>(a.size()));
    double r2 = 0;
    for (Eigen::Index d = 0; d < a.size(); ++d) {
        const double z = (a[d] - b[d]) / k.lengthscale(static_cast<std::size_t>(d));
        r2 += z * z;
    }
    return k.signal_var * std::exp(-0.5 * r2);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& k, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B)
{
    if (A.cols() != B.cols()) fail(ErrorCode::dimension_mismatch, "kernel inputs differ in dimension");
    const Eigen::Index d = A.cols();
    k.validate(static_cast<std::size_t>(d));
    const Eigen::VectorXd inv = inverse_lengthscales(k, d);
    // scaled copies, column-major per point for contiguous access
    const Eigen::MatrixXd As = (A * inv.asDiagonal()).transpose();
    const Eigen::MatrixXd Bs = (B * inv.asDiagonal()).transpose();
    Eigen::MatrixXd K(A.rows(), B.rows());
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
        const double* b = Bs.col(j).data();
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            const double* a = As.col(i).data();
            double r2 = 0;
            for (Eigen::Index t = 0; t < d; ++t) {
                const double z = a[t] - b[t];
                r2 += z * z;
            }
            K(i, j) = k.signal_var * std::exp(-0.5 * r2);
        }
    }
    return K;
}

Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& A)
{
    const Eigen::Index d = A.cols();
    k.validate(static_cast<std::size_t>(d));
    const Eigen::VectorXd inv = inverse_lengthscales(k, d);
    const Eigen::MatrixXd As = (A * inv.asDiagonal()).transpose();
    const Eigen::Index n = A.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        K(j, j) = k.signal_var;
        const double* b = As.col(j).data();
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double* a = As.col(i).data();
            double r2 = 0;
            for (Eigen::Index t = 0; t < d; ++t) {
                const double z = a[t] - b[t];
                r2 += z * z;
            }
            K(i, j) = K(j, i) = k.signal_var * std::exp(-0.5 * r2);
        }
    }
    return K;
}

}  // namespace sisurr
