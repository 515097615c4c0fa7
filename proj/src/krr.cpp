#include "sisurr/krr.hpp"

#include <cmath>

#include "sisurr/error.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

std::string_view to_string(OutputKernel b)
{
    return b == OutputKernel::identity ? "identity" : "output_correlation";
}

OutputKernel parse_output_kernel(std::string_view text)
{
    if (text == "identity") return OutputKernel::identity;
    if (text == "output_correlation") return OutputKernel::output_correlation;
    fail(ErrorCode::invalid_hyper, "unknown output kernel '" + std::string(text) + "'");
}

Eigen::MatrixXd kernel_expand(const KernelSpec& k, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xs,
                              const RowMatrix& coef)
{
    const Eigen::Index n = X.rows(), q = coef.cols();
    Eigen::MatrixXd out(Xs.rows(), q);
    std::vector<double> acc(static_cast<std::size_t>(q));
    // blocks of queries bound the size of the cross-kernel buffer
    constexpr Eigen::Index block = 256;
    for (Eigen::Index s = 0; s < Xs.rows(); s += block) {
        const Eigen::Index len = std::min(block, Xs.rows() - s);
        const Eigen::MatrixXd Kt = kernel_matrix(k, X, Xs.middleRows(s, len));
        for (Eigen::Index i = 0; i < len; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (Eigen::Index j = 0; j < n; ++j) {
                const double kj = Kt(j, i);
                const double* a = coef.data() + j * q;
                for (Eigen::Index c = 0; c < q; ++c) acc[static_cast<std::size_t>(c)] += kj * a[c];
            }
            for (Eigen::Index c = 0; c < q; ++c) out(s + i, c) = acc[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

KrrModel krr_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y_in, const KrrOptions& opts)
{
    if (X.rows() != Y_in.rows()) fail(ErrorCode::dimension_mismatch, "KRR inputs and targets differ in row count");
    if (X.rows() < 1) fail(ErrorCode::insufficient_data, "KRR needs training rows");
    if (!(opts.lambda > 0) || !std::isfinite(opts.lambda))
        fail(ErrorCode::invalid_hyper, "KRR ridge must be positive, got " + format_double(opts.lambda));
    require_unit_inputs(X, "KRR");
    opts.kernel.validate(static_cast<std::size_t>(X.cols()));

    KrrModel m;
    m.kernel = opts.kernel;
    m.lambda = opts.lambda;
    m.b_mode = opts.b_mode;
    m.X = X;
    const Eigen::Index q = Y_in.cols();
    Eigen::MatrixXd Y = Y_in;
    m.y_offset = opts.center_targets ? Eigen::VectorXd(Y.colwise().mean().transpose()) : Eigen::VectorXd::Zero(q);
    m.y_scale = Eigen::VectorXd::Ones(q);
    Y.rowwise() -= m.y_offset.transpose();

    const Eigen::MatrixXd K = gram_matrix(opts.kernel, X);
    if (opts.b_mode == OutputKernel::identity) {
        m.B = Eigen::MatrixXd::Identity(q, q);
        Eigen::MatrixXd A = K;
        A.diagonal().array() += opts.lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() != Eigen::Success) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
            fail(ErrorCode::ill_conditioned, "K + lambda I is singular; reciprocal condition estimate " +
                                                 format_double(ldlt.rcond()));
        }
        m.CB = llt.solve(Y);
        return m;
    }

    // Correlation output kernel over per-output standardized targets.
    for (Eigen::Index c = 0; c < q; ++c) {
        const double s = std::sqrt(Y.col(c).squaredNorm() / static_cast<double>(Y.rows()));
        if (s > 1e-12) m.y_scale[c] = s;
        Y.col(c) /= m.y_scale[c];
    }
    m.B = (Y.transpose() * Y) / static_cast<double>(Y.rows());
    for (Eigen::Index c = 0; c < q; ++c)
        if (m.B(c, c) <= 0) m.B(c, c) = 1.0;  // constant output: decouple it
    m.B = 0.5 * (m.B + m.B.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(K), eb(m.B);
    if (ek.info() != Eigen::Success || eb.info() != Eigen::Success)
        fail(ErrorCode::ill_conditioned, "eigendecomposition failed in vector-valued KRR");
    const Eigen::VectorXd lk = ek.eigenvalues().cwiseMax(0.0);
    const Eigen::VectorXd lb = eb.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd& U = ek.eigenvectors();
    const Eigen::MatrixXd& V = eb.eigenvectors();
    Eigen::MatrixXd T = U.transpose() * Y * V;
    for (Eigen::Index j = 0; j < q; ++j)
        for (Eigen::Index i = 0; i < T.rows(); ++i) T(i, j) /= lk[i] * lb[j] + opts.lambda;
    const Eigen::MatrixXd C = U * T * V.transpose();
    Eigen::MatrixXd CB = C * m.B;
    // fold the output scale into the coefficients
    for (Eigen::Index c = 0; c < q; ++c) CB.col(c) *= m.y_scale[c];
    m.CB = CB;
    return m;
}

Eigen::MatrixXd KrrModel::predict(const Eigen::MatrixXd& Xs) const
{
    if (Xs.cols() != X.cols()) fail(ErrorCode::dimension_mismatch, "KRR input width mismatch");
    require_unit_inputs(Xs, "KRR");
    Eigen::MatrixXd out = kernel_expand(kernel, X, Xs, CB);
    out.rowwise() += y_offset.transpose();
    return out;
}

json KrrModel::to_json() const
{
    return {{"kernel", kernel.to_json()}, {"lambda", lambda}, {"b_mode", to_string(b_mode)},
            {"X", matrix_to_json(X)},     {"y_offset", vector_to_json(y_offset)},
            {"y_scale", vector_to_json(y_scale)}, {"B", matrix_to_json(B)}, {"CB", matrix_to_json(CB)}};
}

KrrModel KrrModel::from_json(const json& j)
{
    KrrModel m;
    m.kernel = KernelSpec::from_json(j.at("kernel"));
    m.lambda = j.at("lambda").get<double>();
    m.b_mode = parse_output_kernel(j.at("b_mode").get<std::string>());
    m.X = matrix_from_json(j.at("X"));
    m.y_offset = vector_from_json(j.at("y_offset"));
    m.y_scale = vector_from_json(j.at("y_scale"));
    m.B = matrix_from_json(j.at("B"));
    m.CB = matrix_from_json(j.at("CB"));
    return m;
}

}  // namespace sisurr
