#include "sisurr/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sisurr/error.hpp"
#include "sisurr/krr.hpp"
#include "sisurr/optim.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<std::size_t> seeded_subset(std::size_t n, std::size_t k, std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (k >= n) return idx;
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& M, const std::vector<std::size_t>& rows)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), M.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

}  // namespace

void require_unit_inputs(const Eigen::MatrixXd& X, const char* model)
{
    constexpr double tol = 1e-9;
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double v = X(i, j);
            if (!(v >= -tol && v <= 1 + tol))
                fail(ErrorCode::out_of_domain, std::string(model) + " expects inputs in [0, 1]; column " +
                                                   std::to_string(j) + " row " + std::to_string(i) + " is " +
                                                   format_double(v));
        }
}

Eigen::VectorXd gpr_theta(const KernelSpec& k, double noise_var)
{
    Eigen::VectorXd t(static_cast<Eigen::Index>(k.lengthscales.size()) + 2);
    t[0] = std::log(k.signal_var);
    for (std::size_t i = 0; i < k.lengthscales.size(); ++i) t[static_cast<Eigen::Index>(i) + 1] = std::log(k.lengthscales[i]);
    t[t.size() - 1] = std::log(noise_var);
    return t;
}

KernelSpec gpr_kernel_from_theta(const Eigen::VectorXd& theta, KernelForm form)
{
    KernelSpec k;
    k.form = form;
    k.signal_var = std::exp(theta[0]);
    k.lengthscales.clear();
    for (Eigen::Index i = 1; i + 1 < theta.size(); ++i) k.lengthscales.push_back(std::exp(theta[i]));
    return k;
}

Eigen::LLT<Eigen::MatrixXd> factorize_gram(Eigen::MatrixXd K, double noise_var, double* jitter_used)
{
    const Eigen::Index n = K.rows();
    const double mean_diag = n > 0 ? K.diagonal().mean() : 1.0;
    K.diagonal().array() += noise_var;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    double jitter = 0;
    for (double rel = 1e-10; llt.info() != Eigen::Success && rel <= 1e-6 * 1.0001; rel *= 10) {
        const double add = rel * mean_diag - jitter;
        K.diagonal().array() += add;
        jitter = rel * mean_diag;
        llt.compute(K);
    }
    if (llt.info() != Eigen::Success) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
        fail(ErrorCode::ill_conditioned, "Gram matrix not positive definite after jitter " + format_double(jitter) +
                                             "; reciprocal condition estimate " + format_double(ldlt.rcond()));
    }
    if (jitter_used) *jitter_used = jitter;
    return llt;
}

double gpr_nlml(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, KernelForm form, const Eigen::VectorXd& theta,
                Eigen::VectorXd* grad)
{
    const Eigen::Index n = X.rows(), d = X.cols(), q = Y.cols();
    const KernelSpec k = gpr_kernel_from_theta(theta, form);
    const double noise = std::exp(theta[theta.size() - 1]);
    const Eigen::MatrixXd Kf = gram_matrix(k, X);
    Eigen::MatrixXd K = Kf;
    K.diagonal().array() += noise;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd A = llt.solve(Y);
    const Eigen::MatrixXd L = llt.matrixL();
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    const double value = 0.5 * (Y.array() * A.array()).sum() + 0.5 * static_cast<double>(q) * logdet +
                         0.5 * static_cast<double>(q * n) * kLog2Pi;
    if (!grad) return value;

    grad->setZero(theta.size());
    Eigen::MatrixXd W = A * A.transpose();
    W -= static_cast<double>(q) * llt.solve(Eigen::MatrixXd::Identity(n, n));
    // dK/dlog sf2 = Kf, dK/dlog sn2 = sn2 I, dK/dlog l_d = Kf .* D_d / l_d^2
    (*grad)[0] = -0.5 * (W.array() * Kf.array()).sum();
    (*grad)[theta.size() - 1] = -0.5 * noise * W.trace();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double m = 2.0 * W(i, j) * Kf(i, j);  // both triangles
            for (Eigen::Index t = 0; t < d; ++t) {
                const double z = X(i, t) - X(j, t);
                acc[t] += m * z * z;
            }
        }
    if (form == KernelForm::iso) {
        const double l2 = k.lengthscales[0] * k.lengthscales[0];
        (*grad)[1] = -0.5 * acc.sum() / l2;
    } else {
        for (Eigen::Index t = 0; t < d; ++t) {
            const double l = k.lengthscales[static_cast<std::size_t>(t)];
            (*grad)[t + 1] = -0.5 * acc[t] / (l * l);
        }
    }
    return value;
}

namespace {

struct HyperFit {
    KernelSpec kernel;
    double noise = 0;
    double nlml = 0;
};

HyperFit optimize_hyper(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const GprOptions& opts, std::uint64_t seed)
{
    const auto d = static_cast<std::size_t>(X.cols());
    const std::size_t n_ls = opts.form == KernelForm::iso ? 1 : d;
    const Eigen::Index p = static_cast<Eigen::Index>(n_ls) + 2;
    LbfgsOptions lo;
    lo.max_iters = opts.max_iters;
    lo.lower = Eigen::VectorXd::Constant(p, std::log(1e-2));
    lo.upper = Eigen::VectorXd::Constant(p, std::log(1e2));
    lo.lower[0] = std::log(1e-3);
    lo.upper[0] = std::log(1e3);
    lo.lower[p - 1] = std::log(1e-8);
    lo.upper[p - 1] = std::log(1.0);
    // targets are standardized, so the data variance is ~1 per column
    const double var_y = std::max(1e-12, Y.array().square().mean());
    const double l0 = 0.5 * std::sqrt(static_cast<double>(d));

    Objective f = [&](const Eigen::VectorXd& th, Eigen::VectorXd& g) { return gpr_nlml(X, Y, opts.form, th, &g); };
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    HyperFit best;
    best.nlml = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        Eigen::VectorXd th(p);
        th[0] = std::log(var_y);
        for (Eigen::Index i = 1; i + 1 < p; ++i) th[i] = std::log(l0);
        th[p - 1] = std::log(1e-2 * var_y);
        if (r > 0) {
            th[0] += 0.7 * u(rng);
            for (Eigen::Index i = 1; i + 1 < p; ++i) th[i] += 1.2 * u(rng);
            th[p - 1] += 2.3 * u(rng);
        }
        th = th.cwiseMax(lo.lower).cwiseMin(lo.upper);
        auto res = lbfgs_minimize(f, th, lo);
        if (res.value < best.nlml) {
            best.nlml = res.value;
            best.kernel = gpr_kernel_from_theta(res.x, opts.form);
            best.noise = std::exp(res.x[p - 1]);
        }
    }
    if (!std::isfinite(best.nlml))
        fail(ErrorCode::ill_conditioned, "no restart produced a factorizable Gram matrix");
    return best;
}

}  // namespace

GprModel gpr_fit(const Eigen::MatrixXd& X_in, const Eigen::MatrixXd& Y_in, const GprOptions& opts)
{
    if (X_in.rows() != Y_in.rows()) fail(ErrorCode::dimension_mismatch, "GPR inputs and targets differ in row count");
    if (X_in.rows() < 2) fail(ErrorCode::insufficient_data, "GPR needs at least 2 training rows");
    if (Y_in.cols() < 1) fail(ErrorCode::dimension_mismatch, "GPR needs at least one target column");
    require_unit_inputs(X_in, "GPR");
    if (!Y_in.allFinite()) fail(ErrorCode::invalid_argument, "GPR targets contain non-finite values");

    GprModel m;
    m.rows_offered = static_cast<std::size_t>(X_in.rows());
    std::vector<std::size_t> rows(m.rows_offered);
    std::iota(rows.begin(), rows.end(), 0);
    if (m.rows_offered > opts.max_train) {
        if (!opts.subsample_over_cap)
            fail(ErrorCode::invalid_argument, "exact GPR is capped at " + std::to_string(opts.max_train) +
                                                  " training rows, got " + std::to_string(m.rows_offered));
        rows = seeded_subset(m.rows_offered, opts.max_train, derive_seed(opts.seed, "gpr-cap"));
        m.subsampled = true;
    }
    m.X = take_rows(X_in, rows);
    Eigen::MatrixXd Y = take_rows(Y_in, rows);
    const Eigen::Index q = Y.cols();
    m.y_offset = opts.center_targets ? Eigen::VectorXd(Y.colwise().mean().transpose()) : Eigen::VectorXd::Zero(q);
    m.y_scale = Eigen::VectorXd::Ones(q);
    for (Eigen::Index c = 0; c < q; ++c) {
        Y.col(c).array() -= m.y_offset[c];
        if (opts.scale_targets) {
            const double s = std::sqrt(Y.col(c).squaredNorm() / static_cast<double>(Y.rows()));
            if (s > 1e-12) m.y_scale[c] = s;
            Y.col(c) /= m.y_scale[c];
        }
    }

    if (opts.shared_kernel || !opts.optimize) {
        GprGroup g;
        for (Eigen::Index c = 0; c < q; ++c) g.outputs.push_back(static_cast<int>(c));
        m.groups.push_back(std::move(g));
    } else {
        for (Eigen::Index c = 0; c < q; ++c) {
            GprGroup g;
            g.outputs.push_back(static_cast<int>(c));
            m.groups.push_back(std::move(g));
        }
    }

    const auto hyper_rows = seeded_subset(static_cast<std::size_t>(m.X.rows()), opts.hyper_subset,
                                          derive_seed(opts.seed, "gpr-hyper"));
    const Eigen::MatrixXd Xh = take_rows(m.X, hyper_rows);
    const Eigen::MatrixXd Yh_all = take_rows(Y, hyper_rows);

    auto& factor = *m.factor_;
    std::call_once(factor.once, [] {});  // factors are filled below
    factor.llt.resize(m.groups.size());
    parallel_for(m.groups.size(), opts.workers, [&](std::size_t gi) {
        GprGroup& g = m.groups[gi];
        Eigen::MatrixXd Yg(Y.rows(), static_cast<Eigen::Index>(g.outputs.size()));
        Eigen::MatrixXd Yh(Yh_all.rows(), Yg.cols());
        for (std::size_t k = 0; k < g.outputs.size(); ++k) {
            Yg.col(static_cast<Eigen::Index>(k)) = Y.col(g.outputs[k]);
            Yh.col(static_cast<Eigen::Index>(k)) = Yh_all.col(g.outputs[k]);
        }
        if (opts.optimize) {
            auto h = optimize_hyper(Xh, Yh, opts, derive_seed(opts.seed, 1000 + gi));
            g.kernel = h.kernel;
            g.noise_var = h.noise;
            g.nlml = h.nlml;
        } else {
            opts.kernel.validate(static_cast<std::size_t>(m.X.cols()));
            if (!(opts.noise_var >= 0)) fail(ErrorCode::invalid_kernel, "noise variance must be non-negative");
            g.kernel = opts.kernel;
            g.noise_var = opts.noise_var;
        }
        auto llt = factorize_gram(gram_matrix(g.kernel, m.X), g.noise_var, &g.jitter);
        g.alpha = llt.solve(Yg);
        factor.llt[gi] = std::move(llt);
    });
    return m;
}

const std::vector<Eigen::LLT<Eigen::MatrixXd>>& GprModel::factors() const
{
    std::call_once(factor_->once, [this] {
        factor_->llt.clear();
        for (const auto& g : groups) {
            double jitter = 0;
            factor_->llt.push_back(factorize_gram(gram_matrix(g.kernel, X), g.noise_var + g.jitter, &jitter));
        }
    });
    return factor_->llt;
}

Eigen::MatrixXd GprModel::predict(const Eigen::MatrixXd& Xs) const
{
    if (Xs.cols() != X.cols())
        fail(ErrorCode::dimension_mismatch, "GPR expects " + std::to_string(X.cols()) + " inputs, got " +
                                                std::to_string(Xs.cols()));
    require_unit_inputs(Xs, "GPR");
    Eigen::MatrixXd out(Xs.rows(), static_cast<Eigen::Index>(outputs()));
    for (const auto& g : groups) {
        const Eigen::MatrixXd part = kernel_expand(g.kernel, X, Xs, g.alpha);
        for (std::size_t c = 0; c < g.outputs.size(); ++c) {
            const int o = g.outputs[c];
            out.col(o) = (y_scale[o] * part.col(static_cast<Eigen::Index>(c)).array() + y_offset[o]).matrix();
        }
    }
    return out;
}

Eigen::MatrixXd GprModel::predict_variance(const Eigen::MatrixXd& Xs) const
{
    if (Xs.cols() != X.cols()) fail(ErrorCode::dimension_mismatch, "GPR input width mismatch");
    require_unit_inputs(Xs, "GPR");
    const auto& llt = factors();
    Eigen::MatrixXd out(Xs.rows(), static_cast<Eigen::Index>(outputs()));
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
            Eigen::VectorXd v = kernel_matrix(g.kernel, X, Xs.row(i)).col(0);
            llt[gi].matrixL().solveInPlace(v);
            const double latent = std::max(0.0, g.kernel.signal_var - v.squaredNorm());
            for (int o : g.outputs) out(i, o) = y_scale[o] * y_scale[o] * latent;
        }
    }
    return out;
}

json GprModel::to_json() const
{
    json gs = json::array();
    for (const auto& g : groups) {
        gs.push_back({{"kernel", g.kernel.to_json()},
                      {"noise_var", g.noise_var},
                      {"jitter", g.jitter},
                      {"nlml", g.nlml},
                      {"outputs", g.outputs},
                      {"alpha", matrix_to_json(g.alpha)}});
    }
    return {{"X", matrix_to_json(X)},
            {"y_offset", vector_to_json(y_offset)},
            {"y_scale", vector_to_json(y_scale)},
            {"rows_offered", rows_offered},
            {"subsampled", subsampled},
            {"groups", gs}};
}

GprModel GprModel::from_json(const json& j)
{
    GprModel m;
    m.X = matrix_from_json(j.at("X"));
    m.y_offset = vector_from_json(j.at("y_offset"));
    m.y_scale = vector_from_json(j.at("y_scale"));
    m.rows_offered = j.at("rows_offered").get<std::size_t>();
    m.subsampled = j.at("subsampled").get<bool>();
    for (const auto& gj : j.at("groups")) {
        GprGroup g;
        g.kernel = KernelSpec::from_json(gj.at("kernel"));
        g.noise_var = gj.at("noise_var").get<double>();
        g.jitter = gj.at("jitter").get<double>();
        g.nlml = gj.at("nlml").get<double>();
        g.outputs = gj.at("outputs").get<std::vector<int>>();
        g.alpha = matrix_from_json(gj.at("alpha"));
        m.groups.push_back(std::move(g));
    }
    return m;
}

}  // namespace sisurr
