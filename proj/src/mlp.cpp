#include "sisurr/mlp.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "sisurr/error.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

std::vector<int> MlpModel::widths() const
{
    std::vector<int> w;
    if (W.empty()) return w;
    w.push_back(static_cast<int>(W.front().rows()));
    for (const auto& l : W) w.push_back(static_cast<int>(l.cols()));
    return w;
}

MlpModel MlpModel::init(const std::vector<int>& widths, std::uint64_t seed)
{
    if (widths.size() < 2) fail(ErrorCode::invalid_hyper, "an MLP needs input and output widths");
    for (int w : widths)
        if (w < 1) fail(ErrorCode::invalid_hyper, "layer widths must be positive");
    MlpModel m;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fin = widths[l], fout = widths[l + 1];
        const bool last = l + 2 == widths.size();
        const double limit = last ? std::sqrt(6.0 / (fin + fout)) : std::sqrt(6.0 / fin);
        std::uniform_real_distribution<double> u(-limit, limit);
        RowMatrix w(fin, fout);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
        m.W.push_back(std::move(w));
        m.b.push_back(Eigen::VectorXd::Zero(fout));
    }
    m.y_offset = Eigen::VectorXd::Zero(widths.back());
    m.y_scale = Eigen::VectorXd::Ones(widths.back());
    return m;
}

Eigen::MatrixXd MlpModel::forward(const Eigen::MatrixXd& X) const
{
    Eigen::MatrixXd H = X;
    for (std::size_t l = 0; l < W.size(); ++l) {
        Eigen::MatrixXd Z = H * W[l];
        Z.rowwise() += b[l].transpose();
        if (l + 1 < W.size()) Z = Z.cwiseMax(0.0);
        H = std::move(Z);
    }
    return H;
}

Eigen::MatrixXd MlpModel::predict(const Eigen::MatrixXd& Xs) const
{
    if (Xs.cols() != inputs())
        fail(ErrorCode::dimension_mismatch, "MLP expects " + std::to_string(inputs()) + " inputs, got " +
                                                std::to_string(Xs.cols()));
    require_unit_inputs(Xs, "MLP");
    const int q = outputs();
    Eigen::MatrixXd out(Xs.rows(), q);
    std::size_t widest = 0;
    for (const auto& l : W) widest = std::max(widest, static_cast<std::size_t>(l.cols()));
    widest = std::max(widest, static_cast<std::size_t>(Xs.cols()));
    std::vector<double> a(widest), z(widest);
    // One row at a time with a fixed accumulation order: a row's output is
    // independent of the batch it is part of.
    for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
        for (Eigen::Index k = 0; k < Xs.cols(); ++k) a[static_cast<std::size_t>(k)] = Xs(i, k);
        for (std::size_t l = 0; l < W.size(); ++l) {
            const Eigen::Index fin = W[l].rows(), fout = W[l].cols();
            for (Eigen::Index o = 0; o < fout; ++o) z[static_cast<std::size_t>(o)] = b[l][o];
            for (Eigen::Index k = 0; k < fin; ++k) {
                const double ak = a[static_cast<std::size_t>(k)];
                const double* w = W[l].data() + k * fout;
                for (Eigen::Index o = 0; o < fout; ++o) z[static_cast<std::size_t>(o)] += ak * w[o];
            }
            const bool hidden = l + 1 < W.size();
            for (Eigen::Index o = 0; o < fout; ++o)
                a[static_cast<std::size_t>(o)] = hidden ? std::max(0.0, z[static_cast<std::size_t>(o)]) : z[static_cast<std::size_t>(o)];
        }
        for (int c = 0; c < q; ++c) out(i, c) = y_scale[c] * a[static_cast<std::size_t>(c)] + y_offset[c];
    }
    return out;
}

Eigen::VectorXd MlpModel::flat_parameters() const
{
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    Eigen::VectorXd p(n);
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        for (Eigen::Index i = 0; i < W[l].size(); ++i) p[k++] = W[l].data()[i];
        for (Eigen::Index i = 0; i < b[l].size(); ++i) p[k++] = b[l][i];
    }
    return p;
}

void MlpModel::set_flat_parameters(const Eigen::VectorXd& p)
{
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        for (Eigen::Index i = 0; i < W[l].size(); ++i) W[l].data()[i] = p[k++];
        for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l][i] = p[k++];
    }
    if (k != p.size()) fail(ErrorCode::dimension_mismatch, "parameter vector length does not match the network");
}

namespace {

struct Grads {
    std::vector<RowMatrix> W;
    std::vector<Eigen::VectorXd> b;
};

/// Loss and gradients on one batch; targets are in network output units.
double batch_loss(const MlpModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, Grads* g)
{
    const std::size_t L = m.W.size();
    std::vector<Eigen::MatrixXd> H(L + 1);
    H[0] = X;
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd Z = H[l] * m.W[l];
        Z.rowwise() += m.b[l].transpose();
        if (l + 1 < L) Z = Z.cwiseMax(0.0);
        H[l + 1] = std::move(Z);
    }
    const Eigen::MatrixXd E = H[L] - Y;
    const double denom = static_cast<double>(E.size());
    const double loss = E.squaredNorm() / denom;
    if (!g) return loss;
    g->W.resize(L);
    g->b.resize(L);
    Eigen::MatrixXd D = (2.0 / denom) * E;
    for (std::size_t l = L; l-- > 0;) {
        g->W[l] = H[l].transpose() * D;
        g->b[l] = D.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::MatrixXd P = D * m.W[l].transpose();
        // rectifier derivative: H[l] > 0 exactly where the pre-activation was positive
        D = (H[l].array() > 0.0).select(P, 0.0);
    }
    return loss;
}

}  // namespace

double mlp_loss(const MlpModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, Eigen::VectorXd* grad)
{
    if (!grad) return batch_loss(m, X, Y, nullptr);
    Grads g;
    const double loss = batch_loss(m, X, Y, &g);
    MlpModel tmp;
    tmp.W = std::move(g.W);
    tmp.b = std::move(g.b);
    *grad = tmp.flat_parameters();
    return loss;
}

MlpModel mlp_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y_in, const Eigen::MatrixXd& Xval,
                 const Eigen::MatrixXd& Yval_in, const MlpOptions& opts)
{
    if (X.rows() != Y_in.rows() || Xval.rows() != Yval_in.rows())
        fail(ErrorCode::dimension_mismatch, "MLP inputs and targets differ in row count");
    if (X.rows() < 1) fail(ErrorCode::insufficient_data, "MLP needs training rows");
    if (opts.batch < 1 || opts.epochs < 1 || !(opts.lr > 0) || opts.patience < 1)
        fail(ErrorCode::invalid_hyper, "MLP needs positive batch, epochs, learning rate and patience");
    require_unit_inputs(X, "MLP");
    if (Xval.rows() > 0) require_unit_inputs(Xval, "MLP");

    std::vector<int> widths{static_cast<int>(X.cols())};
    widths.insert(widths.end(), opts.hidden.begin(), opts.hidden.end());
    widths.push_back(static_cast<int>(Y_in.cols()));
    MlpModel m = MlpModel::init(widths, derive_seed(opts.seed, "mlp-init"));

    const Eigen::Index q = Y_in.cols();
    if (opts.standardize_targets) {
        m.y_offset = Y_in.colwise().mean().transpose();
        for (Eigen::Index c = 0; c < q; ++c) {
            const double s = std::sqrt((Y_in.col(c).array() - m.y_offset[c]).square().mean());
            m.y_scale[c] = s > 1e-12 ? s : 1.0;
        }
    }
    auto to_net = [&](const Eigen::MatrixXd& Y) {
        Eigen::MatrixXd T = Y;
        for (Eigen::Index c = 0; c < q; ++c) T.col(c) = (T.col(c).array() - m.y_offset[c]) / m.y_scale[c];
        return T;
    };
    const Eigen::MatrixXd Y = to_net(Y_in);
    const Eigen::MatrixXd Yval = Xval.rows() > 0 ? to_net(Yval_in) : Eigen::MatrixXd();

    Eigen::VectorXd theta = m.flat_parameters();
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd vel = Eigen::VectorXd::Zero(theta.size());
    long step = 0;

    Rng rng(derive_seed(opts.seed, "mlp-shuffle"));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), 0);
    Eigen::VectorXd best_theta = theta;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    Eigen::MatrixXd Xb, Yb;
    Eigen::VectorXd grad;
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(opts.batch)) {
            const std::size_t len = std::min(order.size() - s, static_cast<std::size_t>(opts.batch));
            Xb.resize(static_cast<Eigen::Index>(len), X.cols());
            Yb.resize(static_cast<Eigen::Index>(len), q);
            for (std::size_t i = 0; i < len; ++i) {
                Xb.row(static_cast<Eigen::Index>(i)) = X.row(order[s + i]);
                Yb.row(static_cast<Eigen::Index>(i)) = Y.row(order[s + i]);
            }
            m.set_flat_parameters(theta);
            const double loss = mlp_loss(m, Xb, Yb, &grad);
            if (!std::isfinite(loss) || !grad.allFinite())
                fail(ErrorCode::training_diverged, "MLP loss became non-finite in epoch " + std::to_string(epoch));
            ++step;
            mom = opts.beta1 * mom + (1 - opts.beta1) * grad;
            vel = opts.beta2 * vel + (1 - opts.beta2) * grad.cwiseProduct(grad);
            const double c1 = 1 - std::pow(opts.beta1, static_cast<double>(step));
            const double c2 = 1 - std::pow(opts.beta2, static_cast<double>(step));
            theta.array() -= opts.lr * (mom.array() / c1) / ((vel.array() / c2).sqrt() + opts.eps);
        }
        m.set_flat_parameters(theta);
        const double score = Xval.rows() > 0 ? mlp_loss(m, Xval, Yval) : mlp_loss(m, X, Y);
        if (!std::isfinite(score))
            fail(ErrorCode::training_diverged, "MLP loss became non-finite in epoch " + std::to_string(epoch));
        m.epochs_run = epoch;
        if (score < best) {
            best = score;
            best_theta = theta;
            m.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= opts.patience) {
            break;
        }
    }
    m.set_flat_parameters(best_theta);
    m.best_val = best;
    // constant targets are reproduced exactly rather than through the network
    if (opts.standardize_targets)
        for (Eigen::Index c = 0; c < q; ++c)
            if ((Y_in.col(c).array() == m.y_offset[c]).all()) m.y_scale[c] = 0.0;
    return m;
}

json MlpModel::to_json() const
{
    json layers = json::array();
    for (std::size_t l = 0; l < W.size(); ++l) layers.push_back({{"W", matrix_to_json(W[l])}, {"b", vector_to_json(b[l])}});
    return {{"layers", layers},
            {"y_offset", vector_to_json(y_offset)},
            {"y_scale", vector_to_json(y_scale)},
            {"best_epoch", best_epoch},
            {"epochs_run", epochs_run},
            {"best_val", best_val}};
}

MlpModel MlpModel::from_json(const json& j)
{
    MlpModel m;
    for (const auto& lj : j.at("layers")) {
        m.W.push_back(matrix_from_json(lj.at("W")));
        m.b.push_back(vector_from_json(lj.at("b")));
    }
    m.y_offset = vector_from_json(j.at("y_offset"));
    m.y_scale = vector_from_json(j.at("y_scale"));
    m.best_epoch = j.at("best_epoch").get<int>();
    m.epochs_run = j.at("epochs_run").get<int>();
    m.best_val = j.at("best_val").get<double>();
    return m;
}

Eigen::MatrixXd EnsembleModel::predict(const Eigen::MatrixXd& Xs) const
{
    if (members.empty()) fail(ErrorCode::invalid_argument, "ensemble has no members");
    Eigen::MatrixXd sum = members.front().predict(Xs);
    for (std::size_t k = 1; k < members.size(); ++k) sum += members[k].predict(Xs);
    return sum / static_cast<double>(members.size());
}

json EnsembleModel::to_json() const
{
    json ms = json::array();
    for (const auto& m : members) ms.push_back(m.to_json());
    return {{"members", ms}};
}

EnsembleModel EnsembleModel::from_json(const json& j)
{
    EnsembleModel e;
    for (const auto& mj : j.at("members")) e.members.push_back(MlpModel::from_json(mj));
    return e;
}

EnsembleModel ensemble_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Xval,
                           const Eigen::MatrixXd& Yval, const MlpOptions& opts, int k, int workers)
{
    if (k < 1) fail(ErrorCode::invalid_hyper, "ensemble size must be at least 1");
    EnsembleModel e;
    e.members.resize(static_cast<std::size_t>(k));
    parallel_for(e.members.size(), workers, [&](std::size_t i) {
        MlpOptions o = opts;
        o.seed = derive_seed(opts.seed, i);
        try {
            e.members[i] = mlp_fit(X, Y, Xval, Yval, o);
        } catch (const Error& err) {
            throw Error(err.code(), "ensemble member " + std::to_string(i) + ": " + err.what());
        }
    });
    return e;
}

}  // namespace sisurr
