#include <cmath>
#include <deque>
#include <limits>

#include "sisurr/error.hpp"
#include "sisurr/optim.hpp"

namespace sisurr {

namespace {

struct Box {
    const Eigen::VectorXd* lo = nullptr;
    const Eigen::VectorXd* hi = nullptr;

    bool bounded() const { return lo && lo->size() > 0; }

    Eigen::VectorXd project(Eigen::VectorXd x) const
    {
        if (bounded()) x = x.cwiseMax(*lo).cwiseMin(*hi);
        return x;
    }

    /// Gradient with components zeroed where the point sits on a bound and
    /// the descent direction would leave the box.
    Eigen::VectorXd free_gradient(const Eigen::VectorXd& x, Eigen::VectorXd g) const
    {
        if (!bounded()) return g;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (x[i] <= (*lo)[i] && g[i] > 0) g[i] = 0;
            if (x[i] >= (*hi)[i] && g[i] < 0) g[i] = 0;
        }
        return g;
    }
};

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& f, const Eigen::VectorXd& x0, const LbfgsOptions& opts)
{
    const Eigen::Index n = x0.size();
    Box box{&opts.lower, &opts.upper};
    if (box.bounded() && (opts.lower.size() != n || opts.upper.size() != n))
        fail(ErrorCode::dimension_mismatch, "optimizer bounds do not match the start point");

    LbfgsResult r;
    r.x = box.project(x0);
    Eigen::VectorXd g(n);
    r.value = f(r.x, g);
    r.evaluations = 1;
    if (!std::isfinite(r.value) || !g.allFinite()) return r;

    std::deque<Eigen::VectorXd> S, Y;
    std::deque<double> rho;
    for (r.iterations = 0; r.iterations < opts.max_iters; ++r.iterations) {
        Eigen::VectorXd gf = box.free_gradient(r.x, g);
        if (gf.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            r.converged = true;
            break;
        }
        // two-loop recursion
        Eigen::VectorXd q = gf;
        std::vector<double> alpha(S.size());
        for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
            alpha[static_cast<std::size_t>(i)] = rho[static_cast<std::size_t>(i)] * S[static_cast<std::size_t>(i)].dot(q);
            q -= alpha[static_cast<std::size_t>(i)] * Y[static_cast<std::size_t>(i)];
        }
        double gamma = 1.0;
        if (!S.empty()) gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
        else gamma = 1.0 / std::max(1.0, gf.norm());
        Eigen::VectorXd d = gamma * q;
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double beta = rho[i] * Y[i].dot(d);
            d += S[i] * (alpha[i] - beta);
        }
        d = -d;
        d = box.free_gradient(r.x, -d);
        d = -d;
        double slope = gf.dot(d);
        if (!(slope < 0)) {
            // not a descent direction; restart from steepest descent
            S.clear();
            Y.clear();
            rho.clear();
            d = -gf / std::max(1.0, gf.norm());
            slope = gf.dot(d);
        }

        double step = 1.0;
        Eigen::VectorXd x_new, g_new(n);
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            x_new = box.project(r.x + step * d);
            f_new = f(x_new, g_new);
            ++r.evaluations;
            if (std::isfinite(f_new) && g_new.allFinite() && f_new <= r.value + 1e-4 * gf.dot(x_new - r.x)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd s = x_new - r.x;
        Eigen::VectorXd y = g_new - g;
        const double decrease = r.value - f_new;
        r.x = x_new;
        g = g_new;
        const double prev = r.value;
        r.value = f_new;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            S.push_back(s);
            Y.push_back(y);
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opts.history) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        if (decrease <= opts.rel_tol * std::max(1.0, std::abs(prev))) {
            r.converged = true;
            ++r.iterations;
            break;
        }
    }
    return r;
}

}  // namespace sisurr
