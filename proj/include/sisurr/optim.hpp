#pragma once

#include <functional>

#include <Eigen/Dense>

namespace sisurr {

/// f(x, grad) returns the objective and fills grad. Non-finite values are
/// treated as a failed trial step.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsOptions {
    int max_iters = 100;
    int history = 7;
    double grad_tol = 1e-6;
    double rel_tol = 1e-9;
    /// Optional box; empty vectors mean unbounded.
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Limited-memory BFGS with backtracking Armijo steps. Bounds are handled by
/// projecting trial points onto the box and freezing coordinates whose
/// gradient pushes outward. The returned value never exceeds f(x0).
LbfgsResult lbfgs_minimize(const Objective& f, const Eigen::VectorXd& x0, const LbfgsOptions& opts = {});

}  // namespace sisurr
