#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/circuit.hpp"
#include "sisurr/eye.hpp"

namespace sisurr::oracle {

// ---- circuits ----

inline NetElement line(double z0, double tau, double eps_eff = 1.0)
{
    TLSegment tl;
    tl.z0 = z0;
    tl.eps_eff = eps_eff;
    tl.length_mm = tau * kSpeedOfLight / std::sqrt(eps_eff) / 1e-3;
    return {tl, "tl"};
}

inline NetElement lumped(LumpedKind k, double v)
{
    return {LumpedElement{k, v}, std::string(to_string(k))};
}

/// Ideal 0 -> 1 V step behind r_tx, UI 5 ns.
inline Netlist step_net(double r_tx, std::vector<NetElement> elems, double c_rx = 0)
{
    Netlist net;
    net.driver.vdd = 1.0;
    net.driver.rise_frac = 0;
    net.driver.fall_frac = 0;
    net.driver.jitter_frac = 0;
    net.driver.r_tx = r_tx;
    net.driver.c_tx = 0;
    net.driver.f_clock_mhz = 100;
    net.elements = std::move(elems);
    net.c_rx = c_rx;
    return net;
}

inline StimulusSpec step_stim(int bits)
{
    StimulusSpec s;
    s.pattern = Pattern::step;
    s.n_bits = bits;
    s.settle_bits = 0;
    return s;
}

inline double at(const Waveform& w, double t)
{
    return w.samples[static_cast<std::size_t>(std::llround((t - w.t0) / w.dt))];
}

inline double first_departure(const Waveform& w, double eps = 1e-9)
{
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        if (std::abs(w.samples[i]) > eps) return w.time(i);
    return -1;
}

/// DC node voltages of a ladder driven by `vs` behind the driver resistance:
/// lines and inductors are shorts, capacitors open. Returns the RX node voltage.
inline double dc_rx_voltage(const Netlist& net, double vs)
{
    // node 0 is the TX pad
    struct Edge {
        int a, b;  // b == -1 is ground
        double g;
    };
    std::vector<Edge> edges;
    int nodes = 1;
    auto walk = [&](auto&& self, const std::vector<NetElement>& chain, int node) -> int {
        for (const auto& el : chain) {
            if (const auto* l = std::get_if<LumpedElement>(&el.item)) {
                if (l->kind == LumpedKind::series_r) {
                    edges.push_back({node, nodes, 1.0 / l->value});
                    node = nodes++;
                } else if (l->kind == LumpedKind::shunt_r_to_ground) {
                    edges.push_back({node, -1, 1.0 / l->value});
                }
            } else if (const auto* b = std::get_if<BranchStub>(&el.item)) {
                self(self, b->elements, node);
            }
        }
        return node;
    };
    const int rx = walk(walk, net.elements, 0);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nodes, nodes);
    Eigen::VectorXd I = Eigen::VectorXd::Zero(nodes);
    G(0, 0) += 1.0 / net.driver.r_tx;
    I(0) += vs / net.driver.r_tx;
    for (const auto& e : edges) {
        G(e.a, e.a) += e.g;
        if (e.b >= 0) {
            G(e.b, e.b) += e.g;
            G(e.a, e.b) -= e.g;
            G(e.b, e.a) -= e.g;
        }
    }
    return G.lu().solve(I)(rx);
}

// ---- eyes ----

inline Waveform constant_wave(double v, double dt, std::size_t n)
{
    return Waveform{0.0, dt, std::vector<double>(n, v)};
}

inline EyeContour flat_contour(double up, double lo, double ui)
{
    EyeContour c;
    c.upper.fill(up);
    c.lower.fill(lo);
    c.ui = ui;
    c.closed = contour_closed(c);
    return c;
}

/// Fraction of a 1000 x 1000 raster over the mask bounding box that lies inside
/// the diamond and outside the per-bin opening (lower, upper).
inline double raster_severity(const EyeMask& m, const EyeContour& c)
{
    const int n = 1000;
    std::size_t inside = 0, bad = 0;
    for (int i = 0; i < n; ++i) {
        double t = m.t0 + (i + 0.5) / n * (m.t1 - m.t0);
        int b = std::min(kContourBins - 1, static_cast<int>(t / (m.ui / kContourBins)));
        for (int j = 0; j < n; ++j) {
            double v = m.v0 + (j + 0.5) / n * (m.v1 - m.v0);
            double tm = 0.5 * (m.t0 + m.t1);
            double ft = std::abs(t - tm) / (0.5 * (m.t1 - m.t0));
            double fv = v >= m.v_ref ? (v - m.v_ref) / (m.v1 - m.v_ref) : (m.v_ref - v) / (m.v_ref - m.v0);
            if (ft + fv > 1.0) continue;
            ++inside;
            if (!(v < c.upper[static_cast<std::size_t>(b)] && v > c.lower[static_cast<std::size_t>(b)])) ++bad;
        }
    }
    return 100.0 * static_cast<double>(bad) / static_cast<double>(inside);
}

/// Closed-form value of an alternating trapezoid (ramp centered on each bit
/// boundary) at offset s into a bit carrying `bit`.
inline double trapezoid_level(double s, double ui, double tr, double vdd, int bit)
{
    double rise = tr > 0 ? std::min({1.0, 0.5 + s / tr, 0.5 + (ui - s) / tr}) : 1.0;
    return bit ? vdd * rise : vdd * (1.0 - rise);
}

/// Inner contour of the alternating trapezoid: per-bin extremes over a fine grid.
inline EyeContour trapezoid_contour(double ui, double tr, double vdd)
{
    const double w = ui / kContourBins;
    EyeContour c;
    c.ui = ui;
    for (int b = 0; b < kContourBins; ++b) {
        double up = 1e9, lo = -1e9;
        for (int k = 0; k <= 1000; ++k) {
            double s = std::min((b + k / 1000.0) * w, ui - 1e-18);
            up = std::min(up, trapezoid_level(s, ui, tr, vdd, 1));
            lo = std::max(lo, trapezoid_level(s, ui, tr, vdd, 0));
        }
        c.upper[static_cast<std::size_t>(b)] = up;
        c.lower[static_cast<std::size_t>(b)] = lo;
    }
    c.closed = contour_closed(c);
    return c;
}

// ---- regression data ----

inline Eigen::MatrixXd uniform(Eigen::Index n, Eigen::Index d, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    return X;
}

inline Eigen::MatrixXd smooth_targets(const Eigen::MatrixXd& X)
{
    Eigen::MatrixXd Y(X.rows(), 2);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Y(i, 0) = std::sin(3 * X(i, 0)) + 0.5 * X(i, 1) * X(i, 1);
        Y(i, 1) = std::cos(2 * X(i, 1)) - X(i, 0);
    }
    return Y;
}

}  // namespace sisurr::oracle
