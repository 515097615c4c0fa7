#include <algorithm>
#include <cmath>
#include <limits>

#include "sisurr/circuit.hpp"
#include "sisurr/error.hpp"

namespace sisurr {

namespace {

constexpr int kGround = -1;

struct Resistor {
    int a, b;
    double g;
};

struct Capacitor {
    int a, b;
    double c;
    double g = 0, v_prev = 0, i_prev = 0, j = 0;
};

struct Inductor {
    int a, b;
    double l;
    double g = 0, v_prev = 0, i_prev = 0, j = 0;
};

/// Bergeron line. e1/e2 hold 2v/Z0 - I_h for each end; the opposite end reads
/// them delayed by tau.
struct Line {
    int n1, n2;
    double y0;
    double tau;
    std::vector<double> e1, e2;  // ring buffers
    double lag = 0;              // tau/dt
    double ih1 = 0, ih2 = 0;
};

struct Circuit {
    int nodes = 0;
    int rx = 0;
    double g_tx = 0;
    std::vector<Resistor> resistors;
    std::vector<Capacitor> caps;
    std::vector<Inductor> inductors;
    std::vector<Line> lines;

    int add_node() { return nodes++; }
};

void walk(const std::vector<NetElement>& elems, int& cur, Circuit& c, const std::string& where)
{
    for (const auto& e : elems) {
        if (const auto* le = std::get_if<LumpedElement>(&e.item)) {
            if (!(le->value > 0)) fail(ErrorCode::invalid_argument, "element " + e.label + " value must be positive");
            switch (le->kind) {
            case LumpedKind::series_r: {
                int m = c.add_node();
                c.resistors.push_back({cur, m, 1.0 / le->value});
                cur = m;
                break;
            }
            case LumpedKind::series_l: {
                int m = c.add_node();
                c.inductors.push_back({cur, m, le->value});
                cur = m;
                break;
            }
            case LumpedKind::shunt_c: c.caps.push_back({cur, kGround, le->value}); break;
            case LumpedKind::shunt_r_to_ground: c.resistors.push_back({cur, kGround, 1.0 / le->value}); break;
            }
        } else if (const auto* tl = std::get_if<TLSegment>(&e.item)) {
            if (!(tl->z0 > 0) || !(tl->eps_eff >= 1) || !(tl->length_mm > 0))
                fail(ErrorCode::invalid_argument, "line " + e.label + " needs z0 > 0, eps_eff >= 1, length > 0");
            int m = c.add_node();
            Line line{};
            line.n1 = cur;
            line.n2 = m;
            line.y0 = 1.0 / tl->z0;
            line.tau = tl->delay();
            c.lines.push_back(std::move(line));
            cur = m;
        } else if (const auto* br = std::get_if<BranchStub>(&e.item)) {
            if (br->elements.empty()) fail(ErrorCode::non_solvable_netlist, "branch " + e.label + " is empty");
            const auto* last = std::get_if<LumpedElement>(&br->elements.back().item);
            if (!last || (last->kind != LumpedKind::shunt_c && last->kind != LumpedKind::shunt_r_to_ground))
                fail(ErrorCode::non_solvable_netlist, "branch " + e.label + " must end in a grounded element");
            int node = cur;
            walk(br->elements, node, c, where + "/" + e.label);
        }
    }
}

Circuit compile(const Netlist& net)
{
    Circuit c;
    int tx = c.add_node();
    c.g_tx = 1.0 / net.driver.r_tx;
    if (net.driver.c_tx > 0) c.caps.push_back({tx, kGround, net.driver.c_tx});
    int cur = tx;
    walk(net.elements, cur, c, "");
    c.rx = cur;
    if (net.c_rx > 0) c.caps.push_back({c.rx, kGround, net.c_rx});
    return c;
}

void stamp(std::vector<double>& G, int n, int a, int b, double g)
{
    if (a >= 0) G[static_cast<std::size_t>(a * n + a)] += g;
    if (b >= 0) G[static_cast<std::size_t>(b * n + b)] += g;
    if (a >= 0 && b >= 0) {
        G[static_cast<std::size_t>(a * n + b)] -= g;
        G[static_cast<std::size_t>(b * n + a)] -= g;
    }
}

inline double node_v(const std::vector<double>& v, int k)
{
    return k >= 0 ? v[static_cast<std::size_t>(k)] : 0.0;
}

inline void inject(std::vector<double>& rhs, int k, double i)
{
    if (k >= 0) rhs[static_cast<std::size_t>(k)] += i;
}

/// History value written `lag` steps before step n, zero before the start.
inline double delayed(const std::vector<double>& ring, std::size_t n, double lag)
{
    const double p = static_cast<double>(n) - lag;
    if (p < 0) return 0.0;
    const double fl = std::floor(p);
    const double frac = p - fl;
    const auto m0 = static_cast<std::size_t>(fl);
    const std::size_t size = ring.size();
    double v0 = ring[m0 % size];
    double v1 = frac > 0 ? ring[(m0 + 1) % size] : v0;
    return v0 + frac * (v1 - v0);
}

}  // namespace

double choose_timestep(const Netlist& net, int oversample)
{
    if (oversample < 1) fail(ErrorCode::invalid_argument, "oversample must be >= 1");
    const double base = net.driver.ui() / (50.0 * oversample);
    const double limit = net.min_delay() / 4.0;
    if (!std::isfinite(limit) || base <= limit) return base;
    const double k = std::ceil(base / limit * (1.0 + 1e-12));
    return base / k;
}

SimResult simulate_with_source(const Netlist& net, const Waveform& source, bool keep_all_nodes)
{
    const double dt = source.dt;
    if (!(dt > 0)) fail(ErrorCode::invalid_argument, "source dt must be positive");
    if (source.samples.empty()) fail(ErrorCode::invalid_argument, "empty source waveform");
    const double min_tau = net.min_delay();
    if (std::isfinite(min_tau) && dt > min_tau / 4.0 * (1.0 + 1e-9))
        fail(ErrorCode::timestep_too_coarse, "dt " + format_double(dt) + " s exceeds a quarter of the shortest line delay " +
                                                 format_double(min_tau) + " s");

    Circuit c = compile(net);
    const int n = c.nodes;
    const auto nn = static_cast<std::size_t>(n);

    std::vector<double> G(nn * nn, 0.0);
    G[0] += c.g_tx;
    for (const auto& r : c.resistors) stamp(G, n, r.a, r.b, r.g);
    for (auto& cap : c.caps) {
        cap.g = 2.0 * cap.c / dt;
        stamp(G, n, cap.a, cap.b, cap.g);
    }
    for (auto& ind : c.inductors) {
        ind.g = dt / (2.0 * ind.l);
        stamp(G, n, ind.a, ind.b, ind.g);
    }
    for (auto& line : c.lines) {
        stamp(G, n, line.n1, kGround, line.y0);
        stamp(G, n, line.n2, kGround, line.y0);
        line.lag = line.tau / dt;
        const auto size = static_cast<std::size_t>(std::ceil(line.lag)) + 3;
        line.e1.assign(size, 0.0);
        line.e2.assign(size, 0.0);
    }

    Eigen::MatrixXd Gm = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(G.data(), n, n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Gm);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14) || !std::isfinite(rcond))
        fail(ErrorCode::non_solvable_netlist, "conductance matrix is singular (rcond " + format_double(rcond) + ")");
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Ginv =
        lu.solve(Eigen::MatrixXd::Identity(n, n));
    const double* ginv = Ginv.data();

    const std::size_t steps = source.samples.size();
    SimResult res;
    res.node_count = nn;
    res.tx.t0 = res.rx.t0 = source.t0;
    res.tx.dt = res.rx.dt = dt;
    res.tx.samples.assign(steps, 0.0);
    res.rx.samples.assign(steps, 0.0);
    if (keep_all_nodes) {
        res.nodes.assign(nn, Waveform{source.t0, dt, std::vector<double>(steps, 0.0)});
    }

    std::vector<double> v(nn, 0.0), rhs(nn, 0.0);
    for (std::size_t step = 1; step < steps; ++step) {
        std::fill(rhs.begin(), rhs.end(), 0.0);
        rhs[0] += source.samples[step] * c.g_tx;
        for (auto& cap : c.caps) {
            cap.j = cap.g * cap.v_prev + cap.i_prev;
            inject(rhs, cap.a, cap.j);
            inject(rhs, cap.b, -cap.j);
        }
        for (auto& ind : c.inductors) {
            ind.j = ind.i_prev + ind.g * ind.v_prev;
            inject(rhs, ind.a, -ind.j);
            inject(rhs, ind.b, ind.j);
        }
        for (auto& line : c.lines) {
            line.ih1 = delayed(line.e2, step, line.lag);
            line.ih2 = delayed(line.e1, step, line.lag);
            inject(rhs, line.n1, line.ih1);
            inject(rhs, line.n2, line.ih2);
        }
        for (std::size_t i = 0; i < nn; ++i) {
            const double* row = ginv + i * nn;
            double acc = 0;
            for (std::size_t k = 0; k < nn; ++k) acc += row[k] * rhs[k];
            v[i] = acc;
        }
        for (auto& cap : c.caps) {
            double vc = node_v(v, cap.a) - node_v(v, cap.b);
            cap.i_prev = cap.g * vc - cap.j;
            cap.v_prev = vc;
        }
        for (auto& ind : c.inductors) {
            double vl = node_v(v, ind.a) - node_v(v, ind.b);
            ind.i_prev = ind.g * vl + ind.j;
            ind.v_prev = vl;
        }
        for (auto& line : c.lines) {
            const std::size_t slot = step % line.e1.size();
            line.e1[slot] = 2.0 * line.y0 * node_v(v, line.n1) - line.ih1;
            line.e2[slot] = 2.0 * line.y0 * node_v(v, line.n2) - line.ih2;
        }
        res.tx.samples[step] = v[0];
        res.rx.samples[step] = v[static_cast<std::size_t>(c.rx)];
        if (keep_all_nodes)
            for (std::size_t i = 0; i < nn; ++i) res.nodes[i].samples[step] = v[i];
    }
    for (double s : res.rx.samples)
        if (!std::isfinite(s)) fail(ErrorCode::non_solvable_netlist, "transient produced non-finite voltages");
    return res;
}

SimResult simulate_transient(const Netlist& net, const StimulusSpec& stim, const SimConfig& cfg)
{
    StimulusSpec s = stim;
    if (cfg.duration_bits > 0) s.n_bits = cfg.duration_bits;
    const double dt = cfg.dt > 0 ? cfg.dt : choose_timestep(net, cfg.oversample);
    Stimulus st = prbs_stimulus(net.driver, s, dt);
    SimResult res = simulate_with_source(net, st.source, cfg.keep_all_nodes);
    res.stimulus = std::move(st);
    return res;
}

}  // namespace sisurr
