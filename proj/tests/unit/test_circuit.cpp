#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "sisurr/circuit.hpp"
#include "sisurr/error.hpp"
#include "sisurr/presets.hpp"

#include "oracles.hpp"

using namespace sisurr;
using namespace sisurr::oracle;

TEST(Microstrip, AirFilledHasUnitEffectivePermittivity)
{
    auto r = microstrip_params(0.2, 0.4, 0.035, 1.0);
    EXPECT_NEAR(r.eps_eff, 1.0, 1e-12);
}

TEST(Microstrip, MatchesStandaloneEvaluation)
{
    // tests/oracles/microstrip_hj.py 0.2 0.4 0.035 4.3
    auto r = microstrip_params(0.2, 0.4, 0.035, 4.3);
    EXPECT_NEAR(r.z0, 47.0255385823, 0.02 * 47.0255385823);
    EXPECT_NEAR(r.z0, 47.0255385823, 1e-6);
    EXPECT_NEAR(r.eps_eff, 3.1612080479, 1e-6);
    // tests/oracles/microstrip_hj.py 0.3 0.1 0.05 3.5
    auto s = microstrip_params(0.3, 0.1, 0.05, 3.5);
    EXPECT_NEAR(s.z0, 106.7384127114, 1e-6);
    EXPECT_NEAR(s.eps_eff, 2.2931267145, 1e-6);
}

TEST(Microstrip, ImpedanceFallsWithWidthAndStaysBounded)
{
    EXPECT_GT(microstrip_params(0.2, 0.2, 0.035, 4.3).z0, microstrip_params(0.2, 0.4, 0.035, 4.3).z0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 200; ++i) {
        double h = 0.1 + 0.4 * u(rng), w = 0.1 + 0.6 * u(rng), t = 0.01 + 0.09 * u(rng), er = 3 + 2 * u(rng);
        auto r = microstrip_params(h, w, t, er);
        EXPECT_GT(r.z0, 0);
        EXPECT_GE(r.eps_eff, 1.0);
        EXPECT_LE(r.eps_eff, er);
    }
}

TEST(Microstrip, InvalidGeometry)
{
    try {
        microstrip_params(0.0, 0.4, 0.035, 4.3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_geometry);
    }
}

TEST(Microstrip, WidthSolveInvertsImpedance)
{
    double w = microstrip_width_for_z0(50.0, 0.15, 0.035, 4.0);
    EXPECT_NEAR(microstrip_params(0.15, w, 0.035, 4.0).z0, 50.0, 1e-8);
}

TEST(Stimulus, Prbs7PeriodAndBalance)
{
    for (std::uint64_t seed : {0u, 1u, 57u, 126u}) {
        auto bits = prbs7_bits(3 * 127, seed);
        // recurrence of x^7 + x^6 + 1
        for (std::size_t n = 7; n < bits.size(); ++n) EXPECT_EQ(bits[n], bits[n - 6] ^ bits[n - 7]);
        for (std::size_t n = 0; n + 127 < bits.size(); ++n) EXPECT_EQ(bits[n], bits[n + 127]);
        int ones = 0;
        for (std::size_t n = 0; n < 127; ++n) ones += bits[n];
        EXPECT_EQ(ones, 64);
        // no shorter period
        for (std::size_t p = 1; p < 127; ++p) {
            if (127 % p != 0) continue;
            bool periodic = true;
            for (std::size_t n = 0; n + p < 254 && periodic; ++n) periodic = bits[n] == bits[n + p];
            EXPECT_FALSE(periodic);
        }
    }
}

TEST(Stimulus, AlternatingSquareWave)
{
    DriverSpec d;
    d.vdd = 1.2;
    d.rise_frac = d.fall_frac = 0;
    d.jitter_frac = 0;
    StimulusSpec s;
    s.pattern = Pattern::alternating;
    s.n_bits = 20;
    s.settle_bits = 0;
    const double dt = d.ui() / 64;
    auto st = prbs_stimulus(d, s, dt);
    for (std::size_t i = 1; i < st.source.samples.size(); ++i) {
        double v = st.source.samples[i];
        EXPECT_TRUE(v == 0.0 || v == 1.2);
        double t = st.source.time(i);
        auto k = static_cast<long>(std::floor(t / d.ui() + 1e-9));
        if (std::abs(t / d.ui() - std::round(t / d.ui())) < 1e-6) continue;
        EXPECT_EQ(v, k % 2 == 0 ? 1.2 : 0.0) << t;
    }
}

TEST(Stimulus, JitterStaysInsideBound)
{
    DriverSpec d;
    d.f_clock_mhz = 800;
    d.vdd = 1.0;
    d.rise_frac = d.fall_frac = 0.1;
    d.jitter_frac = 0.05;
    StimulusSpec s;
    s.n_bits = 256;
    s.settle_bits = 0;
    s.seed = 9;
    const double dt = 0.1e-12;
    auto st = prbs_stimulus(d, s, dt);
    const double half = 0.5 * 0.05 * 1250e-12;
    EXPECT_NEAR(half, 31.25e-12, 1e-18);
    double worst = 0;
    std::size_t edges = 0;
    const auto& v = st.source.samples;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if ((v[i - 1] < 0.5) != (v[i] < 0.5)) {
            double tc = st.source.time(i - 1) + dt * (0.5 - v[i - 1]) / (v[i] - v[i - 1]);
            double k = std::round((tc - st.bit_phase) / st.ui);
            double dev = tc - (st.bit_phase + k * st.ui);
            worst = std::max(worst, std::abs(dev));
            ++edges;
        }
    }
    EXPECT_GT(edges, 100u);
    EXPECT_LE(worst, half + 1e-15);
    EXPECT_GT(worst, 0.5 * half);
}

TEST(Simulator, MatchedLineHalvesStep)
{
    auto net = step_net(50, {line(50, 1e-9), lumped(LumpedKind::shunt_r_to_ground, 50)});
    SimConfig cfg;
    cfg.dt = 1e-12;
    auto res = simulate_transient(net, step_stim(2), cfg);
    EXPECT_NEAR(first_departure(res.rx), 1e-9, 1.5e-12);
    for (double t = 1.01e-9; t < 9.9e-9; t += 0.1e-9) EXPECT_NEAR(at(res.rx, t), 0.5, 0.005) << t;
}

TEST(Simulator, MatchedSourceOpenEndDoubles)
{
    auto net = step_net(50, {line(50, 1e-9)});
    SimConfig cfg;
    cfg.dt = 1e-12;
    auto res = simulate_transient(net, step_stim(2), cfg);
    for (double t = 1.01e-9; t < 9.9e-9; t += 0.1e-9) EXPECT_NEAR(at(res.rx, t), 1.0, 1e-9) << t;
    EXPECT_NEAR(at(res.rx, 0.9e-9), 0.0, 1e-12);
}

TEST(Simulator, BounceDiagramWithLowSourceImpedance)
{
    // incident 2/3 V, open end doubles, source reflects -1/3
    auto net = step_net(25, {line(50, 1e-9)});
    SimConfig cfg;
    cfg.dt = 1e-12;
    auto res = simulate_transient(net, step_stim(4), cfg);
    for (double t = 1.02e-9; t < 2.98e-9; t += 0.05e-9) EXPECT_NEAR(at(res.rx, t), 4.0 / 3.0, 1e-9) << t;
    for (double t = 3.02e-9; t < 4.98e-9; t += 0.05e-9) EXPECT_NEAR(at(res.rx, t), 8.0 / 9.0, 1e-9) << t;
}

TEST(Simulator, MatchedLineAcrossImpedanceRange)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(30, 90);
    for (int i = 0; i < 20; ++i) {
        double z = u(rng);
        auto net = step_net(z, {line(z, 0.7e-9), lumped(LumpedKind::shunt_r_to_ground, z)});
        SimConfig cfg;
        cfg.dt = 1e-12;
        auto res = simulate_transient(net, step_stim(2), cfg);
        for (double t = 0.71e-9; t < 9e-9; t += 0.37e-9) EXPECT_NEAR(at(res.rx, t), 0.5, 0.005);
    }
}

TEST(Simulator, DelayIsSumOfSegments)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> z(30, 90), tau(0.05e-9, 0.6e-9);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<NetElement> el;
        double total = 0;
        int segs = 1 + trial % 4;
        for (int s = 0; s < segs; ++s) {
            double t = tau(rng);
            total += t;
            el.push_back(line(z(rng), t));
        }
        auto net = step_net(40, el, 0.5e-12);
        SimConfig cfg;
        cfg.dt = 2e-12;
        auto res = simulate_transient(net, step_stim(2), cfg);
        EXPECT_NEAR(first_departure(res.rx, 1e-12), total, 2 * cfg.dt + 1e-15);
        EXPECT_NEAR(net.total_delay(), total, 1e-18);
    }
}

TEST(Simulator, DcSteadyStateMatchesResistiveSolve)
{
    // TX -R1- a =TL= b -L- c (C) ; branch at c: TL, R_stub ; c -R2- d, R_d to ground, C_rx
    const double r_tx = 30, r1 = 5, r_stub = 40, r2 = 2, r_d = 100;
    std::vector<NetElement> el{lumped(LumpedKind::series_r, r1),
                               line(50, 0.3e-9),
                               lumped(LumpedKind::series_l, 1e-9),
                               lumped(LumpedKind::shunt_c, 1e-12),
                               {BranchStub{{line(60, 0.1e-9), lumped(LumpedKind::shunt_r_to_ground, r_stub)}}, "stub"},
                               lumped(LumpedKind::series_r, r2),
                               lumped(LumpedKind::shunt_r_to_ground, r_d)};
    auto net = step_net(r_tx, el, 1e-12);
    SimConfig cfg;
    cfg.dt = 5e-12;
    auto res = simulate_transient(net, step_stim(60), cfg);
    // oracle: lines and inductor are shorts, capacitors open; nodes c (junction) and d
    Eigen::Matrix2d G;
    G << 1 / (r_tx + r1) + 1 / r_stub + 1 / r2, -1 / r2, -1 / r2, 1 / r2 + 1 / r_d;
    Eigen::Vector2d I(1.0 / (r_tx + r1), 0.0);
    Eigen::Vector2d v = G.lu().solve(I);
    EXPECT_NEAR(res.rx.samples.back(), v[1], 0.005 * v[1]);
    EXPECT_NEAR(dc_rx_voltage(net, 1.0), v[1], 1e-12);
}

TEST(Simulator, ResistiveNetworkStaysWithinRails)
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> r(1, 200);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<NetElement> el;
        for (int k = 0; k < 5; ++k) {
            el.push_back(lumped(LumpedKind::series_r, r(rng)));
            el.push_back(lumped(LumpedKind::shunt_r_to_ground, r(rng)));
        }
        auto net = step_net(r(rng), el);
        net.driver.rise_frac = 0.2;
        net.driver.jitter_frac = 0.03;
        StimulusSpec s;
        s.n_bits = 40;
        s.settle_bits = 0;
        SimConfig cfg;
        cfg.keep_all_nodes = true;
        auto res = simulate_transient(net, s, cfg);
        for (const auto& w : res.nodes)
            for (double x : w.samples) {
                EXPECT_GE(x, -1e-12);
                EXPECT_LE(x, 1.0 + 1e-12);
            }
    }
}

TEST(Simulator, TimestepTooCoarse)
{
    auto net = step_net(50, {line(50, 10e-12)});
    SimConfig cfg;
    cfg.dt = 5e-12;
    try {
        simulate_transient(net, step_stim(2), cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::timestep_too_coarse);
    }
    EXPECT_LE(choose_timestep(net, 8), 2.5e-12);
}

TEST(Simulator, OpenBranchRejected)
{
    auto net = step_net(50, {{BranchStub{{line(50, 0.1e-9)}}, "open"}, line(50, 0.1e-9)});
    try {
        simulate_transient(net, step_stim(2), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::non_solvable_netlist);
    }
}

TEST(Netlist, ComplexPresetBindsEveryParameter)
{
    auto space = preset_space("complex");
    auto names = netlist_parameters(preset_netlist("complex"));
    auto expected = space.names();
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(names, expected);
    auto dv = lhs_sample(space, 1, 4)[0];
    auto net = build_preset_netlist("complex", dv, space);
    EXPECT_EQ(net.driver.r_tx, space.value(dv, "R_tx"));
    EXPECT_NEAR(net.c_rx, space.value(dv, "C_rx") * 1e-12, 1e-24);
    std::size_t tls = 0;
    for (const auto& e : net.elements) tls += std::holds_alternative<TLSegment>(e.item);
    EXPECT_EQ(tls, 5u);  // TL4 lives in the termination stub
}

TEST(Netlist, SimplePresetIsOneMicrostrip)
{
    auto space = preset_space("simple");
    auto dv = space.from_map({{"h", 0.2}, {"w", 0.4}, {"t", 0.035}, {"eps_r", 4.3}, {"l", 50}});
    auto net = build_preset_netlist("simple", dv, space);
    ASSERT_EQ(net.elements.size(), 1u);
    const auto& tl = std::get<TLSegment>(net.elements[0].item);
    auto ms = microstrip_params(0.2, 0.4, 0.035, 4.3);
    EXPECT_EQ(tl.z0, ms.z0);
    EXPECT_EQ(tl.eps_eff, ms.eps_eff);
    EXPECT_DOUBLE_EQ(tl.length_mm, 50);
    EXPECT_DOUBLE_EQ(net.driver.f_clock_mhz, 800);
}

TEST(Netlist, MissingParameterIsNamed)
{
    auto space = preset_space("complex");
    auto m = space.to_map(lhs_sample(space, 1, 4)[0]);
    m.erase("R_T");
    try {
        build_netlist(preset_netlist("complex"), m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::unbound_parameter);
        EXPECT_STREQ(e.what(), "R_T");
    }
}

TEST(Simulator, DeterministicAndConvergentOnComplexPreset)
{
    auto space = preset_space("complex");
    auto dv = lhs_sample(space, 1, 21)[0];
    auto net = build_preset_netlist("complex", dv, space);
    StimulusSpec s;
    s.n_bits = 40;
    s.settle_bits = 8;
    s.seed = 3;
    SimConfig cfg;
    cfg.dt = choose_timestep(net, 8);
    auto a = simulate_transient(net, s, cfg);
    auto b = simulate_transient(net, s, cfg);
    EXPECT_EQ(a.rx.samples, b.rx.samples);
    cfg.dt *= 0.5;
    auto c = simulate_transient(net, s, cfg);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.rx.samples.size() && 2 * i < c.rx.samples.size(); ++i) {
        double d = a.rx.samples[i] - c.rx.samples[2 * i];
        num += d * d;
        den += a.rx.samples[i] * a.rx.samples[i];
    }
    EXPECT_LT(std::sqrt(num / den), 0.01);
}
