#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sisurr/circuit.hpp"
#include "sisurr/error.hpp"
#include "sisurr/eye.hpp"
#include "sisurr/presets.hpp"

#include "oracles.hpp"

using namespace sisurr;
using namespace sisurr::oracle;

TEST(Fold, ConstantWaveformGivesSingletonBins)
{
    const double ui = 100e-12;
    auto w = constant_wave(0.0, ui / 400, 400 * 40);
    FoldOptions fo;
    fo.settle_bits = 4;
    auto eye = fold_eye(w, ui, fo);
    for (const auto& b : eye.traces) {
        ASSERT_FALSE(b.empty());
        for (double v : b) EXPECT_EQ(v, 0.0);
    }
    auto c = extract_contour(eye, 0.5);
    EXPECT_TRUE(c.closed);
    auto m = eye_metrics(c, 1.0, ui);
    EXPECT_EQ(m.eh_norm, 0.0);
    EXPECT_EQ(m.ew_norm, 0.0);
}

TEST(Fold, TooShortWaveform)
{
    auto w = constant_wave(0.0, 1e-12, 100);
    FoldOptions fo;
    fo.settle_bits = 16;
    try {
        fold_eye(w, 10e-12, fo);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::insufficient_data);
    }
}

TEST(Fold, IdealSquareWaveOpensFully)
{
    // samples sit half a step off the bit boundaries so no sample is ambiguous
    const double ui = 625e-12, dt = ui / 400;
    std::vector<std::uint8_t> bits(64);
    for (std::size_t k = 0; k < bits.size(); ++k) bits[k] = k % 2 == 0;
    Waveform w{dt / 2, dt, {}};
    for (std::size_t i = 0; i < 400 * bits.size(); ++i) w.samples.push_back(bits[i / 400] ? 1.2 : 0.0);
    struct {
        Waveform source;
        double ui;
    } st{w, ui};
    FoldOptions fo;
    fo.phase = 0;
    fo.settle_bits = 4;
    fo.bits = &bits;
    auto eye = fold_eye(st.source, st.ui, fo);
    for (const auto& b : eye.traces)
        for (double v : b) EXPECT_TRUE(v == 0.0 || v == 1.2);
    auto c = extract_contour(eye, 0.6);
    for (int b = 0; b < kContourBins; ++b) {
        EXPECT_EQ(c.upper[static_cast<std::size_t>(b)], 1.2);
        EXPECT_EQ(c.lower[static_cast<std::size_t>(b)], 0.0);
    }
    auto m = eye_metrics(c, 1.2, st.ui);
    EXPECT_DOUBLE_EQ(m.eh_norm, 1.0);
    EXPECT_DOUBLE_EQ(m.ew_norm, 1.0);
    // the untagged split at v_ref agrees for an ideal eye
    fo.bits = nullptr;
    auto c2 = extract_contour(fold_eye(st.source, st.ui, fo), 0.6);
    EXPECT_EQ(c2.upper, c.upper);
    EXPECT_EQ(c2.lower, c.lower);
}

TEST(Fold, SampleCountIsConserved)
{
    DriverSpec d;
    StimulusSpec s;
    s.n_bits = 256;
    s.settle_bits = 16;
    const double dt = d.ui() / 400;
    auto st = prbs_stimulus(d, s, dt);
    FoldOptions fo;
    fo.phase = st.bit_phase;
    fo.settle_bits = 16;
    auto eye = fold_eye(st.source, st.ui, fo);
    std::size_t expected = 0;
    const double t_end = st.source.duration();
    const auto n_full = static_cast<long>(std::floor((t_end - st.bit_phase) / st.ui + 1e-9));
    for (std::size_t i = 0; i < st.source.samples.size(); ++i) {
        double u = st.source.time(i) - st.bit_phase;
        if (u < 0) continue;
        auto k = static_cast<long>(std::floor(u / st.ui));
        if (k >= 16 && k < n_full) ++expected;
    }
    EXPECT_EQ(eye.sample_count(), expected);
    EXPECT_NEAR(static_cast<double>(expected), (n_full - 16) * 400.0, 2.0);
    for (const auto& b : eye.traces) EXPECT_NEAR(static_cast<double>(b.size()), (n_full - 16) * 8.0, 2.0 * (n_full - 16));
}

TEST(Contour, TrapezoidMatchesAnalyticFold)
{
    DriverSpec d;
    d.vdd = 1.0;
    d.f_clock_mhz = 800;
    d.rise_frac = d.fall_frac = 0.2;
    d.jitter_frac = 0;
    StimulusSpec s;
    s.pattern = Pattern::alternating;
    s.n_bits = 48;
    s.settle_bits = 4;
    const double dt = d.ui() / 400;
    auto st = prbs_stimulus(d, s, dt);
    auto align = align_to_data(st.source, st.ui, 0.5, st.bits, 4);
    EXPECT_NEAR(align.phase, std::fmod(st.bit_phase, st.ui), dt);
    EXPECT_EQ(align.bit_shift, 0);
    FoldOptions fo;
    fo.phase = align.phase;
    fo.settle_bits = 4;
    fo.bits = &st.bits;
    auto c = extract_contour(fold_eye(st.source, st.ui, fo), 0.5);

    const double tr = 0.2 * d.t_clock();
    const double w = st.ui / kContourBins;
    const double slope = d.vdd / tr;
    EyeContour oracle;
    oracle.ui = st.ui;
    for (int b = 0; b < kContourBins; ++b) {
        // extremes over the bin, evaluated on a fine grid of the continuous waveform
        double up = 1e9, lo = -1e9;
        for (int k = 0; k <= 1000; ++k) {
            double sx = (b + k / 1000.0) * w;
            if (sx >= st.ui) sx = st.ui - 1e-18;
            up = std::min(up, trapezoid_level(sx, st.ui, tr, d.vdd, 1));
            lo = std::max(lo, trapezoid_level(sx, st.ui, tr, d.vdd, 0));
        }
        oracle.upper[static_cast<std::size_t>(b)] = up;
        oracle.lower[static_cast<std::size_t>(b)] = lo;
        EXPECT_NEAR(c.upper[static_cast<std::size_t>(b)], up, slope * dt * 1.01) << b;
        EXPECT_NEAR(c.lower[static_cast<std::size_t>(b)], lo, slope * dt * 1.01) << b;
    }
    oracle.closed = contour_closed(oracle);
    auto m = eye_metrics(c, 1.0, st.ui);
    auto mo = eye_metrics(oracle, 1.0, st.ui);
    EXPECT_NEAR(m.ew_norm, mo.ew_norm, 1.0 / kContourBins + 1e-12);
    EXPECT_NEAR(m.eh_norm, mo.eh_norm, 1e-9);
    EXPECT_DOUBLE_EQ(mo.eh_norm, 1.0);
}

TEST(Contour, OneSidedBinsCopyNeighbours)
{
    EyeDiagram eye;
    eye.ui = 1e-9;
    eye.bins = kContourBins;
    eye.traces.assign(kContourBins, {});
    eye.tags.assign(kContourBins, {});
    for (int b = 0; b < kContourBins; ++b) {
        eye.traces[static_cast<std::size_t>(b)] = {1.0};
        if (b != 10) eye.traces[static_cast<std::size_t>(b)].push_back(0.0);
        eye.tags[static_cast<std::size_t>(b)].assign(eye.traces[static_cast<std::size_t>(b)].size(), -1);
    }
    auto c = extract_contour(eye, 0.5);
    EXPECT_TRUE(c.partial);
    EXPECT_FALSE(c.closed);
    EXPECT_EQ(c.lower[10], 0.0);
}

TEST(Metrics, IdealAndClosedEyes)
{
    auto open = flat_contour(1.5, 0.0, 625e-12);
    auto m = eye_metrics(open, 1.5, 625e-12);
    EXPECT_DOUBLE_EQ(m.eh_norm, 1.0);
    EXPECT_DOUBLE_EQ(m.ew_norm, 1.0);
    auto closed = flat_contour(0.7, 0.8, 625e-12);
    EXPECT_TRUE(closed.closed);
    auto mc = eye_metrics(closed, 1.5, 625e-12);
    EXPECT_EQ(mc.eh_norm, 0.0);
    EXPECT_EQ(mc.ew_norm, 0.0);
}

TEST(Metrics, InvariantUnderVoltageAndTimeScaling)
{
    auto space = preset_space("buffered-simple");
    auto dv = lhs_sample(space, 1, 12)[0];
    auto net = build_preset_netlist("simple", dv, space);
    StimulusSpec s;
    s.n_bits = 96;
    s.settle_bits = 16;
    auto sim = simulate_transient(net, s);
    auto base = analyze_eye(sim, net.driver.vdd, 16);

    SimResult scaled = sim;
    for (auto* w : {&scaled.rx, &scaled.tx})
        for (double& x : w->samples) x *= 2.5;
    auto volt = analyze_eye(scaled, 2.5 * net.driver.vdd, 16);
    EXPECT_NEAR(volt.metrics.eh_norm, base.metrics.eh_norm, 1e-12);
    EXPECT_NEAR(volt.metrics.ew_norm, base.metrics.ew_norm, 1e-12);

    SimResult slow = sim;
    for (auto* w : {&slow.rx, &slow.tx}) w->dt *= 4;
    slow.stimulus.ui *= 4;
    slow.stimulus.bit_phase *= 4;
    auto time = analyze_eye(slow, net.driver.vdd, 16);
    EXPECT_NEAR(time.metrics.eh_norm, base.metrics.eh_norm, 1e-12);
    EXPECT_NEAR(time.metrics.ew_norm, base.metrics.ew_norm, 1e-12);

    auto again = analyze_eye(sim, net.driver.vdd, 16);
    EXPECT_EQ(again.contour.flat(), base.contour.flat());
}

TEST(Metrics, SimulatedEyeRespondsToJitter)
{
    auto space = preset_space("buffered-simple");
    auto m = space.to_map(lhs_sample(space, 1, 3)[0]);
    m["jitter"] = 0;
    m["rise_fall"] = 10;
    m["R_tx"] = 45;
    auto clean = analyze_eye(simulate_transient(build_netlist(preset_netlist("simple"), m), StimulusSpec{}), m["vdd"], 16);
    m["jitter"] = 5;
    auto jit = analyze_eye(simulate_transient(build_netlist(preset_netlist("simple"), m), StimulusSpec{}), m["vdd"], 16);
    EXPECT_LT(jit.metrics.ew_norm, clean.metrics.ew_norm);
    EXPECT_GT(clean.metrics.eh_norm, 0.0);
}

TEST(Features, ZeroWaveform)
{
    auto z = constant_wave(0.0, 1e-12, 1000);
    auto f = waveform_features(z, z, 1.0);
    EXPECT_EQ(f.energy, 0.0);
    EXPECT_EQ(f.entropy, 0.0);
    EXPECT_EQ(f.overshoot, 0.0);
    EXPECT_FALSE(f.has_rise_time);
    EXPECT_FALSE(f.has_prop_delay);
    EXPECT_TRUE(std::isnan(f.values()[4]));
}

TEST(Features, TwoLevelEntropyIsLn2)
{
    Waveform w{0.0, 1e-12, {}};
    for (int i = 0; i < 2000; ++i) w.samples.push_back((i / 100) % 2 ? 1.0 : 0.0);
    auto f = waveform_features(w, w, 1.0);
    EXPECT_NEAR(f.entropy, std::log(2.0), 1e-3);
    EXPECT_NEAR(f.energy, 1000 * 1e-12, 1e-18);
}

TEST(Features, MatchedStepDelayAndNoOvershoot)
{
    Netlist net;
    net.driver.vdd = 1.0;
    net.driver.rise_frac = net.driver.fall_frac = 0.0;
    net.driver.r_tx = 50;
    net.driver.f_clock_mhz = 100;
    TLSegment tl;
    tl.z0 = 50;
    tl.length_mm = 0.4e-9 * kSpeedOfLight / 1e-3;
    net.elements = {{tl, "tl"}, {LumpedElement{LumpedKind::shunt_r_to_ground, 50}, "rt"}};
    StimulusSpec s;
    s.pattern = Pattern::step;
    s.n_bits = 2;
    s.settle_bits = 0;
    SimConfig cfg;
    cfg.dt = 1e-12;
    auto sim = simulate_transient(net, s, cfg);
    auto f = waveform_features(sim.tx, sim.rx, 1.0);
    EXPECT_EQ(f.overshoot, 0.0);
    ASSERT_TRUE(f.has_prop_delay);
    EXPECT_NEAR(f.prop_delay, 0.4e-9, cfg.dt);
    EXPECT_NEAR(f.v_max, 0.5, 1e-9);
}

TEST(Mask, Ddr3FullOpenEyePasses)
{
    const auto& m = ddr_mask("DDR3-1600");
    EXPECT_DOUBLE_EQ(m.ui, 625e-12);
    EXPECT_DOUBLE_EQ(m.v_ref, 0.75);
    auto r = check_mask(flat_contour(1.5, 0.0, 625e-12), m, 1.5);
    EXPECT_TRUE(r.pass);
    EXPECT_EQ(r.severity, 0.0);
}

TEST(Mask, ClosedEyeFailsCompletely)
{
    for (const auto& m : ddr_masks()) {
        auto r = check_mask(flat_contour(0.1, 0.2, m.ui), m, 1.2);
        EXPECT_FALSE(r.pass);
        EXPECT_EQ(r.severity, 100.0);
    }
}

TEST(Mask, HalfEncroachedAgainstRaster)
{
    const auto& m = ddr_mask("DDR3-1600");
    auto c = flat_contour(m.v_ref, 0.0, m.ui);
    c.closed = false;
    c.upper[kCenterBin] = m.v_ref + 1e-9;  // keep the center bin open
    auto r = check_mask(c, m, 1.5);
    EXPECT_FALSE(r.pass);
    EXPECT_NEAR(r.severity, 50.0, 1.0);
    EXPECT_NEAR(r.severity, raster_severity(m, c), 1.0);
}

TEST(Mask, SlopedContourAgainstRaster)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (const auto& m : ddr_masks()) {
        for (int trial = 0; trial < 5; ++trial) {
            EyeContour c;
            c.ui = m.ui;
            double a = m.v_ref + (m.v1 - m.v_ref) * (0.3 + u(rng));
            double b = m.v_ref - (m.v_ref - m.v0) * (0.3 + u(rng));
            for (int k = 0; k < kContourBins; ++k) {
                double x = (k + 0.5) / kContourBins;
                c.upper[static_cast<std::size_t>(k)] = a + 0.2 * (x - 0.5) * (m.v1 - m.v_ref);
                c.lower[static_cast<std::size_t>(k)] = b - 0.1 * (x - 0.5) * (m.v_ref - m.v0);
            }
            c.closed = contour_closed(c);
            auto r = check_mask(c, m, 1.2);
            EXPECT_NEAR(r.severity, raster_severity(m, c), 2.0) << m.name;
            EXPECT_EQ(r.pass, r.severity == 0.0);
        }
    }
}

TEST(Mask, SeverityGrowsWithMaskHeight)
{
    // With one half of the diamond clear of the contour, stretching the other
    // half can only raise the encroached fraction.
    auto m = ddr_mask("DDR4-1600");
    auto c = flat_contour(0.66, 0.45, m.ui);
    for (int k = 0; k < kContourBins; ++k) c.upper[static_cast<std::size_t>(k)] += 0.002 * std::abs(k - 25);
    double prev = -1;
    for (double v1 = 0.62; v1 < 0.9; v1 += 0.02) {
        m.v1 = v1;
        auto r = check_mask(c, m, 1.2);
        EXPECT_GE(r.severity, prev - 1e-12);
        prev = r.severity;
    }
    EXPECT_GT(prev, 0.0);
    m = ddr_mask("DDR4-1600");
    c = flat_contour(0.75, 0.55, m.ui);
    prev = -1;
    for (double v0 = 0.58; v0 > 0.3; v0 -= 0.02) {
        m.v0 = v0;
        auto r = check_mask(c, m, 1.2);
        EXPECT_GE(r.severity, prev - 1e-12);
        prev = r.severity;
    }
    EXPECT_GT(prev, 0.0);
}

TEST(Mask, PassIffZeroSeverity)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    const auto& m = ddr_mask("DDR4-1600");
    for (int trial = 0; trial < 200; ++trial) {
        EyeContour c;
        c.ui = m.ui;
        for (int k = 0; k < kContourBins; ++k) {
            c.upper[static_cast<std::size_t>(k)] = m.v1 + u(rng);
            c.lower[static_cast<std::size_t>(k)] = m.v0 + u(rng);
        }
        c.closed = contour_closed(c);
        auto r = check_mask(c, m, 1.2);
        EXPECT_EQ(r.pass, r.severity == 0.0);
        EXPECT_GE(r.severity, 0.0);
        EXPECT_LE(r.severity, 100.0);
    }
}

TEST(Mask, UiMismatchRejected)
{
    EXPECT_THROW(check_mask(flat_contour(1.5, 0, 600e-12), ddr_mask("DDR3-1600"), 1.5), Error);
}

TEST(Mask, JsonRoundTrip)
{
    for (const auto& m : ddr_masks()) {
        auto back = EyeMask::from_json(m.to_json());
        EXPECT_EQ(back.name, m.name);
        EXPECT_NEAR(back.t0, m.t0, 1e-24);
        EXPECT_NEAR(back.ui, m.ui, 1e-24);
        EXPECT_EQ(back.v1, m.v1);
    }
}
