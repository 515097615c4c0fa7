#include "sisurr/eye.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sisurr/error.hpp"

namespace sisurr {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

double sample_at(const Waveform& w, double t)
{
    const double p = (t - w.t0) / w.dt;
    if (p <= 0) return w.samples.front();
    const auto i = static_cast<std::size_t>(p);
    if (i + 1 >= w.samples.size()) return w.samples.back();
    const double f = p - static_cast<double>(i);
    return w.samples[i] + f * (w.samples[i + 1] - w.samples[i]);
}

/// Number of whole bit periods between phase and the end of the record.
long complete_periods(const Waveform& w, double ui, double phase)
{
    const double t_end = w.t0 + w.dt * static_cast<double>(w.samples.size());
    return static_cast<long>(std::floor((t_end - phase) / ui + 1e-9));
}

}  // namespace

std::size_t EyeDiagram::sample_count() const
{
    std::size_t n = 0;
    for (const auto& b : traces) n += b.size();
    return n;
}

EyeDiagram fold_eye(const Waveform& rx, double ui, const FoldOptions& opts)
{
    if (!(ui > 0)) fail(ErrorCode::invalid_argument, "fold needs ui > 0");
    if (opts.bins < 1) fail(ErrorCode::invalid_argument, "fold needs at least one bin");
    if (opts.settle_bits < 0) fail(ErrorCode::invalid_argument, "settle_bits must be non-negative");
    if (rx.duration() <= (opts.settle_bits + 2) * ui)
        fail(ErrorCode::insufficient_data, "waveform spans " + format_double(rx.duration() / ui) +
                                               " UI, needs more than settle + 2");
    EyeDiagram eye;
    eye.ui = ui;
    eye.bins = opts.bins;
    eye.traces.assign(static_cast<std::size_t>(opts.bins), {});
    eye.tags.assign(static_cast<std::size_t>(opts.bins), {});
    eye.tagged = opts.bits != nullptr;

    const long n_full = complete_periods(rx, ui, opts.phase);
    for (std::size_t i = 0; i < rx.samples.size(); ++i) {
        const double u = rx.time(i) - opts.phase;
        if (u < 0) continue;
        double periods = u / ui;
        auto k = static_cast<long>(std::floor(periods));
        if (k < opts.settle_bits || k >= n_full) continue;
        double frac = periods - static_cast<double>(k);
        int b = std::min(opts.bins - 1, static_cast<int>(std::floor(frac * opts.bins)));
        std::int8_t tag = -1;
        if (opts.bits) {
            long kb = k - opts.bit_shift;
            if (kb >= 0 && kb < static_cast<long>(opts.bits->size())) tag = static_cast<std::int8_t>((*opts.bits)[static_cast<std::size_t>(kb)] ? 1 : 0);
        }
        eye.traces[static_cast<std::size_t>(b)].push_back(rx.samples[i]);
        eye.tags[static_cast<std::size_t>(b)].push_back(tag);
    }
    return eye;
}

DataAlignment align_to_data(const Waveform& rx, double ui, double v_ref, const std::vector<std::uint8_t>& bits,
                            int settle_bits, int max_shift)
{
    DataAlignment out;
    const double t_start = rx.t0 + settle_bits * ui;
    double sx = 0, sy = 0;
    std::size_t crossings = 0;
    for (std::size_t i = 0; i + 1 < rx.samples.size(); ++i) {
        if (rx.time(i) < t_start) continue;
        const double a = rx.samples[i] - v_ref;
        const double b = rx.samples[i + 1] - v_ref;
        if ((a < 0 && b >= 0) || (a >= 0 && b < 0)) {
            const double tc = rx.time(i) + rx.dt * a / (a - b);
            const double theta = kTwoPi * std::fmod(tc, ui) / ui;
            sx += std::cos(theta);
            sy += std::sin(theta);
            ++crossings;
        }
    }
    if (crossings > 0 && std::hypot(sx, sy) > 1e-12) {
        double theta = std::atan2(sy, sx);
        if (theta < 0) theta += kTwoPi;
        out.phase = theta / kTwoPi * ui;
    }

    const long n_full = complete_periods(rx, ui, out.phase);
    std::vector<std::int8_t> decided;
    for (long k = 0; k < n_full; ++k)
        decided.push_back(sample_at(rx, out.phase + (static_cast<double>(k) + 0.5) * ui) > v_ref ? 1 : 0);

    double best = std::numeric_limits<double>::infinity();
    for (int m = 0; m < max_shift; ++m) {
        std::size_t total = 0, wrong = 0;
        for (long k = settle_bits; k < n_full; ++k) {
            long kb = k - m;
            if (kb < 0 || kb >= static_cast<long>(bits.size())) continue;
            ++total;
            wrong += decided[static_cast<std::size_t>(k)] != bits[static_cast<std::size_t>(kb)];
        }
        if (total == 0) continue;
        double frac = static_cast<double>(wrong) / static_cast<double>(total);
        if (frac < best) {
            best = frac;
            out.bit_shift = m;
        }
    }
    out.mismatch = std::isfinite(best) ? best : 1.0;
    return out;
}

std::vector<double> EyeContour::flat() const
{
    std::vector<double> v(upper.begin(), upper.end());
    v.insert(v.end(), lower.begin(), lower.end());
    return v;
}

EyeContour EyeContour::from_flat(const double* values, double ui, double v_ref)
{
    EyeContour c;
    std::copy(values, values + kContourBins, c.upper.begin());
    std::copy(values + kContourBins, values + kContourWidth, c.lower.begin());
    c.ui = ui;
    c.v_ref = v_ref;
    c.closed = contour_closed(c);
    return c;
}

bool contour_closed(const EyeContour& c)
{
    return !(c.upper[kCenterBin] > c.lower[kCenterBin]);
}

namespace {

/// Fills missing entries from the nearest present bin (lower index wins ties).
/// Returns false when nothing is present.
bool fill_missing(std::array<double, kContourBins>& side, const std::array<bool, kContourBins>& have)
{
    bool any = std::any_of(have.begin(), have.end(), [](bool h) { return h; });
    if (!any) return false;
    auto src = side;
    for (int b = 0; b < kContourBins; ++b) {
        if (have[static_cast<std::size_t>(b)]) continue;
        for (int d = 1; d < kContourBins; ++d) {
            if (b - d >= 0 && have[static_cast<std::size_t>(b - d)]) {
                side[static_cast<std::size_t>(b)] = src[static_cast<std::size_t>(b - d)];
                break;
            }
            if (b + d < kContourBins && have[static_cast<std::size_t>(b + d)]) {
                side[static_cast<std::size_t>(b)] = src[static_cast<std::size_t>(b + d)];
                break;
            }
        }
    }
    return true;
}

}  // namespace

EyeContour extract_contour(const EyeDiagram& eye, double v_ref)
{
    if (eye.bins != kContourBins)
        fail(ErrorCode::invalid_argument, "contour extraction expects " + std::to_string(kContourBins) + " bins");
    EyeContour c;
    c.ui = eye.ui;
    c.v_ref = v_ref;
    std::array<bool, kContourBins> have_up{}, have_lo{};
    const double inf = std::numeric_limits<double>::infinity();
    c.upper.fill(inf);
    c.lower.fill(-inf);
    for (int b = 0; b < kContourBins; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        const auto& tr = eye.traces[ub];
        for (std::size_t s = 0; s < tr.size(); ++s) {
            bool is_high;
            if (eye.tagged) {
                if (eye.tags[ub][s] < 0) continue;
                is_high = eye.tags[ub][s] == 1;
            } else {
                is_high = tr[s] > v_ref;
            }
            if (is_high) {
                c.upper[ub] = std::min(c.upper[ub], tr[s]);
                have_up[ub] = true;
            } else {
                c.lower[ub] = std::max(c.lower[ub], tr[s]);
                have_lo[ub] = true;
            }
        }
        if (!have_up[ub] || !have_lo[ub]) c.partial = true;
    }
    bool up_ok = fill_missing(c.upper, have_up);
    bool lo_ok = fill_missing(c.lower, have_lo);
    if (!up_ok || !lo_ok) {
        // everything on one side of the decision: no opening anywhere
        if (up_ok) c.lower = c.upper;
        else if (lo_ok) c.upper = c.lower;
        else {
            c.upper.fill(v_ref);
            c.lower.fill(v_ref);
        }
        c.closed = true;
        c.partial = true;
        return c;
    }
    c.closed = contour_closed(c);
    return c;
}

EyeMetrics eye_metrics(const EyeContour& c, double vdd, double ui)
{
    if (!(vdd > 0) || !(ui > 0)) fail(ErrorCode::invalid_argument, "eye metrics need vdd > 0 and ui > 0");
    EyeMetrics m;
    if (c.closed || contour_closed(c)) return m;
    m.eh_norm = std::clamp((c.upper[kCenterBin] - c.lower[kCenterBin]) / vdd, 0.0, 1.0);
    int lo = kCenterBin, hi = kCenterBin;
    while (lo - 1 >= 0 && c.upper[static_cast<std::size_t>(lo - 1)] > c.lower[static_cast<std::size_t>(lo - 1)]) --lo;
    while (hi + 1 < kContourBins && c.upper[static_cast<std::size_t>(hi + 1)] > c.lower[static_cast<std::size_t>(hi + 1)]) ++hi;
    const double bin_width = ui / kContourBins;
    m.ew_norm = std::clamp((hi - lo + 1) * bin_width / ui, 0.0, 1.0);
    return m;
}

EyeAnalysis analyze_eye(const SimResult& sim, double vdd, int settle_bits)
{
    EyeAnalysis out;
    const auto& st = sim.stimulus;
    auto [lo, hi] = settled_levels(sim.rx.samples);
    const double v_mid = 0.5 * (lo + hi);
    out.alignment = align_to_data(sim.rx, st.ui, v_mid, st.bits, settle_bits);
    FoldOptions fo;
    fo.phase = out.alignment.phase;
    fo.settle_bits = settle_bits;
    fo.bits = &st.bits;
    fo.bit_shift = out.alignment.bit_shift;
    EyeDiagram eye = fold_eye(sim.rx, st.ui, fo);
    out.contour = extract_contour(eye, 0.5 * vdd);
    out.metrics = eye_metrics(out.contour, vdd, st.ui);
    out.features = waveform_features(sim.tx, sim.rx, vdd);
    return out;
}

void write_contour_csv(const std::string& path, const EyeContour& c)
{
    Eigen::MatrixXd m(kContourBins, 3);
    for (int b = 0; b < kContourBins; ++b) {
        m(b, 0) = c.bin_center(b);
        m(b, 1) = c.upper[static_cast<std::size_t>(b)];
        m(b, 2) = c.lower[static_cast<std::size_t>(b)];
    }
    write_csv(path, {"t", "upper", "lower"}, m);
}

}  // namespace sisurr
