#include <algorithm>
#include <cmath>
#include <optional>

#include "sisurr/error.hpp"
#include "sisurr/eye.hpp"

namespace sisurr {

std::array<double, kFeatureCount> WaveformFeatures::values() const
{
    return {energy,
            entropy,
            v_max,
            v_min,
            has_rise_time ? rise_time : std::nan(""),
            overshoot,
            has_prop_delay ? prop_delay : std::nan("")};
}

std::array<bool, kFeatureCount> WaveformFeatures::present() const
{
    return {true, true, true, true, has_rise_time, true, has_prop_delay};
}

namespace {

double median(std::vector<double>& v)
{
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

/// First time after `from` where the signal crosses `level` in the given direction.
std::optional<double> crossing(const Waveform& w, double level, bool rising, std::size_t from = 0)
{
    for (std::size_t i = std::max<std::size_t>(from, 1); i < w.samples.size(); ++i) {
        const double a = w.samples[i - 1];
        const double b = w.samples[i];
        bool hit = rising ? (a < level && b >= level) : (a > level && b <= level);
        if (hit) {
            double f = (level - a) / (b - a);
            return w.time(i - 1) + f * w.dt;
        }
    }
    return std::nullopt;
}

}  // namespace

std::pair<double, double> settled_levels(const std::vector<double>& v)
{
    if (v.empty()) return {0.0, 0.0};
    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double mid = 0.5 * (*mn + *mx);
    std::vector<double> below, above;
    for (double x : v) (x < mid ? below : above).push_back(x);
    double lo = below.empty() ? *mn : median(below);
    double hi = above.empty() ? *mx : median(above);
    return {lo, hi};
}

WaveformFeatures waveform_features(const Waveform& tx, const Waveform& rx, double vdd, const FeatureOptions& opts)
{
    if (!(vdd > 0)) fail(ErrorCode::invalid_argument, "features need vdd > 0");
    if (rx.samples.empty()) fail(ErrorCode::insufficient_data, "empty waveform");
    if (tx.samples.size() != rx.samples.size() || std::abs(tx.dt - rx.dt) > 1e-12 * rx.dt)
        fail(ErrorCode::dimension_mismatch, "tx and rx waveforms must share dt and span");

    WaveformFeatures f;
    auto [mn, mx] = std::minmax_element(rx.samples.begin(), rx.samples.end());
    f.v_min = *mn;
    f.v_max = *mx;

    double e = 0;
    for (double x : rx.samples) e += x * x;
    f.energy = e * rx.dt;

    if (f.v_max > f.v_min) {
        std::vector<double> hist(static_cast<std::size_t>(opts.entropy_bins), 0.0);
        const double span = f.v_max - f.v_min;
        for (double x : rx.samples) {
            auto b = static_cast<int>((x - f.v_min) / span * opts.entropy_bins);
            b = std::clamp(b, 0, opts.entropy_bins - 1);
            hist[static_cast<std::size_t>(b)] += 1;
        }
        const double n = static_cast<double>(rx.samples.size());
        double h = 0;
        for (double c : hist)
            if (c > 0) h -= c / n * std::log(c / n);
        f.entropy = h;
    }

    f.overshoot = std::max(0.0, (f.v_max - vdd) / vdd);

    auto [lo, hi] = settled_levels(rx.samples);
    const double swing = hi - lo;
    if (swing > 0) {
        auto t10 = crossing(rx, lo + opts.rise_lo * swing, true);
        if (t10) {
            auto start = static_cast<std::size_t>(std::max(0.0, (*t10 - rx.t0) / rx.dt));
            auto t90 = crossing(rx, lo + opts.rise_hi * swing, true, start);
            if (t90) {
                f.rise_time = std::max(0.0, *t90 - *t10);
                f.has_rise_time = true;
            }
        }
    }

    auto [tlo, thi] = settled_levels(tx.samples);
    if (thi > tlo && swing > 0) {
        auto t_tx = crossing(tx, tlo + opts.delay_level * (thi - tlo), true);
        auto t_rx = crossing(rx, lo + opts.delay_level * swing, true);
        if (t_tx && t_rx) {
            f.prop_delay = *t_rx - *t_tx;
            f.has_prop_delay = true;
        }
    }
    return f;
}

}  // namespace sisurr
