#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sisurr/circuit.hpp"
#include "sisurr/dataset.hpp"

namespace sisurr {

struct FoldOptions {
    /// Time (s) that maps to the left edge of bin 0.
    double phase = 0;
    int settle_bits = 16;
    int bins = kContourBins;
    /// Transmitted bits; when given, every folded sample is tagged with the bit
    /// it belongs to (bit index = period index - bit_shift).
    const std::vector<std::uint8_t>* bits = nullptr;
    int bit_shift = 0;
};

struct EyeDiagram {
    double ui = 0;
    int bins = kContourBins;
    std::vector<std::vector<double>> traces;        // per bin
    std::vector<std::vector<std::int8_t>> tags;     // per bin, per sample: 1, 0 or -1 (untagged)
    bool tagged = false;

    std::size_t sample_count() const;
};

EyeDiagram fold_eye(const Waveform& rx, double ui, const FoldOptions& opts = {});

struct DataAlignment {
    double phase = 0;   // s, recovered bit boundary modulo ui
    int bit_shift = 0;  // periods between transmitted and received bit
    double mismatch = 0;  // fraction of decided bits that disagree at the best shift
};

/// Recovers the receive-side bit clock phase (circular mean of v_ref crossings)
/// and the bit latency that best lines the received levels up with the bits.
DataAlignment align_to_data(const Waveform& rx, double ui, double v_ref, const std::vector<std::uint8_t>& bits,
                            int settle_bits, int max_shift = 64);

struct EyeContour {
    std::array<double, kContourBins> upper{};
    std::array<double, kContourBins> lower{};
    double ui = 0;
    double v_ref = 0;
    bool closed = false;
    bool partial = false;

    /// upper[0..49] then lower[0..49].
    std::vector<double> flat() const;
    static EyeContour from_flat(const double* values, double ui, double v_ref);
    double bin_center(int b) const { return (b + 0.5) * ui / kContourBins; }
};

/// Inner envelope per bin. With tagged samples the upper contour is the lowest
/// sample belonging to a 1 bit and the lower contour the highest sample of a 0
/// bit; untagged eyes split samples at v_ref instead.
EyeContour extract_contour(const EyeDiagram& eye, double v_ref);

inline constexpr int kCenterBin = kContourBins / 2;

/// closed = upper <= lower at the center bin.
bool contour_closed(const EyeContour& c);

struct EyeMetrics {
    double eh_norm = 0;
    double ew_norm = 0;
};

EyeMetrics eye_metrics(const EyeContour& c, double vdd, double ui);

struct WaveformFeatures {
    double energy = 0;
    double entropy = 0;
    double v_max = 0;
    double v_min = 0;
    double rise_time = 0;
    double overshoot = 0;
    double prop_delay = 0;
    bool has_rise_time = false;
    bool has_prop_delay = false;

    std::array<double, kFeatureCount> values() const;
    std::array<bool, kFeatureCount> present() const;
};

struct FeatureOptions {
    int entropy_bins = 64;
    double rise_lo = 0.1;
    double rise_hi = 0.9;
    double delay_level = 0.5;
};

WaveformFeatures waveform_features(const Waveform& tx, const Waveform& rx, double vdd, const FeatureOptions& opts = {});

/// Low and high settled levels: medians of the samples below and above the midpoint.
std::pair<double, double> settled_levels(const std::vector<double>& v);

struct EyeMask {
    std::string name;
    double ui = 0;     // s
    double v_ref = 0;  // V
    double t0 = 0, t1 = 0;  // s
    double v0 = 0, v1 = 0;  // V

    void validate() const;
    double mid_t() const { return 0.5 * (t0 + t1); }
    /// Upper and lower diamond edges at time t; equal to v_ref outside [t0, t1].
    double top(double t) const;
    double bottom(double t) const;
    double area() const { return 0.5 * (t1 - t0) * (v1 - v0); }
    std::vector<std::array<double, 2>> polygon() const;

    json to_json() const;  // ps and V, mirroring the speed-grade table
    static EyeMask from_json(const json& j);
    static EyeMask load(const std::string& path);
};

const std::vector<EyeMask>& ddr_masks();
const EyeMask& ddr_mask(std::string_view name);

struct ComplianceResult {
    bool pass = false;
    double severity = 0;  // percent of mask area
    int worst_bin = -1;

    json to_json() const;
};

/// Rectangular strips one bin wide, evaluated at the bin centers that fall in
/// [t0, t1]; the same points decide pass/fail, so pass <=> severity == 0.
ComplianceResult check_mask(const EyeContour& c, const EyeMask& mask, double vdd);

/// Full analysis of one simulated waveform pair.
struct EyeAnalysis {
    EyeContour contour;
    EyeMetrics metrics;
    WaveformFeatures features;
    DataAlignment alignment;
};

EyeAnalysis analyze_eye(const SimResult& sim, double vdd, int settle_bits);

/// Writes 50 rows of t, upper, lower.
void write_contour_csv(const std::string& path, const EyeContour& c);

}  // namespace sisurr
