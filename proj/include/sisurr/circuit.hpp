#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sisurr/param_space.hpp"

namespace sisurr {

inline constexpr double kSpeedOfLight = 299792458.0;

struct MicrostripResult {
    double z0 = 0;       // ohm
    double eps_eff = 1;  // dimensionless
};

/// Hammerstad-Jensen closed form with the finite-thickness width correction.
/// Dimensions in mm.
MicrostripResult microstrip_params(double h, double w, double t, double eps_r);

/// Width (mm) giving the requested impedance for the other geometry fixed;
/// bisection over a bracket that must contain the answer.
double microstrip_width_for_z0(double z0, double h, double t, double eps_r, double w_lo = 1e-3, double w_hi = 50.0);

struct TLSegment {
    double z0 = 50;          // ohm
    double eps_eff = 1;      // dimensionless
    double length_mm = 10;   // mm

    double delay() const { return length_mm * 1e-3 * std::sqrt(eps_eff) / kSpeedOfLight; }
};

enum class LumpedKind { series_r, series_l, shunt_c, shunt_r_to_ground };

std::string_view to_string(LumpedKind kind);

struct LumpedElement {
    LumpedKind kind = LumpedKind::series_r;
    double value = 0;  // ohm, henry or farad
};

struct NetElement;

/// Element chain hanging off the node where it appears; series elements inside
/// the stub advance along the stub and the last element must reach ground.
struct BranchStub {
    std::vector<NetElement> elements;
};

struct NetElement {
    std::variant<LumpedElement, TLSegment, BranchStub> item;
    std::string label;
};

struct DriverSpec {
    double vdd = 1.2;           // V
    double f_clock_mhz = 800;   // MHz
    double rise_frac = 0.1;     // fraction of T_clock, full 0 to vdd ramp
    double fall_frac = 0.1;
    double jitter_frac = 0.0;   // peak-to-peak, fraction of T_clock
    double r_tx = 34;           // ohm
    double c_tx = 0;            // farad

    double t_clock() const { return 1e-6 / f_clock_mhz; }
    /// Double data rate: two bits per clock period.
    double ui() const { return 0.5 * t_clock(); }
    void validate() const;
};

/// Ladder from the TX pad (after the driver's R_tx and C_tx) to the RX pad
/// where C_rx loads the observation node.
struct Netlist {
    DriverSpec driver;
    std::vector<NetElement> elements;
    double c_rx = 0;  // farad
    std::string name;

    double total_delay() const;  // sum of TL delays along the main chain
    double min_delay() const;    // smallest TL delay anywhere, inf if none
};

enum class Pattern { prbs7, alternating, step };

std::string_view to_string(Pattern p);
Pattern parse_pattern(std::string_view text);

struct StimulusSpec {
    Pattern pattern = Pattern::prbs7;
    int n_bits = 256;
    int settle_bits = 16;
    std::uint64_t seed = 1;

    void validate() const;
};

struct Waveform {
    double t0 = 0;
    double dt = 1e-12;
    std::vector<double> samples;

    double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
    double duration() const { return dt * static_cast<double>(samples.size()); }
};

/// Source voltage before R_tx together with the information needed to fold it.
struct Stimulus {
    Waveform source;
    std::vector<std::uint8_t> bits;
    /// Nominal time of the boundary that starts bit 0; bit k starts at
    /// bit_phase + k*ui before jitter.
    double bit_phase = 0;
    double ui = 0;
};

/// Maximal-length sequence of x^7 + x^6 + 1 starting from a nonzero state
/// derived from the seed.
std::vector<std::uint8_t> prbs7_bits(std::size_t n, std::uint64_t seed);

std::vector<std::uint8_t> pattern_bits(Pattern p, std::size_t n, std::uint64_t seed);

/// Trapezoidal 0->vdd source sampled at dt over n_bits unit intervals. Each bit
/// boundary gets an independent uniform jitter in [-J/2, J/2], J = jitter_frac*T_clock.
Stimulus prbs_stimulus(const DriverSpec& driver, const StimulusSpec& stim, double dt);

struct SimConfig {
    double dt = 0;           // seconds; 0 selects ui/(50*oversample) refined for the line delays
    int oversample = 8;
    int duration_bits = 0;   // 0 uses stim.n_bits
    bool keep_all_nodes = false;
};

struct SimResult {
    Waveform tx;
    Waveform rx;
    Stimulus stimulus;
    std::vector<Waveform> nodes;  // only with keep_all_nodes
    std::size_t node_count = 0;
};

/// Largest step of the form ui/(50*oversample*k), k = 1, 2, ..., not above min_delay/4.
double choose_timestep(const Netlist& net, int oversample);

/// Fixed-step transient: trapezoidal companions for L and C, Bergeron lines
/// with linearly interpolated history, conductance matrix factorized once.
SimResult simulate_transient(const Netlist& net, const StimulusSpec& stim, const SimConfig& cfg = {});

/// Same solver fed by an arbitrary sampled source (used by tests and by step responses).
SimResult simulate_with_source(const Netlist& net, const Waveform& source, bool keep_all_nodes = false);

// Netlist description language. A document looks like
//   {"driver": {"vdd": "vdd", "f_clock": "f_clock", "rise": "rise_fall", ...},
//    "elements": [{"type": "series_r", "value": {"param": "R_pkg_tx", "unit": "mOhm"}},
//                 {"type": "tl", "z0": "Z0_TL1", "eps_eff": "eps_TL1", "length": "l_TL1"},
//                 {"type": "branch", "elements": [...]}],
//    "c_rx": "C_rx"}
// A value is a number, a parameter name, or {"param"|"value", "unit"}.

/// Converts a value in the named unit to SI.
double unit_scale(std::string_view unit);

Netlist build_netlist(const json& dsl, const std::map<std::string, double>& values);
Netlist build_netlist(const json& dsl, const DesignVector& dv, const ParameterSpace& space);
Netlist build_preset_netlist(std::string_view preset, const DesignVector& dv, const ParameterSpace& space);

/// Parameter names a netlist document reads.
std::vector<std::string> netlist_parameters(const json& dsl);

/// Writes t, v_tx, v_rx rows.
void dump_waveforms(const std::string& path, const SimResult& res);

}  // namespace sisurr
