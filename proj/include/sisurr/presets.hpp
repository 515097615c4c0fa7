#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sisurr/param_space.hpp"

namespace sisurr {

/// Built-in spaces: "simple" (microstrip geometry, fixed buffer),
/// "buffered-simple" (geometry plus the seven buffer rows) and "complex"
/// (44-parameter point-to-point link).
ParameterSpace preset_space(std::string_view name);
std::vector<std::string> preset_space_names();

/// Netlist document used by a space preset ("simple" or "complex").
json preset_netlist(std::string_view name);
std::string netlist_for_space(std::string_view space_preset);

/// IC buffer operating point for one memory speed grade.
struct BufferSetting {
    std::string name;
    double f_clock_mhz = 800;
    double vdd = 1.2;
    double tr_ps = 100;  // rise and fall time
    double r_tx = 34;
    double c_tx_pf = 1;
    double c_rx_pf = 1;

    /// Parameter values in the units of the buffer rows of the built-in spaces.
    std::map<std::string, double> as_parameters(double jitter_percent) const;
};

const std::vector<BufferSetting>& buffer_settings();
const BufferSetting& buffer_setting(std::string_view name);

}  // namespace sisurr
