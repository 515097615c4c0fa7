#include "sisurr/presets.hpp"

#include "sisurr/circuit.hpp"
#include "sisurr/error.hpp"

namespace sisurr {

namespace {

std::vector<ParameterDef> geometry_rows()
{
    return {
        {"h", 0.1, 0.5, "mm", ParamRole::pcb},
        {"w", 0.1, 0.7, "mm", ParamRole::pcb},
        {"t", 0.01, 0.1, "mm", ParamRole::pcb},
        {"eps_r", 3.0, 5.0, "", ParamRole::pcb},
        {"l", 10.0, 100.0, "mm", ParamRole::pcb},
    };
}

std::vector<ParameterDef> buffer_rows(double c_tx_max)
{
    return {
        {"f_clock", 800.0, 2400.0, "MHz", ParamRole::buffer},
        {"rise_fall", 0.0, 40.0, "%", ParamRole::buffer},
        {"vdd", 0.8, 1.8, "V", ParamRole::buffer},
        {"jitter", 0.0, 5.0, "%", ParamRole::buffer},
        {"R_tx", 10.0, 50.0, "Ohm", ParamRole::buffer},
        {"C_tx", 0.1, c_tx_max, "pF", ParamRole::buffer},
        {"C_rx", 0.1, 2.0, "pF", ParamRole::buffer},
    };
}

std::vector<ParameterDef> complex_rows()
{
    auto rows = buffer_rows(2.0);
    const double len_max[6] = {100, 10, 100, 10, 10, 10};
    const double len_min[6] = {1, 1, 1, 0.1, 0.1, 0.1};
    for (int k = 0; k < 6; ++k)
        rows.push_back({"l_TL" + std::to_string(k + 1), len_min[k], len_max[k], "mm", ParamRole::pcb});
    for (int k = 0; k < 6; ++k) rows.push_back({"Z0_TL" + std::to_string(k + 1), 30, 90, "Ohm", ParamRole::pcb});
    for (int k = 0; k < 6; ++k) rows.push_back({"eps_TL" + std::to_string(k + 1), 3, 5, "", ParamRole::pcb});
    rows.push_back({"R_T", 1, 100, "Ohm", ParamRole::pcb});
    for (const char* side : {"tx", "rx"}) {
        std::string s(side);
        rows.push_back({"R_pkg_" + s, 10, 500, "mOhm", ParamRole::pcb});
        rows.push_back({"L_pkg_" + s, 0.5, s == "tx" ? 5.0 : 2.0, "nH", ParamRole::pcb});
        rows.push_back({"C_pkg_" + s, 0.1, 2.0, "pF", ParamRole::pcb});
    }
    for (const char* side : {"tx", "rx", "T"}) {
        std::string s(side);
        rows.push_back({"R_via_" + s, 0.1, 5.0, "mOhm", ParamRole::pcb});
        rows.push_back({"L_via_" + s, 0.1, 2.0, "nH", ParamRole::pcb});
        rows.push_back({"C_via1_" + s, 0.05, 0.8, "pF", ParamRole::pcb});
        rows.push_back({"C_via2_" + s, 0.05, 0.8, "pF", ParamRole::pcb});
    }
    return rows;
}

json driver_doc()
{
    return {{"vdd", "vdd"},       {"f_clock", "f_clock"}, {"rise", "rise_fall"}, {"fall", "rise_fall"},
            {"jitter", "jitter"}, {"r_tx", "R_tx"},       {"c_tx", "C_tx"}};
}

json param(const std::string& name, const std::string& unit)
{
    return {{"param", name}, {"unit", unit}};
}

json via_pi(const std::string& s)
{
    return json::array({
        {{"type", "shunt_c"}, {"label", "C_via1_" + s}, {"value", "C_via1_" + s}},
        {{"type", "series_r"}, {"label", "R_via_" + s}, {"value", param("R_via_" + s, "mOhm")}},
        {{"type", "series_l"}, {"label", "L_via_" + s}, {"value", "L_via_" + s}},
        {{"type", "shunt_c"}, {"label", "C_via2_" + s}, {"value", "C_via2_" + s}},
    });
}

json tl(int k)
{
    std::string n = std::to_string(k);
    return {{"type", "tl"},
            {"label", "TL" + n},
            {"z0", "Z0_TL" + n},
            {"eps_eff", "eps_TL" + n},
            {"length", "l_TL" + n}};
}

json complex_doc()
{
    json el = json::array();
    el.push_back({{"type", "series_r"}, {"label", "R_pkg_tx"}, {"value", param("R_pkg_tx", "mOhm")}});
    el.push_back({{"type", "series_l"}, {"label", "L_pkg_tx"}, {"value", "L_pkg_tx"}});
    el.push_back({{"type", "shunt_c"}, {"label", "C_pkg_tx"}, {"value", "C_pkg_tx"}});
    for (const auto& e : via_pi("tx")) el.push_back(e);
    el.push_back(tl(1));
    el.push_back(tl(2));
    el.push_back(tl(3));
    json stub = json::array();
    stub.push_back(tl(4));
    for (const auto& e : via_pi("T")) stub.push_back(e);
    stub.push_back({{"type", "shunt_r"}, {"label", "R_T"}, {"value", "R_T"}});
    el.push_back({{"type", "branch"}, {"label", "termination"}, {"elements", stub}});
    el.push_back(tl(5));
    el.push_back(tl(6));
    for (const auto& e : via_pi("rx")) el.push_back(e);
    el.push_back({{"type", "series_l"}, {"label", "L_pkg_rx"}, {"value", "L_pkg_rx"}});
    el.push_back({{"type", "series_r"}, {"label", "R_pkg_rx"}, {"value", param("R_pkg_rx", "mOhm")}});
    el.push_back({{"type", "shunt_c"}, {"label", "C_pkg_rx"}, {"value", "C_pkg_rx"}});
    return {{"name", "complex"}, {"driver", driver_doc()}, {"elements", el}, {"c_rx", "C_rx"}};
}

json simple_doc()
{
    json line = {{"type", "microstrip"}, {"label", "TL"}, {"h", "h"},    {"w", "w"},
                 {"t", "t"},             {"eps_r", "eps_r"}, {"length", "l"}};
    return {{"name", "simple"}, {"driver", driver_doc()}, {"elements", json::array({line})}, {"c_rx", "C_rx"}};
}

}  // namespace

ParameterSpace preset_space(std::string_view name)
{
    if (name == "simple") {
        // the fixed-buffer study keeps the driver at one operating point
        std::map<std::string, double> fixed{{"f_clock", 800}, {"rise_fall", 10}, {"vdd", 1.2}, {"jitter", 2},
                                            {"R_tx", 34},     {"C_tx", 1},       {"C_rx", 1}};
        return ParameterSpace(geometry_rows(), fixed);
    }
    if (name == "buffered-simple") {
        auto rows = geometry_rows();
        // C_tx reaches 5 pF so the DDR3 buffer point (4.3 pF) is inside the trained domain
        for (auto& r : buffer_rows(5.0)) rows.push_back(r);
        return ParameterSpace(rows, {});
    }
    if (name == "complex") return ParameterSpace(complex_rows(), {});
    fail(ErrorCode::invalid_argument, "unknown space preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_space_names()
{
    return {"simple", "buffered-simple", "complex"};
}

json preset_netlist(std::string_view name)
{
    if (name == "simple") return simple_doc();
    if (name == "complex") return complex_doc();
    fail(ErrorCode::invalid_argument, "unknown netlist preset '" + std::string(name) + "'");
}

std::string netlist_for_space(std::string_view space_preset)
{
    if (space_preset == "simple" || space_preset == "buffered-simple") return "simple";
    if (space_preset == "complex") return "complex";
    fail(ErrorCode::invalid_argument, "unknown space preset '" + std::string(space_preset) + "'");
}

Netlist build_preset_netlist(std::string_view preset, const DesignVector& dv, const ParameterSpace& space)
{
    return build_netlist(preset_netlist(preset), dv, space);
}

std::map<std::string, double> BufferSetting::as_parameters(double jitter_percent) const
{
    const double t_clock_ps = 1e6 / f_clock_mhz;
    return {{"f_clock", f_clock_mhz}, {"rise_fall", 100.0 * tr_ps / t_clock_ps},
            {"vdd", vdd},             {"jitter", jitter_percent},
            {"R_tx", r_tx},           {"C_tx", c_tx_pf},
            {"C_rx", c_rx_pf}};
}

const std::vector<BufferSetting>& buffer_settings()
{
    static const std::vector<BufferSetting> table{
        {"DDR3-1600", 800, 1.5, 320, 32, 4.3, 0.7},
        {"DDR4-1600", 800, 1.2, 115, 32, 0.78, 0.43},
        {"DDR5-4800", 2400, 1.1, 50, 30, 1.0, 1.0},
    };
    return table;
}

const BufferSetting& buffer_setting(std::string_view name)
{
    for (const auto& b : buffer_settings())
        if (b.name == name) return b;
    fail(ErrorCode::invalid_argument, "unknown buffer setting '" + std::string(name) + "'");
}

}  // namespace sisurr
