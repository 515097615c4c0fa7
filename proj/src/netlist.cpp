#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sisurr/circuit.hpp"
#include "sisurr/error.hpp"

namespace sisurr {

std::string_view to_string(LumpedKind kind)
{
    switch (kind) {
    case LumpedKind::series_r: return "series_r";
    case LumpedKind::series_l: return "series_l";
    case LumpedKind::shunt_c: return "shunt_c";
    case LumpedKind::shunt_r_to_ground: return "shunt_r_to_ground";
    }
    return "series_r";
}

void DriverSpec::validate() const
{
    if (!(vdd > 0)) fail(ErrorCode::invalid_argument, "driver vdd must be positive");
    if (!(f_clock_mhz > 0)) fail(ErrorCode::invalid_argument, "driver f_clock must be positive");
    if (!(rise_frac >= 0 && rise_frac <= 0.4) || !(fall_frac >= 0 && fall_frac <= 0.4))
        fail(ErrorCode::invalid_argument, "rise/fall fraction must lie in [0, 0.4] of T_clock");
    if (!(jitter_frac >= 0 && jitter_frac <= 0.05))
        fail(ErrorCode::invalid_argument, "jitter fraction must lie in [0, 0.05] of T_clock");
    if (!(r_tx > 0)) fail(ErrorCode::invalid_argument, "driver R_tx must be positive");
    if (!(c_tx >= 0)) fail(ErrorCode::invalid_argument, "driver C_tx must be non-negative");
}

namespace {

void sum_delays(const std::vector<NetElement>& elems, double& total, double& minimum, bool main_chain)
{
    for (const auto& e : elems) {
        if (const auto* tl = std::get_if<TLSegment>(&e.item)) {
            if (main_chain) total += tl->delay();
            minimum = std::min(minimum, tl->delay());
        } else if (const auto* br = std::get_if<BranchStub>(&e.item)) {
            double ignored = 0;
            sum_delays(br->elements, ignored, minimum, false);
        }
    }
}

}  // namespace

double Netlist::total_delay() const
{
    double total = 0, minimum = std::numeric_limits<double>::infinity();
    sum_delays(elements, total, minimum, true);
    return total;
}

double Netlist::min_delay() const
{
    double total = 0, minimum = std::numeric_limits<double>::infinity();
    sum_delays(elements, total, minimum, true);
    return minimum;
}

double unit_scale(std::string_view unit)
{
    static const std::map<std::string, double, std::less<>> table{
        {"", 1.0},      {"1", 1.0},    {"V", 1.0},     {"Ohm", 1.0},   {"mOhm", 1e-3}, {"kOhm", 1e3},
        {"H", 1.0},     {"nH", 1e-9},  {"pH", 1e-12},  {"F", 1.0},     {"pF", 1e-12},  {"fF", 1e-15},
        {"nF", 1e-9},   {"m", 1.0},    {"mm", 1e-3},   {"um", 1e-6},   {"Hz", 1.0},    {"MHz", 1e6},
        {"GHz", 1e9},   {"s", 1.0},    {"ps", 1e-12},  {"ns", 1e-9},   {"%", 1e-2},    {"frac", 1.0}};
    auto it = table.find(unit);
    if (it == table.end()) fail(ErrorCode::parse_error, "unknown unit '" + std::string(unit) + "'");
    return it->second;
}

namespace {

class Evaluator {
public:
    explicit Evaluator(const std::map<std::string, double>& values) : values_(values) {}

    /// Value in SI units.
    double value(const json& spec, std::string_view default_unit, const std::string& where) const
    {
        std::string unit(default_unit);
        double raw = 0;
        if (spec.is_number()) {
            raw = spec.get<double>();
        } else if (spec.is_string()) {
            raw = lookup(spec.get<std::string>());
        } else if (spec.is_object()) {
            if (spec.contains("unit")) unit = spec.at("unit").get<std::string>();
            if (spec.contains("param"))
                raw = lookup(spec.at("param").get<std::string>());
            else if (spec.contains("value"))
                raw = spec.at("value").get<double>();
            else
                fail(ErrorCode::parse_error, where + ": value object needs 'param' or 'value'");
        } else {
            fail(ErrorCode::parse_error, where + ": value must be a number, a parameter name or an object");
        }
        double v = raw * unit_scale(unit);
        if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, where + ": non-finite value");
        return v;
    }

private:
    double lookup(const std::string& name) const
    {
        auto it = values_.find(name);
        if (it == values_.end()) fail(ErrorCode::unbound_parameter, name);
        return it->second;
    }

    const std::map<std::string, double>& values_;
};

NetElement parse_element(const json& rec, const Evaluator& ev, int depth);

std::vector<NetElement> parse_elements(const json& arr, const Evaluator& ev, int depth)
{
    if (!arr.is_array()) fail(ErrorCode::parse_error, "netlist elements must be an array");
    std::vector<NetElement> out;
    out.reserve(arr.size());
    for (const auto& rec : arr) out.push_back(parse_element(rec, ev, depth));
    return out;
}

double positive(double v, const std::string& where)
{
    if (!(v > 0)) fail(ErrorCode::invalid_argument, where + " must be positive, got " + format_double(v));
    return v;
}

NetElement parse_element(const json& rec, const Evaluator& ev, int depth)
{
    if (!rec.is_object() || !rec.contains("type")) fail(ErrorCode::parse_error, "netlist element needs a type");
    const std::string type = rec.at("type").get<std::string>();
    NetElement el;
    el.label = rec.value("label", type);
    const std::string where = "element " + el.label;

    auto lumped = [&](LumpedKind kind, std::string_view unit) {
        double v = positive(ev.value(rec.at("value"), unit, where), where);
        el.item = LumpedElement{kind, v};
    };

    if (type == "series_r") {
        lumped(LumpedKind::series_r, "Ohm");
    } else if (type == "series_l") {
        lumped(LumpedKind::series_l, "nH");
    } else if (type == "shunt_c") {
        lumped(LumpedKind::shunt_c, "pF");
    } else if (type == "shunt_r" || type == "shunt_r_to_ground") {
        lumped(LumpedKind::shunt_r_to_ground, "Ohm");
    } else if (type == "tl") {
        TLSegment tl;
        tl.z0 = positive(ev.value(rec.at("z0"), "Ohm", where), where + " z0");
        tl.eps_eff = ev.value(rec.at("eps_eff"), "", where);
        if (!(tl.eps_eff >= 1)) fail(ErrorCode::invalid_argument, where + " eps_eff must be >= 1");
        tl.length_mm = positive(ev.value(rec.at("length"), "mm", where), where + " length") / 1e-3;
        el.item = tl;
    } else if (type == "microstrip") {
        double h = ev.value(rec.at("h"), "mm", where) / 1e-3;
        double w = ev.value(rec.at("w"), "mm", where) / 1e-3;
        double t = ev.value(rec.at("t"), "mm", where) / 1e-3;
        double er = ev.value(rec.at("eps_r"), "", where);
        auto ms = microstrip_params(h, w, t, er);
        TLSegment tl;
        tl.z0 = ms.z0;
        tl.eps_eff = ms.eps_eff;
        tl.length_mm = positive(ev.value(rec.at("length"), "mm", where), where + " length") / 1e-3;
        el.item = tl;
    } else if (type == "branch") {
        if (depth > 4) fail(ErrorCode::parse_error, "branch nesting too deep");
        BranchStub br;
        br.elements = parse_elements(rec.at("elements"), ev, depth + 1);
        el.item = std::move(br);
    } else {
        fail(ErrorCode::parse_error, "unknown element type '" + type + "'");
    }
    return el;
}

void collect_params(const json& j, std::set<std::string>& out, bool value_position)
{
    if (j.is_string() && value_position) {
        out.insert(j.get<std::string>());
    } else if (j.is_object()) {
        if (j.contains("param") && j.at("param").is_string()) {
            out.insert(j.at("param").get<std::string>());
            return;
        }
        for (const auto& [k, v] : j.items()) {
            if (k == "type" || k == "label" || k == "unit" || k == "name") continue;
            collect_params(v, out, k != "elements" && k != "driver");
        }
    } else if (j.is_array()) {
        for (const auto& v : j) collect_params(v, out, false);
    }
}

}  // namespace

Netlist build_netlist(const json& dsl, const std::map<std::string, double>& values)
{
    try {
        Evaluator ev(values);
        Netlist net;
        net.name = dsl.value("name", std::string("custom"));
        const auto& d = dsl.at("driver");
        net.driver.vdd = ev.value(d.at("vdd"), "V", "driver vdd");
        net.driver.f_clock_mhz = ev.value(d.at("f_clock"), "MHz", "driver f_clock") / 1e6;
        net.driver.rise_frac = ev.value(d.at("rise"), "%", "driver rise");
        net.driver.fall_frac = ev.value(d.contains("fall") ? d.at("fall") : d.at("rise"), "%", "driver fall");
        net.driver.jitter_frac = d.contains("jitter") ? ev.value(d.at("jitter"), "%", "driver jitter") : 0.0;
        net.driver.r_tx = ev.value(d.at("r_tx"), "Ohm", "driver r_tx");
        net.driver.c_tx = d.contains("c_tx") ? ev.value(d.at("c_tx"), "pF", "driver c_tx") : 0.0;
        net.driver.validate();
        net.elements = parse_elements(dsl.at("elements"), ev, 0);
        net.c_rx = dsl.contains("c_rx") ? ev.value(dsl.at("c_rx"), "pF", "c_rx") : 0.0;
        if (!(net.c_rx >= 0)) fail(ErrorCode::invalid_argument, "c_rx must be non-negative");
        return net;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("netlist document: ") + e.what());
    }
}

Netlist build_netlist(const json& dsl, const DesignVector& dv, const ParameterSpace& space)
{
    if (dv.values.size() != space.dim())
        fail(ErrorCode::dimension_mismatch, "design vector does not match space dimension");
    return build_netlist(dsl, space.to_map(dv));
}

std::vector<std::string> netlist_parameters(const json& dsl)
{
    std::set<std::string> names;
    collect_params(dsl, names, false);
    return {names.begin(), names.end()};
}

void dump_waveforms(const std::string& path, const SimResult& res)
{
    const auto n = static_cast<Eigen::Index>(std::min(res.tx.samples.size(), res.rx.samples.size()));
    Eigen::MatrixXd m(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        m(i, 0) = res.rx.time(u);
        m(i, 1) = res.tx.samples[u];
        m(i, 2) = res.rx.samples[u];
    }
    write_csv(path, {"t", "v_tx", "v_rx"}, m);
}

}  // namespace sisurr
