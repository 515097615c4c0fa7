#include <algorithm>
#include <cmath>

#include "sisurr/error.hpp"
#include "sisurr/eye.hpp"

namespace sisurr {

void EyeMask::validate() const
{
    if (!(ui > 0 && t0 > 0 && t0 < t1 && t1 < ui))
        fail(ErrorCode::invalid_argument, "mask " + name + " needs 0 < t0 < t1 < ui");
    if (!(v0 < v_ref && v_ref < v1)) fail(ErrorCode::invalid_argument, "mask " + name + " needs v0 < v_ref < v1");
}

double EyeMask::top(double t) const
{
    if (t <= t0 || t >= t1) return v_ref;
    const double tm = mid_t();
    const double frac = t <= tm ? (t - t0) / (tm - t0) : (t1 - t) / (t1 - tm);
    return v_ref + (v1 - v_ref) * frac;
}

double EyeMask::bottom(double t) const
{
    if (t <= t0 || t >= t1) return v_ref;
    const double tm = mid_t();
    const double frac = t <= tm ? (t - t0) / (tm - t0) : (t1 - t) / (t1 - tm);
    return v_ref - (v_ref - v0) * frac;
}

std::vector<std::array<double, 2>> EyeMask::polygon() const
{
    return {{t0, v_ref}, {mid_t(), v1}, {t1, v_ref}, {mid_t(), v0}};
}

json EyeMask::to_json() const
{
    // picosecond values rounded to 1e-6 ps so table entries print as written
    auto ps = [](double s) { return std::round(s * 1e18) / 1e6; };
    return {{"name", name}, {"ui_ps", ps(ui)}, {"v_ref", v_ref}, {"t0_ps", ps(t0)},
            {"t1_ps", ps(t1)}, {"v0", v0}, {"v1", v1}};
}

EyeMask EyeMask::from_json(const json& j)
{
    try {
        EyeMask m;
        m.name = j.value("name", std::string("custom"));
        m.ui = j.at("ui_ps").get<double>() * 1e-12;
        m.v_ref = j.at("v_ref").get<double>();
        m.t0 = j.at("t0_ps").get<double>() * 1e-12;
        m.t1 = j.at("t1_ps").get<double>() * 1e-12;
        m.v0 = j.at("v0").get<double>();
        m.v1 = j.at("v1").get<double>();
        m.validate();
        return m;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("mask definition: ") + e.what());
    }
}

EyeMask EyeMask::load(const std::string& path)
{
    try {
        return from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::parse_error, path + ": " + e.what());
    }
}

const std::vector<EyeMask>& ddr_masks()
{
    static const std::vector<EyeMask> masks{
        {"DDR3-1600", 625e-12, 0.75, 174e-12, 469e-12, 0.55, 0.95},
        {"DDR4-1600", 625e-12, 0.60, 174e-12, 469e-12, 0.50, 0.70},
        {"DDR5-4800", 208e-12, 0.55, 58e-12, 156e-12, 0.50, 0.60},
    };
    return masks;
}

const EyeMask& ddr_mask(std::string_view name)
{
    for (const auto& m : ddr_masks())
        if (m.name == name) return m;
    fail(ErrorCode::invalid_argument, "unknown mask '" + std::string(name) + "'");
}

json ComplianceResult::to_json() const
{
    return {{"pass", pass}, {"severity", severity}, {"worst_bin", worst_bin}};
}

ComplianceResult check_mask(const EyeContour& c, const EyeMask& mask, double vdd)
{
    mask.validate();
    if (!(vdd > 0)) fail(ErrorCode::invalid_argument, "mask check needs vdd > 0");
    if (std::abs(mask.ui - c.ui) > 1e-3 * mask.ui)
        fail(ErrorCode::invalid_argument, "mask UI " + format_double(mask.ui) + " s differs from contour UI " +
                                              format_double(c.ui) + " s by more than 0.1%");
    ComplianceResult r;
    if (c.closed || contour_closed(c)) {
        r.pass = false;
        r.severity = 100.0;
        r.worst_bin = kCenterBin;
        return r;
    }
    // Bin centers are placed on the mask's time axis so a contour from a model
    // evaluated at a slightly different UI still lines up with the mask.
    const double w = mask.ui / kContourBins;
    double total = 0, encroached = 0, worst = 0;
    bool ok = true;
    for (int b = 0; b < kContourBins; ++b) {
        const double t = (b + 0.5) * w;
        if (t < mask.t0 || t > mask.t1) continue;
        const double top = mask.top(t);
        const double bot = mask.bottom(t);
        const double up = c.upper[static_cast<std::size_t>(b)];
        const double lo = c.lower[static_cast<std::size_t>(b)];
        const double height = top - bot;
        // a center exactly on a mask corner covers no area and cannot violate it
        if (height > 0 && (!(up >= top) || !(lo <= bot))) ok = false;
        double inside = 0;
        if (up > lo) inside = std::max(0.0, std::min(top, up) - std::max(bot, lo));
        const double bad = std::max(0.0, height - inside);
        total += height * w;
        encroached += bad * w;
        if (bad * w > worst) {
            worst = bad * w;
            r.worst_bin = b;
        }
    }
    r.pass = ok;
    r.severity = total > 0 ? std::clamp(100.0 * encroached / total, 0.0, 100.0) : 0.0;
    if (r.pass) {
        r.severity = 0;
        r.worst_bin = -1;
    }
    return r;
}

}  // namespace sisurr
