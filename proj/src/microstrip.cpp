#include <algorithm>
#include <cmath>

#include "sisurr/circuit.hpp"
#include "sisurr/error.hpp"

namespace sisurr {

namespace {

constexpr double kEta0 = 376.730313668;
constexpr double kPi = 3.14159265358979323846;

// Hammerstad-Jensen for an infinitely thin strip of normalized width u = w/h.
double z01_air(double u)
{
    double f = 6.0 + (2.0 * kPi - 6.0) * std::exp(-std::pow(30.666 / u, 0.7528));
    return kEta0 / (2.0 * kPi) * std::log(f / u + std::sqrt(1.0 + 4.0 / (u * u)));
}

double eps_eff_thin(double u, double eps_r)
{
    double a = 1.0 + std::log((std::pow(u, 4) + std::pow(u / 52.0, 2)) / (std::pow(u, 4) + 0.432)) / 49.0 +
               std::log(1.0 + std::pow(u / 18.1, 3)) / 18.7;
    double b = 0.564 * std::pow((eps_r - 0.9) / (eps_r + 3.0), 0.053);
    return (eps_r + 1.0) / 2.0 + (eps_r - 1.0) / 2.0 * std::pow(1.0 + 10.0 / u, -a * b);
}

}  // namespace

MicrostripResult microstrip_params(double h, double w, double t, double eps_r)
{
    if (!(h > 0) || !(w > 0) || !(t >= 0) || !(eps_r >= 1))
        fail(ErrorCode::invalid_geometry, "microstrip needs h > 0, w > 0, t >= 0, eps_r >= 1");
    const double u = w / h;
    const double tn = t / h;
    // width corrections for strip thickness, air and dielectric fill
    double du1 = 0;
    if (tn > 0) {
        double coth = 1.0 / std::tanh(std::sqrt(6.517 * u));
        du1 = tn / kPi * std::log(1.0 + 4.0 * std::exp(1.0) / (tn * coth * coth));
    }
    double dur = 0.5 * (1.0 + 1.0 / std::cosh(std::sqrt(eps_r - 1.0))) * du1;
    double u1 = u + du1;
    double ur = u + dur;

    double z_air_r = z01_air(ur);
    double e_r = eps_eff_thin(ur, eps_r);
    double z0 = z_air_r / std::sqrt(e_r);
    double eps_eff = e_r * std::pow(z01_air(u1) / z_air_r, 2);
    eps_eff = std::clamp(eps_eff, 1.0, eps_r);
    return {z0, eps_eff};
}

double microstrip_width_for_z0(double z0, double h, double t, double eps_r, double w_lo, double w_hi)
{
    double z_lo = microstrip_params(h, w_lo, t, eps_r).z0;  // narrow strip, high impedance
    double z_hi = microstrip_params(h, w_hi, t, eps_r).z0;
    if (!(z0 <= z_lo && z0 >= z_hi))
        fail(ErrorCode::invalid_geometry, "target impedance " + format_double(z0) + " ohm not reachable for w in [" +
                                              format_double(w_lo) + ", " + format_double(w_hi) + "] mm");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (w_lo + w_hi);
        if (microstrip_params(h, mid, t, eps_r).z0 > z0)
            w_lo = mid;
        else
            w_hi = mid;
        if (w_hi - w_lo < 1e-12 * w_hi) break;
    }
    return 0.5 * (w_lo + w_hi);
}

}  // namespace sisurr
