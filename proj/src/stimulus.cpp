#include <algorithm>
#include <cmath>

#include "sisurr/circuit.hpp"
#include "sisurr/error.hpp"

namespace sisurr {

std::string_view to_string(Pattern p)
{
    switch (p) {
    case Pattern::prbs7: return "prbs7";
    case Pattern::alternating: return "alternating";
    case Pattern::step: return "step";
    }
    return "prbs7";
}

Pattern parse_pattern(std::string_view text)
{
    for (auto p : {Pattern::prbs7, Pattern::alternating, Pattern::step})
        if (to_string(p) == text) return p;
    fail(ErrorCode::parse_error, "unknown stimulus pattern '" + std::string(text) + "'");
}

void StimulusSpec::validate() const
{
    if (!(settle_bits >= 0 && n_bits > settle_bits))
        fail(ErrorCode::invalid_argument, "stimulus needs n_bits > settle_bits >= 0");
}

std::vector<std::uint8_t> prbs7_bits(std::size_t n, std::uint64_t seed)
{
    unsigned state = static_cast<unsigned>(seed % 127) + 1;  // any of the 127 nonzero states
    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned bit = ((state >> 6) ^ (state >> 5)) & 1u;
        state = ((state << 1) | bit) & 0x7Fu;
        out[i] = static_cast<std::uint8_t>(bit);
    }
    return out;
}

std::vector<std::uint8_t> pattern_bits(Pattern p, std::size_t n, std::uint64_t seed)
{
    switch (p) {
    case Pattern::prbs7: return prbs7_bits(n, seed);
    case Pattern::alternating: {
        std::vector<std::uint8_t> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(i % 2 == 0);
        return out;
    }
    case Pattern::step: return std::vector<std::uint8_t>(n, 1);
    }
    return {};
}

Stimulus prbs_stimulus(const DriverSpec& driver, const StimulusSpec& stim, double dt)
{
    driver.validate();
    stim.validate();
    if (!(dt > 0)) fail(ErrorCode::invalid_argument, "stimulus dt must be positive");

    Stimulus out;
    out.ui = driver.ui();
    out.bits = pattern_bits(stim.pattern, static_cast<std::size_t>(stim.n_bits), stim.seed);
    const double tr = driver.rise_frac * driver.t_clock();
    const double tf = driver.fall_frac * driver.t_clock();
    const double jpp = driver.jitter_frac * driver.t_clock();
    // first ramp starts at or after t = 0 whatever the jitter draw
    out.bit_phase = 0.5 * std::max(tr, tf) + 0.5 * jpp;

    const double duration = out.ui * stim.n_bits;
    const auto n = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
    out.source.t0 = 0;
    out.source.dt = dt;
    out.source.samples.assign(n, 0.0);

    Rng rng(derive_seed(stim.seed, "jitter"));
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    std::vector<double> step_at(n + 1, 0.0);

    std::uint8_t prev = 0;
    for (std::size_t k = 0; k < out.bits.size(); ++k) {
        // one draw per bit boundary so the jitter sequence does not depend on the data
        const double jk = jpp * uni(rng);
        const std::uint8_t cur = out.bits[k];
        if (cur == prev) continue;
        const double delta = cur ? driver.vdd : -driver.vdd;
        const double ramp = cur ? tr : tf;
        const double mid = out.bit_phase + out.ui * static_cast<double>(k) + jk;
        const double start = mid - 0.5 * ramp;
        const double end = mid + 0.5 * ramp;
        auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(start / dt)));
        if (ramp > 0) {
            for (std::size_t i = first; i < n; ++i) {
                double t = dt * static_cast<double>(i);
                if (t >= end) {
                    step_at[i] += delta;
                    break;
                }
                out.source.samples[i] += delta * (t - start) / ramp;
            }
        } else if (first < n) {
            step_at[first] += delta;
        }
        prev = cur;
    }
    // integrate the completed-edge steps and add the partial ramps on top
    double level = 0;
    for (std::size_t i = 0; i < n; ++i) {
        level += step_at[i];
        out.source.samples[i] = std::clamp(out.source.samples[i] + level, 0.0, driver.vdd);
    }
    return out;
}

}  // namespace sisurr
