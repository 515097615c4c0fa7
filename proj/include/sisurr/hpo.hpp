#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/serialize.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

enum class AxisKind { real, log_real, integer, categorical };

struct HyperAxis {
    std::string name;
    AxisKind kind = AxisKind::real;
    double lo = 0;
    double hi = 1;
    std::vector<json> choices;  // categorical only

    int encoded_width() const { return kind == AxisKind::categorical ? static_cast<int>(choices.size()) : 1; }
};

/// Named search axes. Configurations are JSON objects {axis: value}; the
/// encoding maps them to [0,1]^k with one-hot blocks for categoricals.
class HyperSpace {
public:
    HyperSpace() = default;
    explicit HyperSpace(std::vector<HyperAxis> axes);

    const std::vector<HyperAxis>& axes() const { return axes_; }
    bool empty() const { return axes_.empty(); }
    int encoded_dim() const;

    json sample(Rng& rng) const;
    json decode(const Eigen::VectorXd& u) const;
    Eigen::VectorXd encode(const json& config) const;
    bool contains(const json& config) const;

    json to_json() const;
    static HyperSpace from_json(const json& j);

private:
    std::vector<HyperAxis> axes_;
};

/// Validation score to minimize; exceptions and non-finite values are recorded
/// as +inf with the failed flag.
using HpoObjective = std::function<double(const json& config)>;

struct TraceEntry {
    int iteration = 0;
    json config;
    double score = 0;
    double wallclock = 0;
    bool failed = false;
    bool fallback = false;  // GP-EI proposal replaced by a random draw
    std::string message;
};

struct SearchTrace {
    std::string method;
    int budget = 0;
    std::vector<TraceEntry> entries;

    /// Earliest entry with the lowest score; -1 for an empty trace.
    int best_index() const;
    double best_score() const;
    const json& best_config() const;
    std::vector<double> best_so_far() const;

    void write_csv(const std::string& path) const;
    static SearchTrace read_csv(const std::string& path);
};

/// `budget` seeded uniform draws. Draws are made serially, so the config
/// sequence is fixed by the seed, and evaluated on `workers` threads. Entries
/// in `resume` whose configs match the sequence are reused instead of rerun.
SearchTrace random_search(const HpoObjective& objective, const HyperSpace& space, int budget, std::uint64_t seed,
                          int workers = 1, const SearchTrace* resume = nullptr);

/// `init` Latin hypercube points, then proposals that maximize expected
/// improvement under a GPR fitted to the standardized scores.
SearchTrace gp_ei_search(const HpoObjective& objective, const HyperSpace& space, int budget, int init,
                         std::uint64_t seed, const SearchTrace* resume = nullptr);

double expected_improvement(double mean, double sd, double best);

}  // namespace sisurr
