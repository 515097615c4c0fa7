#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/circuit.hpp"
#include "sisurr/dataset.hpp"
#include "sisurr/eye.hpp"
#include "sisurr/model.hpp"
#include "sisurr/param_space.hpp"

namespace sisurr {

// ---- dataset generation ----

struct GenerateOptions {
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string preset;           // label stored in the manifest
    StimulusSpec stimulus;        // its seed is replaced by derive_seed(seed, "stimulus")
    SimConfig sim;
    double max_failure_fraction = 0.01;

    json to_json() const;
    static GenerateOptions from_json(const json& j);
};

/// Simulated and analyzed design point.
struct DesignOutcome {
    EyeAnalysis analysis;
    double vdd = 0;
    double ui = 0;
};

DesignOutcome simulate_design(const json& netlist_doc, const ParameterSpace& space, const DesignVector& dv,
                              const GenerateOptions& opts);

/// Simulates the given points in order. Failures are recorded per row; the run
/// aborts when they exceed max_failure_fraction.
Dataset simulate_points(const ParameterSpace& space, const json& netlist_doc, const std::vector<DesignVector>& points,
                        const GenerateOptions& opts);

/// LHS over the space, then simulate_points. The manifest's sim_config holds
/// the netlist document and options so the run can be replayed.
Dataset generate_dataset(const ParameterSpace& space, const json& netlist_doc, const GenerateOptions& opts);

/// Regenerates a dataset from its own manifest fields.
Dataset replay_dataset(const Dataset& recorded);

// ---- metrics ----

struct MetricReport {
    std::string model;
    std::string block;
    std::size_t train_size = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> targets;
    Eigen::VectorXd rmse;
    Eigen::VectorXd r2;
    std::vector<std::uint8_t> r2_constant;  // target had zero variance, R2 reported as 1
    double rmse_overall = 0;
    double r2_mean = 0;
    std::optional<double> nrmse_mean;    // contour only, percent
    std::optional<double> nrmse_median;
    std::size_t nrmse_excluded = 0;      // rows with zero swing
    double train_seconds = 0;
    double predict_seconds = 0;
    bool skipped = false;
    std::string skip_reason;
    json model_report = json::object();

    json to_json() const;
    /// Same content without timings, for reproducibility comparisons.
    json numbers_json() const;
};

/// Per-sample RMSE over the 100 contour values divided by the swing
/// (max - min) of the true contour, in percent. Zero-swing rows give NaN.
Eigen::VectorXd contour_nrmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred);

MetricReport evaluate_predictions(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred,
                                  const std::vector<std::string>& names, bool contour);

// ---- learning curves ----

struct CurveOptions {
    std::vector<ModelFamily> models;
    std::vector<std::size_t> sizes;
    std::vector<TargetBlock> blocks{TargetBlock::eh};
    std::uint64_t seed = 1;
    TrainOptions train;       // seed is replaced per cell
    std::string gpr_over_cap = "skip";  // or "subsample"
    /// Saves each trained model as <dir>/<model>_<block>_<size>.json when set.
    std::string model_dir;

    json to_json() const;  // everything except workers and model_dir
    static CurveOptions from_json(const json& j);
};

struct CurveResult {
    std::vector<MetricReport> cells;
    json manifest;

    void write(const std::string& dir) const;  // curve.csv + curve.json
};

/// Every (model, block, size) cell draws its training and validation rows from
/// the pool with a seed that depends only on (seed, size); the test rows are
/// shared by all cells and must not appear in the pool.
CurveResult learning_curve(const Dataset& pool, const Dataset& test, const CurveOptions& opts);

// ---- exploration ----

struct Scenario {
    std::string name;
    std::string buffer;           // buffer setting name, e.g. DDR3-1600
    double jitter = 2;            // percent of T_clock
    EyeMask mask;
    std::map<std::string, std::array<double, 2>> ranges;  // sampled parameters
    std::map<std::string, double> fixed;
    double nominal_z0 = 50;
    std::string adjust = "w";     // geometry parameter solved for the impedance
    std::vector<double> corners;  // impedance multipliers
    std::size_t n = 10000;
    std::uint64_t seed = 1;
    std::size_t ground_truth = 0;  // simulated subsample size

    json to_json() const;
    static Scenario from_json(const json& j);
    static Scenario load(const std::string& path);
};

struct ExploreSample {
    std::vector<double> nominal;            // model-space design vector
    bool pred_pass = false;
    double pred_severity = 0;
    std::vector<std::uint8_t> corner_pass;  // per corner
    std::vector<double> corner_severity;
    bool joint_pass = false;                // nominal and every corner
    std::optional<bool> true_pass;
    std::optional<double> true_severity;
};

struct ExplorationReport {
    std::string scenario;
    std::string model;
    std::size_t n = 0;
    std::size_t predicted_pass = 0;
    std::vector<double> corners;
    std::vector<std::size_t> corner_pass_count;
    std::size_t joint_pass = 0;
    std::size_t ground_truth = 0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double fp_severity_median = 0, fp_severity_p95 = 0, fp_severity_max = 0;
    double predict_seconds = 0;
    double simulate_seconds = 0;
    std::vector<ExploreSample> samples;
    /// Scenario, model hash and ground-truth simulation setup needed to rerun.
    json manifest = json::object();

    std::vector<std::size_t> pass_set() const;
    std::vector<std::size_t> corner_pass_set(std::size_t corner) const;
    std::vector<std::size_t> joint_pass_set() const;

    json to_json() const;          // summary plus pass sets
    json numbers_json() const;     // without timings
    void write(const std::string& dir, const ParameterSpace& space) const;  // report.json + samples.csv
};

/// Confusion counts and FP severity summary recomputed from per-sample records.
void summarize_ground_truth(ExplorationReport& r);

struct ExploreOptions {
    int workers = 1;
    json netlist;              // needed for ground truth
    GenerateOptions sim;       // stimulus and solver settings for ground truth
};

/// Design vectors (nominal first, then one per corner) for every sampled point.
std::vector<std::vector<DesignVector>> scenario_designs(const Scenario& sc, const ParameterSpace& model_space);

ExplorationReport explore(const Surrogate& model, const Scenario& sc, const ExploreOptions& opts);

// ---- runtime benchmark ----

struct BenchOptions {
    std::size_t n_batch = 100000;
    std::size_t sim_samples = 20;
    int splits = 10;
    std::uint64_t seed = 1;
    json netlist;
    GenerateOptions sim;
};

struct BenchRow {
    std::string phase;
    std::string method;
    std::size_t samples = 0;
    double runtime = 0;  // seconds
    double per_sample = 0;
    double speedup = 0;  // simulation per-sample time over this row's, 0 when not applicable
};

struct BenchReport {
    std::vector<BenchRow> rows;
    double sim_per_sample = 0;
    double infer_per_sample = 0;
    double speedup = 0;
    double split_per_sample = 0;  // same batch in `splits` pieces
    double split_ratio = 0;       // split_per_sample / infer_per_sample

    json to_json() const;
    void write(const std::string& dir) const;  // bench.csv + bench.json
};

BenchReport runtime_bench(const Surrogate& model, const BenchOptions& opts);

}  // namespace sisurr
