#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/param_space.hpp"

namespace sisurr {

inline constexpr int kContourBins = 50;
inline constexpr int kContourWidth = 2 * kContourBins;
inline constexpr int kFeatureCount = 7;

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// Names of the columns in each target block, in storage order.
const std::vector<std::string>& eye_target_names();
const std::vector<std::string>& contour_target_names();
const std::vector<std::string>& feature_target_names();

enum class TargetBlock { eye, eh, ew, contour, features };

std::string_view to_string(TargetBlock block);
TargetBlock parse_target_block(std::string_view text);

/// Simulated samples in physical units. Row i of every matrix describes the
/// same design point. Failed rows keep their X values and carry NaN targets.
struct Dataset {
    ParameterSpace space;
    Split split = Split::train;
    std::uint64_t seed = 0;
    std::string preset;
    json sim_config = json::object();

    Eigen::MatrixXd X;         // n x d, physical units
    Eigen::MatrixXd eye;       // n x 2: eh_norm, ew_norm
    Eigen::MatrixXd contour;   // n x 100: upper[0..49], lower[0..49], volts
    Eigen::MatrixXd features;  // n x 7
    Eigen::VectorXd vdd;       // per-row supply used for normalization
    Eigen::VectorXd ui;        // per-row unit interval, seconds
    std::vector<std::uint8_t> closed;
    std::vector<std::uint8_t> partial;
    std::vector<std::uint8_t> failed;
    std::vector<std::string> fail_reason;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> feature_present;  // n x 7

    std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
    void resize(std::size_t n);
    void check_consistent() const;

    /// Rows in the given order (duplicates allowed).
    Dataset subset(const std::vector<std::size_t>& rows) const;
    /// Drops failed rows.
    Dataset usable() const;

    /// Target matrix for the block, physical (contour) or normalized (eye) units.
    Eigen::MatrixXd target(TargetBlock block) const;
};

/// Writes manifest.json, X.csv and one CSV per target block into dir.
/// Returns the manifest that was written.
json save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

/// Hash over the data files recorded in a dataset manifest.
std::string dataset_hash(const std::string& dir);

struct TrainValSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Seeded shuffle of the pool, then the first n_train rows for training and the
/// next round(0.25 n_train) for validation.
TrainValSplit carve_train_val(std::size_t pool_rows, std::size_t n_train, std::uint64_t seed);

}  // namespace sisurr
