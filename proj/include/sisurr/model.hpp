#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sisurr/dataset.hpp"
#include "sisurr/gpr.hpp"
#include "sisurr/hpo.hpp"
#include "sisurr/krr.hpp"
#include "sisurr/mlp.hpp"
#include "sisurr/param_space.hpp"
#include "sisurr/tree.hpp"

namespace sisurr {

enum class ModelFamily { gpr_iso, gpr_ani, krr_iso, krr_ani, cart, rfr, gbm, mlp, ens_mlp };

/// Display names: GPR-ISO, GPR-ANI, KRR-ISO, KRR-ANI, CART, RFR, GBM, MLP, ENS-MLP.
std::string_view to_string(ModelFamily f);
ModelFamily parse_model_family(std::string_view text);
const std::vector<ModelFamily>& all_model_families();

struct TrainOptions {
    std::uint64_t seed = 0;
    int workers = 1;
    /// Objective evaluations for hyperparameter search; 0 trains the defaults.
    int hpo_budget = 100;
    std::string hpo_method = "random";  // or "gp-ei"
    int hpo_init = 10;
    /// Fixed hyperparameters; their axes are removed from the search.
    json hyper = json::object();
    /// Search space override: a HyperSpace array, or an object of them keyed by
    /// family name. Null or a missing family uses the default.
    json hpo_space = json();
    int ensemble_size = 25;
    /// GPR specifics.
    int gpr_restarts = 5;
    int gpr_max_iters = 100;
    std::size_t gpr_hyper_subset = 1000;
    std::size_t gpr_cap = 5000;
    bool gpr_subsample_over_cap = false;
    /// Empty: shared kernel for blocks wider than two outputs.
    std::optional<bool> gpr_shared_kernel;
    /// Writes the search trace CSV when non-empty.
    std::string trace_path;
};

using ModelImpl = std::variant<GprModel, KrrModel, TreeModel, MlpModel, EnsembleModel>;

/// A trained regressor bound to its parameter space and target block.
/// Inputs are physical design vectors; outputs are in dataset target units
/// (normalized EH/EW, contour volts, physical features).
class Surrogate {
public:
    ModelFamily family = ModelFamily::mlp;
    TargetBlock block = TargetBlock::eye;
    ParameterSpace space;
    Normalizer input_norm;
    bool contour_by_vdd = false;
    Eigen::VectorXd feature_fill;  // imputation for absent features
    json config = json::object();
    json report = json::object();
    std::string train_manifest_hash;
    ModelImpl impl;

    std::vector<std::string> output_names() const;
    Eigen::MatrixXd to_unit(const Eigen::MatrixXd& X) const;
    /// Raw model output on unit-cube inputs (training target units).
    Eigen::MatrixXd predict_unit(const Eigen::MatrixXd& U) const;
    Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const;
    Eigen::MatrixXd predict(const std::vector<DesignVector>& rows) const;

    json to_json() const;
    static Surrogate from_json(const json& j);
    void save(const std::string& path) const;
    static Surrogate load(const std::string& path);
};

/// Targets in the units the regressors are trained on.
Eigen::MatrixXd training_targets(const Dataset& ds, TargetBlock block, const Eigen::VectorXd& feature_fill);

/// Default search space and default configuration of a family.
HyperSpace default_hyper_space(ModelFamily f, std::size_t input_dim);
json default_hyper(ModelFamily f, std::size_t input_dim);

/// Fits one family on train rows, tuning on the validation rows.
Surrogate train_surrogate(ModelFamily family, const Dataset& train, const Dataset& val, TargetBlock block,
                          const TrainOptions& opts);

/// Fits the regressor for a fully specified configuration.
ModelImpl fit_impl(ModelFamily family, const json& config, const Eigen::MatrixXd& U, const Eigen::MatrixXd& Y,
                   const Eigen::MatrixXd& Uval, const Eigen::MatrixXd& Yval, const TrainOptions& opts,
                   std::uint64_t seed, json* notes = nullptr);

Eigen::MatrixXd predict_impl(const ModelImpl& impl, const Eigen::MatrixXd& U);

}  // namespace sisurr
