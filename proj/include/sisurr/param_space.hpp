#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sisurr/util.hpp"

namespace sisurr {

using json = nlohmann::json;

enum class ParamRole { pcb, buffer };

std::string_view to_string(ParamRole role);
ParamRole parse_role(std::string_view text);

struct ParameterDef {
    std::string name;
    double min = 0;
    double max = 1;
    std::string unit;
    ParamRole role = ParamRole::pcb;
};

/// A point in a ParameterSpace: one value per variable parameter, in the
/// space's canonical order and in the parameter's own unit.
struct DesignVector {
    std::vector<double> values;
};

/// Ordered, bounded design parameters plus frozen values. The parameter order
/// is the feature order of every matrix derived from the space.
class ParameterSpace {
public:
    ParameterSpace() = default;
    ParameterSpace(std::vector<ParameterDef> params, std::map<std::string, double> fixed);

    const std::vector<ParameterDef>& params() const { return params_; }
    const std::map<std::string, double>& fixed() const { return fixed_; }
    std::size_t dim() const { return params_.size(); }
    bool empty() const { return params_.empty(); }

    std::optional<std::size_t> index_of(std::string_view name) const;
    bool has(std::string_view name) const;
    std::vector<std::string> names() const;

    /// Value of a variable or fixed parameter; throws unbound_parameter.
    double value(const DesignVector& dv, std::string_view name) const;

    /// Throws out_of_bounds naming the first offending parameter.
    void check_within(const DesignVector& dv, double rel_tol = 1e-12) const;

    /// Builds a vector from a name->value map; every variable parameter must be present.
    DesignVector from_map(const std::map<std::string, double>& values) const;
    std::map<std::string, double> to_map(const DesignVector& dv) const;

    /// Freezes the named variable parameters at the given values.
    ParameterSpace with_fixed(const std::map<std::string, double>& values) const;

    json to_json() const;
    static ParameterSpace from_json(const json& j);
    static ParameterSpace load(const std::string& path);
    void save(const std::string& path) const;

    /// Hash of the canonical JSON form.
    std::string hash() const;

    Eigen::MatrixXd to_matrix(std::span<const DesignVector> rows) const;
    DesignVector row(const Eigen::MatrixXd& X, Eigen::Index i) const;

private:
    std::vector<ParameterDef> params_;
    std::map<std::string, double> fixed_;
};

/// Latin hypercube design: per-dimension random permutation of the n strata
/// with a uniform jitter inside each stratum.
std::vector<DesignVector> lhs_sample(const ParameterSpace& space, std::size_t n, std::uint64_t seed);

/// Same stratification over the unit cube, n x d.
Eigen::MatrixXd lhs_unit(std::size_t n, std::size_t d, Rng& rng);

enum class NormKind { minmax_inputs, eh_by_vdd, ew_by_ui, standardize };

std::string_view to_string(NormKind kind);
NormKind parse_norm_kind(std::string_view text);

struct NormContext {
    std::optional<double> vdd;
    std::optional<double> ui;
};

class Normalizer {
public:
    static Normalizer minmax(const ParameterSpace& space);
    static Normalizer minmax(const Eigen::MatrixXd& reference, std::vector<std::string> names = {});
    /// Population standard deviation; zero-variance columns are rejected.
    static Normalizer standardize(const Eigen::MatrixXd& reference, std::vector<std::string> names = {});
    static Normalizer per_sample(NormKind kind);

    NormKind kind() const { return kind_; }
    std::size_t width() const { return static_cast<std::size_t>(offset_.size()); }
    const Eigen::VectorXd& offset() const { return offset_; }
    const Eigen::VectorXd& scale() const { return scale_; }

    Eigen::MatrixXd transform(const Eigen::MatrixXd& values, std::span<const NormContext> per_row = {}) const;
    Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& values, std::span<const NormContext> per_row = {}) const;
    double transform(double value, std::size_t feature = 0, const NormContext& ctx = {}) const;
    double inverse_transform(double value, std::size_t feature = 0, const NormContext& ctx = {}) const;

    json to_json() const;
    static Normalizer from_json(const json& j);

private:
    double divisor(std::size_t feature, const NormContext& ctx) const;

    NormKind kind_ = NormKind::minmax_inputs;
    Eigen::VectorXd offset_;
    Eigen::VectorXd scale_;
    std::vector<std::string> names_;
};

Normalizer fit_normalizer(NormKind kind, const ParameterSpace& space);
Normalizer fit_normalizer(NormKind kind, const Eigen::MatrixXd& reference, std::vector<std::string> names = {});

}  // namespace sisurr
