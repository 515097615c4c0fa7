#include "sisurr/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sisurr/error.hpp"

namespace sisurr {

std::string_view to_string(ParamRole role)
{
    return role == ParamRole::pcb ? "pcb" : "buffer";
}

ParamRole parse_role(std::string_view text)
{
    if (text == "pcb") return ParamRole::pcb;
    if (text == "buffer") return ParamRole::buffer;
    fail(ErrorCode::parse_error, "unknown parameter role '" + std::string(text) + "'");
}

ParameterSpace::ParameterSpace(std::vector<ParameterDef> params, std::map<std::string, double> fixed)
    : params_(std::move(params)), fixed_(std::move(fixed))
{
    std::set<std::string> seen;
    for (const auto& p : params_) {
        if (p.name.empty()) fail(ErrorCode::invalid_space, "parameter with empty name");
        if (!(p.min < p.max))
            fail(ErrorCode::invalid_space, "parameter " + p.name + " has min >= max");
        if (!seen.insert(p.name).second)
            fail(ErrorCode::invalid_space, "duplicate parameter " + p.name);
    }
    for (const auto& [name, v] : fixed_) {
        if (seen.count(name))
            fail(ErrorCode::invalid_space, "parameter " + name + " is both variable and fixed");
        if (!std::isfinite(v)) fail(ErrorCode::invalid_space, "fixed parameter " + name + " is not finite");
    }
}

std::optional<std::size_t> ParameterSpace::index_of(std::string_view name) const
{
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    return std::nullopt;
}

bool ParameterSpace::has(std::string_view name) const
{
    return index_of(name).has_value() || fixed_.count(std::string(name)) > 0;
}

std::vector<std::string> ParameterSpace::names() const
{
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.name);
    return out;
}

double ParameterSpace::value(const DesignVector& dv, std::string_view name) const
{
    if (auto i = index_of(name)) {
        if (*i >= dv.values.size())
            fail(ErrorCode::dimension_mismatch, "design vector shorter than space");
        return dv.values[*i];
    }
    auto it = fixed_.find(std::string(name));
    if (it != fixed_.end()) return it->second;
    fail(ErrorCode::unbound_parameter, std::string(name));
}

void ParameterSpace::check_within(const DesignVector& dv, double rel_tol) const
{
    if (dv.values.size() != params_.size())
        fail(ErrorCode::dimension_mismatch, "design vector has " + std::to_string(dv.values.size()) +
                                                " values, space has " + std::to_string(params_.size()));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& p = params_[i];
        double slack = rel_tol * (p.max - p.min);
        double v = dv.values[i];
        if (!(v >= p.min - slack && v <= p.max + slack))
            fail(ErrorCode::out_of_bounds, p.name + "=" + format_double(v) + " outside [" +
                                               format_double(p.min) + ", " + format_double(p.max) + "]");
    }
}

DesignVector ParameterSpace::from_map(const std::map<std::string, double>& values) const
{
    DesignVector dv;
    dv.values.reserve(params_.size());
    for (const auto& p : params_) {
        auto it = values.find(p.name);
        if (it == values.end()) fail(ErrorCode::unbound_parameter, p.name);
        dv.values.push_back(it->second);
    }
    return dv;
}

std::map<std::string, double> ParameterSpace::to_map(const DesignVector& dv) const
{
    std::map<std::string, double> out = fixed_;
    for (std::size_t i = 0; i < params_.size(); ++i) out[params_[i].name] = dv.values.at(i);
    return out;
}

ParameterSpace ParameterSpace::with_fixed(const std::map<std::string, double>& values) const
{
    std::vector<ParameterDef> params;
    auto fixed = fixed_;
    for (const auto& p : params_) {
        auto it = values.find(p.name);
        if (it == values.end())
            params.push_back(p);
        else
            fixed[p.name] = it->second;
    }
    for (const auto& [name, v] : values)
        if (!index_of(name) && !fixed_.count(name))
            fail(ErrorCode::unbound_parameter, name);
    return ParameterSpace(std::move(params), std::move(fixed));
}

json ParameterSpace::to_json() const
{
    json params = json::array();
    for (const auto& p : params_) {
        params.push_back({{"name", p.name},
                          {"min", p.min},
                          {"max", p.max},
                          {"unit", p.unit},
                          {"role", std::string(to_string(p.role))}});
    }
    json fixed = json::object();
    for (const auto& [name, v] : fixed_) fixed[name] = v;
    return {{"params", params}, {"fixed", fixed}};
}

ParameterSpace ParameterSpace::from_json(const json& j)
{
    try {
        std::vector<ParameterDef> params;
        for (const auto& p : j.at("params")) {
            ParameterDef def;
            def.name = p.at("name").get<std::string>();
            def.min = p.at("min").get<double>();
            def.max = p.at("max").get<double>();
            def.unit = p.value("unit", std::string());
            def.role = parse_role(p.value("role", std::string("pcb")));
            params.push_back(std::move(def));
        }
        std::map<std::string, double> fixed;
        if (j.contains("fixed"))
            for (const auto& [name, v] : j.at("fixed").items()) fixed[name] = v.get<double>();
        return ParameterSpace(std::move(params), std::move(fixed));
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("space definition: ") + e.what());
    }
}

ParameterSpace ParameterSpace::load(const std::string& path)
{
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, path + ": " + e.what());
    }
    return from_json(j);
}

void ParameterSpace::save(const std::string& path) const
{
    write_text_file(path, to_json().dump(2) + "\n");
}

std::string ParameterSpace::hash() const
{
    return fnv1a_hex(to_json().dump());
}

Eigen::MatrixXd ParameterSpace::to_matrix(std::span<const DesignVector> rows) const
{
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].values.size() != dim()) fail(ErrorCode::dimension_mismatch, "design vector width");
        for (std::size_t j = 0; j < dim(); ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].values[j];
    }
    return X;
}

DesignVector ParameterSpace::row(const Eigen::MatrixXd& X, Eigen::Index i) const
{
    if (X.cols() != static_cast<Eigen::Index>(dim())) fail(ErrorCode::dimension_mismatch, "matrix width");
    DesignVector dv;
    dv.values.resize(dim());
    for (std::size_t j = 0; j < dim(); ++j) dv.values[j] = X(i, static_cast<Eigen::Index>(j));
    return dv;
}

Eigen::MatrixXd lhs_unit(std::size_t n, std::size_t d, Rng& rng)
{
    Eigen::MatrixXd U(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            double u = (static_cast<double>(perm[i]) + jitter(rng)) / static_cast<double>(n);
            // keep the sample inside its stratum even when the jitter rounds up
            double hi = std::nextafter((static_cast<double>(perm[i]) + 1.0) / static_cast<double>(n), 0.0);
            U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::min(u, hi);
        }
    }
    return U;
}

std::vector<DesignVector> lhs_sample(const ParameterSpace& space, std::size_t n, std::uint64_t seed)
{
    if (space.empty()) fail(ErrorCode::invalid_space, "cannot sample an empty parameter space");
    if (n < 1) fail(ErrorCode::invalid_argument, "lhs_sample needs n >= 1");
    Rng rng(seed);
    Eigen::MatrixXd U = lhs_unit(n, space.dim(), rng);
    std::vector<DesignVector> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].values.resize(space.dim());
        for (std::size_t j = 0; j < space.dim(); ++j) {
            const auto& p = space.params()[j];
            double u = U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            out[i].values[j] = std::clamp(p.min + u * (p.max - p.min), p.min, p.max);
        }
    }
    return out;
}

std::string_view to_string(NormKind kind)
{
    switch (kind) {
    case NormKind::minmax_inputs: return "minmax_inputs";
    case NormKind::eh_by_vdd: return "eh_by_vdd";
    case NormKind::ew_by_ui: return "ew_by_ui";
    case NormKind::standardize: return "standardize";
    }
    return "unknown";
}

NormKind parse_norm_kind(std::string_view text)
{
    for (auto k : {NormKind::minmax_inputs, NormKind::eh_by_vdd, NormKind::ew_by_ui, NormKind::standardize})
        if (to_string(k) == text) return k;
    fail(ErrorCode::parse_error, "unknown normalizer kind '" + std::string(text) + "'");
}

Normalizer Normalizer::minmax(const ParameterSpace& space)
{
    if (space.empty()) fail(ErrorCode::invalid_space, "minmax normalizer over an empty space");
    Normalizer n;
    n.kind_ = NormKind::minmax_inputs;
    n.offset_.resize(static_cast<Eigen::Index>(space.dim()));
    n.scale_.resize(static_cast<Eigen::Index>(space.dim()));
    for (std::size_t j = 0; j < space.dim(); ++j) {
        const auto& p = space.params()[j];
        n.offset_[static_cast<Eigen::Index>(j)] = p.min;
        n.scale_[static_cast<Eigen::Index>(j)] = p.max - p.min;
        n.names_.push_back(p.name);
    }
    return n;
}

namespace {

std::string feature_name(const std::vector<std::string>& names, Eigen::Index j)
{
    if (static_cast<std::size_t>(j) < names.size()) return names[static_cast<std::size_t>(j)];
    return "#" + std::to_string(j);
}

}  // namespace

Normalizer Normalizer::minmax(const Eigen::MatrixXd& reference, std::vector<std::string> names)
{
    if (reference.rows() == 0) fail(ErrorCode::insufficient_data, "empty reference for minmax normalizer");
    Normalizer n;
    n.kind_ = NormKind::minmax_inputs;
    n.offset_ = reference.colwise().minCoeff().transpose();
    n.scale_ = reference.colwise().maxCoeff().transpose() - n.offset_;
    for (Eigen::Index j = 0; j < n.scale_.size(); ++j)
        if (!(n.scale_[j] > 0))
            fail(ErrorCode::degenerate_feature, "feature " + feature_name(names, j) + " has max == min");
    n.names_ = std::move(names);
    return n;
}

Normalizer Normalizer::standardize(const Eigen::MatrixXd& reference, std::vector<std::string> names)
{
    if (reference.rows() == 0) fail(ErrorCode::insufficient_data, "empty reference for standardization");
    Normalizer n;
    n.kind_ = NormKind::standardize;
    n.offset_ = reference.colwise().mean().transpose();
    n.scale_.resize(reference.cols());
    for (Eigen::Index j = 0; j < reference.cols(); ++j) {
        double var = (reference.col(j).array() - n.offset_[j]).square().mean();
        double sd = std::sqrt(var);
        if (!(sd > 0))
            fail(ErrorCode::degenerate_feature, "feature " + feature_name(names, j) + " has zero variance");
        n.scale_[j] = sd;
    }
    n.names_ = std::move(names);
    return n;
}

Normalizer Normalizer::per_sample(NormKind kind)
{
    if (kind != NormKind::eh_by_vdd && kind != NormKind::ew_by_ui)
        fail(ErrorCode::invalid_argument, "per-sample normalizer must be eh_by_vdd or ew_by_ui");
    Normalizer n;
    n.kind_ = kind;
    n.offset_ = Eigen::VectorXd::Zero(1);
    n.scale_ = Eigen::VectorXd::Ones(1);
    return n;
}

double Normalizer::divisor(std::size_t feature, const NormContext& ctx) const
{
    switch (kind_) {
    case NormKind::eh_by_vdd:
        if (!ctx.vdd) fail(ErrorCode::missing_context, "eh_by_vdd needs vdd");
        return *ctx.vdd;
    case NormKind::ew_by_ui:
        if (!ctx.ui) fail(ErrorCode::missing_context, "ew_by_ui needs ui");
        return *ctx.ui;
    default:
        if (feature >= width()) fail(ErrorCode::dimension_mismatch, "feature index beyond normalizer width");
        return scale_[static_cast<Eigen::Index>(feature)];
    }
}

double Normalizer::transform(double value, std::size_t feature, const NormContext& ctx) const
{
    double div = divisor(feature, ctx);
    double off = (kind_ == NormKind::eh_by_vdd || kind_ == NormKind::ew_by_ui)
                     ? 0.0
                     : offset_[static_cast<Eigen::Index>(feature)];
    return (value - off) / div;
}

double Normalizer::inverse_transform(double value, std::size_t feature, const NormContext& ctx) const
{
    double div = divisor(feature, ctx);
    double off = (kind_ == NormKind::eh_by_vdd || kind_ == NormKind::ew_by_ui)
                     ? 0.0
                     : offset_[static_cast<Eigen::Index>(feature)];
    return value * div + off;
}

Eigen::MatrixXd Normalizer::transform(const Eigen::MatrixXd& values, std::span<const NormContext> per_row) const
{
    const bool per_sample = kind_ == NormKind::eh_by_vdd || kind_ == NormKind::ew_by_ui;
    if (per_sample) {
        if (per_row.size() != static_cast<std::size_t>(values.rows()))
            fail(ErrorCode::missing_context, std::string(to_string(kind_)) + " needs one context per row");
        Eigen::MatrixXd out(values.rows(), values.cols());
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            for (Eigen::Index j = 0; j < values.cols(); ++j)
                out(i, j) = transform(values(i, j), 0, per_row[static_cast<std::size_t>(i)]);
        return out;
    }
    if (values.cols() != static_cast<Eigen::Index>(width()))
        fail(ErrorCode::dimension_mismatch, "normalizer width " + std::to_string(width()) + " vs " +
                                                std::to_string(values.cols()) + " columns");
    return (values.rowwise() - offset_.transpose()).array().rowwise() / scale_.transpose().array();
}

Eigen::MatrixXd Normalizer::inverse_transform(const Eigen::MatrixXd& values,
                                              std::span<const NormContext> per_row) const
{
    const bool per_sample = kind_ == NormKind::eh_by_vdd || kind_ == NormKind::ew_by_ui;
    if (per_sample) {
        if (per_row.size() != static_cast<std::size_t>(values.rows()))
            fail(ErrorCode::missing_context, std::string(to_string(kind_)) + " needs one context per row");
        Eigen::MatrixXd out(values.rows(), values.cols());
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            for (Eigen::Index j = 0; j < values.cols(); ++j)
                out(i, j) = inverse_transform(values(i, j), 0, per_row[static_cast<std::size_t>(i)]);
        return out;
    }
    if (values.cols() != static_cast<Eigen::Index>(width()))
        fail(ErrorCode::dimension_mismatch, "normalizer width mismatch");
    Eigen::MatrixXd out = values.array().rowwise() * scale_.transpose().array();
    return out.rowwise() + offset_.transpose();
}

json Normalizer::to_json() const
{
    return {{"kind", std::string(to_string(kind_))},
            {"offset", std::vector<double>(offset_.data(), offset_.data() + offset_.size())},
            {"scale", std::vector<double>(scale_.data(), scale_.data() + scale_.size())},
            {"names", names_}};
}

Normalizer Normalizer::from_json(const json& j)
{
    Normalizer n;
    n.kind_ = parse_norm_kind(j.at("kind").get<std::string>());
    auto off = j.at("offset").get<std::vector<double>>();
    auto sc = j.at("scale").get<std::vector<double>>();
    if (off.size() != sc.size()) fail(ErrorCode::parse_error, "normalizer offset/scale length mismatch");
    n.offset_ = Eigen::Map<Eigen::VectorXd>(off.data(), static_cast<Eigen::Index>(off.size()));
    n.scale_ = Eigen::Map<Eigen::VectorXd>(sc.data(), static_cast<Eigen::Index>(sc.size()));
    n.names_ = j.value("names", std::vector<std::string>{});
    return n;
}

Normalizer fit_normalizer(NormKind kind, const ParameterSpace& space)
{
    if (kind != NormKind::minmax_inputs)
        fail(ErrorCode::invalid_argument, "only minmax_inputs fits from a parameter space");
    return Normalizer::minmax(space);
}

Normalizer fit_normalizer(NormKind kind, const Eigen::MatrixXd& reference, std::vector<std::string> names)
{
    switch (kind) {
    case NormKind::minmax_inputs: return Normalizer::minmax(reference, std::move(names));
    case NormKind::standardize: return Normalizer::standardize(reference, std::move(names));
    default: return Normalizer::per_sample(kind);
    }
}

}  // namespace sisurr
