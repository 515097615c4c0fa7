#include "sisurr/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "sisurr/error.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

namespace {

struct FamilyName {
    ModelFamily f;
    const char* name;
};

constexpr FamilyName kFamilies[] = {
    {ModelFamily::gpr_iso, "GPR-ISO"}, {ModelFamily::gpr_ani, "GPR-ANI"}, {ModelFamily::krr_iso, "KRR-ISO"},
    {ModelFamily::krr_ani, "KRR-ANI"}, {ModelFamily::cart, "CART"},       {ModelFamily::rfr, "RFR"},
    {ModelFamily::gbm, "GBM"},         {ModelFamily::mlp, "MLP"},         {ModelFamily::ens_mlp, "ENS-MLP"},
};

bool is_gpr(ModelFamily f) { return f == ModelFamily::gpr_iso || f == ModelFamily::gpr_ani; }
bool is_krr(ModelFamily f) { return f == ModelFamily::krr_iso || f == ModelFamily::krr_ani; }
bool is_tree(ModelFamily f) { return f == ModelFamily::cart || f == ModelFamily::rfr || f == ModelFamily::gbm; }

double rmse_of(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

int get_int(const json& c, const char* key, int fallback)
{
    if (!c.contains(key)) return fallback;
    return static_cast<int>(std::llround(c.at(key).get<double>()));
}

double get_double(const json& c, const char* key, double fallback)
{
    return c.contains(key) ? c.at(key).get<double>() : fallback;
}

MlpOptions mlp_options(const json& c, std::uint64_t seed)
{
    MlpOptions o;
    if (c.contains("hidden")) {
        o.hidden = c.at("hidden").get<std::vector<int>>();
    } else {
        o.hidden.assign(static_cast<std::size_t>(get_int(c, "depth", 2)), get_int(c, "width", 128));
    }
    o.lr = get_double(c, "lr", o.lr);
    o.batch = get_int(c, "batch", o.batch);
    o.epochs = get_int(c, "epochs", o.epochs);
    o.patience = get_int(c, "patience", o.patience);
    o.seed = seed;
    return o;
}

KernelSpec krr_kernel(const json& c, ModelFamily f, std::size_t d)
{
    KernelSpec k;
    k.signal_var = 1.0;
    if (f == ModelFamily::krr_iso) {
        k.form = KernelForm::iso;
        k.lengthscales = {get_double(c, "lengthscale", 0.5 * std::sqrt(static_cast<double>(d)))};
        return k;
    }
    k.form = KernelForm::aniso;
    if (c.contains("lengthscales")) {
        k.lengthscales = c.at("lengthscales").get<std::vector<double>>();
        return k;
    }
    const double base = get_double(c, "lengthscale", 0.5 * std::sqrt(static_cast<double>(d)));
    k.lengthscales.clear();
    for (std::size_t i = 0; i < d; ++i) k.lengthscales.push_back(get_double(c, ("ls_" + std::to_string(i)).c_str(), base));
    return k;
}

}  // namespace

std::string_view to_string(ModelFamily f)
{
    for (const auto& e : kFamilies)
        if (e.f == f) return e.name;
    return "MLP";
}

ModelFamily parse_model_family(std::string_view text)
{
    std::string norm;
    for (char c : text) norm += c == '_' ? '-' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (norm == "GPR-ANISO") norm = "GPR-ANI";
    if (norm == "KRR-ANISO") norm = "KRR-ANI";
    if (norm == "ENS" || norm == "ENSEMBLE") norm = "ENS-MLP";
    for (const auto& e : kFamilies)
        if (norm == e.name) return e.f;
    fail(ErrorCode::invalid_argument, "unknown model family '" + std::string(text) + "'");
}

const std::vector<ModelFamily>& all_model_families()
{
    static const std::vector<ModelFamily> v{ModelFamily::gpr_iso, ModelFamily::gpr_ani, ModelFamily::krr_iso,
                                            ModelFamily::krr_ani, ModelFamily::cart,    ModelFamily::rfr,
                                            ModelFamily::gbm,     ModelFamily::mlp,     ModelFamily::ens_mlp};
    return v;
}

json default_hyper(ModelFamily f, std::size_t d)
{
    switch (f) {
    case ModelFamily::gpr_iso:
    case ModelFamily::gpr_ani: return json::object();
    case ModelFamily::krr_iso: return {{"lengthscale", 0.5 * std::sqrt(static_cast<double>(d))}, {"lambda", 1e-3}};
    case ModelFamily::krr_ani: {
        json c = {{"lambda", 1e-3}};
        for (std::size_t i = 0; i < d; ++i) c["ls_" + std::to_string(i)] = 0.5 * std::sqrt(static_cast<double>(d));
        return c;
    }
    case ModelFamily::cart: return {{"max_depth", 12}, {"min_leaf", 2}};
    case ModelFamily::rfr: return {{"n_trees", 100}, {"max_depth", 20}, {"min_leaf", 1}, {"max_features_frac", 0.5}};
    case ModelFamily::gbm: return {{"n_trees", 200}, {"max_depth", 4}, {"min_leaf", 2}, {"shrinkage", 0.1}};
    case ModelFamily::mlp:
    case ModelFamily::ens_mlp:
        return {{"width", 128}, {"depth", 2}, {"lr", 1e-3}, {"batch", 64}, {"epochs", 500}, {"patience", 20}};
    }
    return json::object();
}

HyperSpace default_hyper_space(ModelFamily f, std::size_t d)
{
    switch (f) {
    case ModelFamily::gpr_iso:
    case ModelFamily::gpr_ani: return {};
    case ModelFamily::krr_iso:
        return HyperSpace({{"lengthscale", AxisKind::log_real, 0.05, 5.0, {}}, {"lambda", AxisKind::log_real, 1e-8, 1.0, {}}});
    case ModelFamily::krr_ani: {
        std::vector<HyperAxis> axes;
        for (std::size_t i = 0; i < d; ++i) axes.push_back({"ls_" + std::to_string(i), AxisKind::log_real, 0.05, 10.0, {}});
        axes.push_back({"lambda", AxisKind::log_real, 1e-8, 1.0, {}});
        return HyperSpace(std::move(axes));
    }
    case ModelFamily::cart:
        return HyperSpace({{"max_depth", AxisKind::integer, 2, 30, {}}, {"min_leaf", AxisKind::integer, 1, 20, {}}});
    case ModelFamily::rfr:
        return HyperSpace({{"n_trees", AxisKind::integer, 20, 200, {}},
                           {"max_depth", AxisKind::integer, 4, 40, {}},
                           {"min_leaf", AxisKind::integer, 1, 10, {}},
                           {"max_features_frac", AxisKind::real, 0.1, 1.0, {}}});
    case ModelFamily::gbm:
        return HyperSpace({{"n_trees", AxisKind::integer, 20, 400, {}},
                           {"max_depth", AxisKind::integer, 1, 8, {}},
                           {"min_leaf", AxisKind::integer, 1, 20, {}},
                           {"shrinkage", AxisKind::log_real, 0.01, 0.5, {}}});
    case ModelFamily::mlp:
    case ModelFamily::ens_mlp:
        return HyperSpace({{"width", AxisKind::integer, 16, 256, {}},
                           {"depth", AxisKind::integer, 1, 4, {}},
                           {"lr", AxisKind::log_real, 1e-4, 1e-2, {}},
                           {"batch", AxisKind::categorical, 0, 0, {32, 64, 128}}});
    }
    return {};
}

Eigen::MatrixXd training_targets(const Dataset& ds, TargetBlock block, const Eigen::VectorXd& feature_fill)
{
    Eigen::MatrixXd Y = ds.target(block);
    if (block == TargetBlock::contour) {
        for (Eigen::Index i = 0; i < Y.rows(); ++i) Y.row(i) /= ds.vdd[i];
    } else if (block == TargetBlock::features) {
        for (Eigen::Index i = 0; i < Y.rows(); ++i)
            for (Eigen::Index c = 0; c < Y.cols(); ++c)
                if (!std::isfinite(Y(i, c)) || !ds.feature_present(i, c)) Y(i, c) = feature_fill[c];
    }
    return Y;
}

ModelImpl fit_impl(ModelFamily family, const json& c, const Eigen::MatrixXd& U, const Eigen::MatrixXd& Y,
                   const Eigen::MatrixXd& Uval, const Eigen::MatrixXd& Yval, const TrainOptions& opts,
                   std::uint64_t seed, json* notes)
{
    const auto d = static_cast<std::size_t>(U.cols());
    if (is_gpr(family)) {
        GprOptions o;
        o.form = family == ModelFamily::gpr_iso ? KernelForm::iso : KernelForm::aniso;
        o.restarts = opts.gpr_restarts;
        o.max_iters = opts.gpr_max_iters;
        o.hyper_subset = opts.gpr_hyper_subset;
        o.max_train = opts.gpr_cap;
        o.subsample_over_cap = opts.gpr_subsample_over_cap;
        o.shared_kernel = opts.gpr_shared_kernel.value_or(Y.cols() > 2);
        o.seed = seed;
        o.workers = opts.workers;
        auto m = gpr_fit(U, Y, o);
        if (notes) {
            (*notes)["multi_output"] = o.shared_kernel ? "one kernel shared by all outputs" : "independent GP per output";
            (*notes)["gpr_rows_used"] = m.X.rows();
            (*notes)["gpr_subsampled"] = m.subsampled;
        }
        return m;
    }
    if (is_krr(family)) {
        KrrOptions o;
        o.kernel = krr_kernel(c, family, d);
        o.lambda = get_double(c, "lambda", 1e-3);
        o.b_mode = parse_output_kernel(c.value("b_mode", std::string("identity")));
        if (notes) (*notes)["output_kernel"] = to_string(o.b_mode);
        return krr_fit(U, Y, o);
    }
    if (is_tree(family)) {
        TreeOptions o;
        o.family = family == ModelFamily::cart ? TreeFamily::cart
                   : family == ModelFamily::rfr ? TreeFamily::rfr
                                                : TreeFamily::gbm;
        o.max_depth = get_int(c, "max_depth", -1);
        o.min_leaf = get_int(c, "min_leaf", 1);
        o.n_trees = get_int(c, "n_trees", 100);
        if (c.contains("max_features_frac"))
            o.max_features = std::clamp(static_cast<int>(std::lround(c.at("max_features_frac").get<double>() * static_cast<double>(d))), 1,
                                        static_cast<int>(d));
        o.bootstrap = c.value("bootstrap", true);
        o.shrinkage = get_double(c, "shrinkage", 0.1);
        o.seed = seed;
        o.workers = opts.workers;
        if (notes) (*notes)["multi_output"] = "multi-output leaves";
        return tree_fit(U, Y, o);
    }
    const MlpOptions mo = mlp_options(c, seed);
    if (family == ModelFamily::mlp) {
        if (notes) (*notes)["multi_output"] = "multi-head output layer";
        return mlp_fit(U, Y, Uval, Yval, mo);
    }
    const int k = get_int(c, "ensemble_size", opts.ensemble_size);
    if (notes) {
        (*notes)["multi_output"] = "multi-head output layer";
        (*notes)["ensemble_size"] = k;
    }
    return ensemble_fit(U, Y, Uval, Yval, mo, k, opts.workers);
}

Eigen::MatrixXd predict_impl(const ModelImpl& impl, const Eigen::MatrixXd& U)
{
    return std::visit([&](const auto& m) { return m.predict(U); }, impl);
}

Surrogate train_surrogate(ModelFamily family, const Dataset& train_in, const Dataset& val_in, TargetBlock block,
                          const TrainOptions& opts)
{
    const double t_start = wall_seconds();
    const Dataset train = train_in.usable();
    const Dataset val = val_in.usable();
    if (train.rows() < 2) fail(ErrorCode::insufficient_data, "training needs at least 2 usable rows");
    if (val.rows() > 0 && val.space.hash() != train.space.hash())
        fail(ErrorCode::invalid_argument, "validation rows come from a different parameter space");

    Surrogate s;
    s.family = family;
    s.block = block;
    s.space = train.space;
    s.input_norm = Normalizer::minmax(s.space);
    s.contour_by_vdd = block == TargetBlock::contour;
    if (block == TargetBlock::features) {
        s.feature_fill = Eigen::VectorXd::Zero(kFeatureCount);
        for (int c = 0; c < kFeatureCount; ++c) {
            double sum = 0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < train.rows(); ++i)
                if (train.feature_present(static_cast<Eigen::Index>(i), c) && std::isfinite(train.features(static_cast<Eigen::Index>(i), c))) {
                    sum += train.features(static_cast<Eigen::Index>(i), c);
                    ++n;
                }
            s.feature_fill[c] = n ? sum / static_cast<double>(n) : 0.0;
        }
    }

    const Eigen::MatrixXd U = s.input_norm.transform(train.X);
    const Eigen::MatrixXd Y = training_targets(train, block, s.feature_fill);
    const Eigen::MatrixXd Uval = val.rows() ? s.input_norm.transform(val.X) : Eigen::MatrixXd(0, U.cols());
    const Eigen::MatrixXd Yval = val.rows() ? training_targets(val, block, s.feature_fill) : Eigen::MatrixXd(0, Y.cols());
    const auto d = static_cast<std::size_t>(U.cols());

    json cfg = default_hyper(family, d);
    cfg.merge_patch(opts.hyper);
    json notes = json::object();
    json hpo = {{"method", "none"}, {"budget", 0}};

    // an object maps family names to spaces; families it omits keep the default
    // and an empty list turns the search off
    const json* space = &opts.hpo_space;
    if (space->is_object()) {
        auto it = space->find(std::string(to_string(family)));
        space = it == space->end() ? nullptr : &*it;
    }
    HyperSpace hs;
    if (space == nullptr || space->is_null()) hs = default_hyper_space(family, d);
    else if (!space->empty()) hs = HyperSpace::from_json(*space);
    if (!hs.empty() && opts.hpo_budget > 0 && val.rows() > 0) {
        std::vector<HyperAxis> free_axes;
        for (const auto& a : hs.axes())
            if (!opts.hyper.contains(a.name)) free_axes.push_back(a);
        if (!free_axes.empty()) {
            HyperSpace search(free_axes);
            // ensembles are tuned through a single member
            const ModelFamily probe = family == ModelFamily::ens_mlp ? ModelFamily::mlp : family;
            TrainOptions inner = opts;
            inner.workers = 1;
            HpoObjective objective = [&](const json& partial) {
                json c = cfg;
                c.merge_patch(partial);
                auto impl = fit_impl(probe, c, U, Y, Uval, Yval, inner, derive_seed(opts.seed, "hpo-fit"));
                return rmse_of(predict_impl(impl, Uval), Yval);
            };
            const auto hpo_seed = derive_seed(opts.seed, "hpo");
            SearchTrace trace = opts.hpo_method == "gp-ei"
                                    ? gp_ei_search(objective, search, opts.hpo_budget, opts.hpo_init, hpo_seed)
                                    : random_search(objective, search, opts.hpo_budget, hpo_seed, opts.workers);
            if (!opts.trace_path.empty()) trace.write_csv(opts.trace_path);
            if (std::isfinite(trace.best_score())) cfg.merge_patch(trace.best_config());
            hpo = {{"method", trace.method},
                   {"budget", opts.hpo_budget},
                   {"best_val_rmse", trace.best_score()},
                   {"failed", std::count_if(trace.entries.begin(), trace.entries.end(), [](const TraceEntry& e) { return e.failed; })}};
            if (family == ModelFamily::ens_mlp) notes["hpo_probe"] = "single MLP member";
        }
    } else if (is_gpr(family)) {
        hpo = {{"method", "marginal likelihood"}, {"restarts", opts.gpr_restarts}};
    }

    s.config = cfg;
    s.impl = fit_impl(family, cfg, U, Y, Uval, Yval, opts, derive_seed(opts.seed, "fit"), &notes);
    s.train_manifest_hash = train.space.hash();
    s.report = {{"family", to_string(family)},
                {"block", to_string(block)},
                {"n_train", train.rows()},
                {"n_val", val.rows()},
                {"hpo", hpo},
                {"notes", notes},
                {"train_seconds", wall_seconds() - t_start}};
    if (val.rows() > 0) s.report["val_rmse"] = rmse_of(predict_impl(s.impl, Uval), Yval);
    return s;
}

std::vector<std::string> Surrogate::output_names() const
{
    switch (block) {
    case TargetBlock::eye: return eye_target_names();
    case TargetBlock::eh: return {eye_target_names()[0]};
    case TargetBlock::ew: return {eye_target_names()[1]};
    case TargetBlock::contour: return contour_target_names();
    case TargetBlock::features: return feature_target_names();
    }
    return {};
}

Eigen::MatrixXd Surrogate::to_unit(const Eigen::MatrixXd& X) const
{
    if (X.cols() != static_cast<Eigen::Index>(space.dim()))
        fail(ErrorCode::dimension_mismatch, "model expects " + std::to_string(space.dim()) + " parameters, got " +
                                                std::to_string(X.cols()));
    return input_norm.transform(X);
}

Eigen::MatrixXd Surrogate::predict_unit(const Eigen::MatrixXd& U) const
{
    return predict_impl(impl, U);
}

Eigen::MatrixXd Surrogate::predict(const Eigen::MatrixXd& X) const
{
    Eigen::MatrixXd P = predict_unit(to_unit(X));
    if (contour_by_vdd) {
        const auto idx = space.index_of("vdd");
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            const double vdd = idx ? X(i, static_cast<Eigen::Index>(*idx)) : space.fixed().at("vdd");
            P.row(i) *= vdd;
        }
    }
    return P;
}

Eigen::MatrixXd Surrogate::predict(const std::vector<DesignVector>& rows) const
{
    return predict(space.to_matrix(rows));
}

json Surrogate::to_json() const
{
    json impl_json;
    std::string kind;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GprModel>) kind = "gpr";
            else if constexpr (std::is_same_v<T, KrrModel>) kind = "krr";
            else if constexpr (std::is_same_v<T, TreeModel>) kind = "tree";
            else if constexpr (std::is_same_v<T, MlpModel>) kind = "mlp";
            else kind = "ensemble";
            impl_json = m.to_json();
        },
        impl);
    return {{"format", "sisurr-model-1"},
            {"family", to_string(family)},
            {"block", to_string(block)},
            {"space", space.to_json()},
            {"space_hash", space.hash()},
            {"input_norm", input_norm.to_json()},
            {"contour_by_vdd", contour_by_vdd},
            {"feature_fill", vector_to_json(feature_fill)},
            {"config", config},
            {"report", report},
            {"train_manifest_hash", train_manifest_hash},
            {"impl", {{"kind", kind}, {"data", impl_json}}}};
}

Surrogate Surrogate::from_json(const json& j)
{
    try {
        if (j.at("format").get<std::string>() != "sisurr-model-1")
            fail(ErrorCode::parse_error, "unsupported model format " + j.at("format").dump());
        Surrogate s;
        s.family = parse_model_family(j.at("family").get<std::string>());
        s.block = parse_target_block(j.at("block").get<std::string>());
        s.space = ParameterSpace::from_json(j.at("space"));
        if (j.contains("space_hash") && j.at("space_hash").get<std::string>() != s.space.hash())
            fail(ErrorCode::parse_error, "model space hash does not match its space definition");
        s.input_norm = Normalizer::from_json(j.at("input_norm"));
        s.contour_by_vdd = j.at("contour_by_vdd").get<bool>();
        s.feature_fill = vector_from_json(j.at("feature_fill"));
        s.config = j.at("config");
        s.report = j.at("report");
        s.train_manifest_hash = j.at("train_manifest_hash").get<std::string>();
        const auto& ij = j.at("impl");
        const auto kind = ij.at("kind").get<std::string>();
        const auto& data = ij.at("data");
        if (kind == "gpr") s.impl = GprModel::from_json(data);
        else if (kind == "krr") s.impl = KrrModel::from_json(data);
        else if (kind == "tree") s.impl = TreeModel::from_json(data);
        else if (kind == "mlp") s.impl = MlpModel::from_json(data);
        else if (kind == "ensemble") s.impl = EnsembleModel::from_json(data);
        else fail(ErrorCode::parse_error, "unknown model kind '" + kind + "'");
        return s;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("model artifact: ") + e.what());
    }
}

void Surrogate::save(const std::string& path) const
{
    write_text_file(path, to_json().dump());
}

Surrogate Surrogate::load(const std::string& path)
{
    try {
        return from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::parse_error, path + ": " + e.what());
    }
}

}  // namespace sisurr
