#include "sisurr/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sisurr/error.hpp"
#include "sisurr/gpr.hpp"
#include "sisurr/param_space.hpp"

namespace sisurr {

namespace {

std::string_view kind_name(AxisKind k)
{
    switch (k) {
    case AxisKind::real: return "real";
    case AxisKind::log_real: return "log";
    case AxisKind::integer: return "int";
    case AxisKind::categorical: return "categorical";
    }
    return "real";
}

AxisKind parse_kind(std::string_view s)
{
    if (s == "real") return AxisKind::real;
    if (s == "log") return AxisKind::log_real;
    if (s == "int") return AxisKind::integer;
    if (s == "categorical") return AxisKind::categorical;
    fail(ErrorCode::invalid_hyper, "unknown axis kind '" + std::string(s) + "'");
}

}  // namespace

HyperSpace::HyperSpace(std::vector<HyperAxis> axes) : axes_(std::move(axes))
{
    if (axes_.empty()) fail(ErrorCode::invalid_hyper, "hyperparameter space has no axes");
    for (const auto& a : axes_) {
        if (a.kind == AxisKind::categorical) {
            if (a.choices.empty()) fail(ErrorCode::invalid_hyper, "categorical axis " + a.name + " has no choices");
            continue;
        }
        if (!(a.lo <= a.hi)) fail(ErrorCode::invalid_hyper, "axis " + a.name + " has lo > hi");
        if (a.kind == AxisKind::log_real && !(a.lo > 0)) fail(ErrorCode::invalid_hyper, "log axis " + a.name + " must be positive");
        if (a.kind == AxisKind::integer && (a.lo != std::floor(a.lo) || a.hi != std::floor(a.hi)))
            fail(ErrorCode::invalid_hyper, "integer axis " + a.name + " needs integral bounds");
    }
}

int HyperSpace::encoded_dim() const
{
    int d = 0;
    for (const auto& a : axes_) d += a.encoded_width();
    return d;
}

json HyperSpace::decode(const Eigen::VectorXd& u) const
{
    json c = json::object();
    Eigen::Index k = 0;
    for (const auto& a : axes_) {
        switch (a.kind) {
        case AxisKind::real: c[a.name] = a.lo + std::clamp(u[k], 0.0, 1.0) * (a.hi - a.lo); break;
        case AxisKind::log_real:
            c[a.name] = std::exp(std::log(a.lo) + std::clamp(u[k], 0.0, 1.0) * (std::log(a.hi) - std::log(a.lo)));
            break;
        case AxisKind::integer: {
            const double span = a.hi - a.lo + 1;
            c[a.name] = static_cast<long>(std::min(a.hi, a.lo + std::floor(std::clamp(u[k], 0.0, 1.0) * span)));
            break;
        }
        case AxisKind::categorical: {
            Eigen::Index best = 0;
            for (Eigen::Index i = 1; i < a.encoded_width(); ++i)
                if (u[k + i] > u[k + best]) best = i;
            c[a.name] = a.choices[static_cast<std::size_t>(best)];
            break;
        }
        }
        k += a.encoded_width();
    }
    return c;
}

Eigen::VectorXd HyperSpace::encode(const json& config) const
{
    Eigen::VectorXd u = Eigen::VectorXd::Zero(encoded_dim());
    Eigen::Index k = 0;
    for (const auto& a : axes_) {
        const json& v = config.at(a.name);
        switch (a.kind) {
        case AxisKind::real: u[k] = a.hi > a.lo ? (v.get<double>() - a.lo) / (a.hi - a.lo) : 0.5; break;
        case AxisKind::log_real:
            u[k] = a.hi > a.lo ? (std::log(v.get<double>()) - std::log(a.lo)) / (std::log(a.hi) - std::log(a.lo)) : 0.5;
            break;
        case AxisKind::integer: u[k] = (v.get<double>() - a.lo + 0.5) / (a.hi - a.lo + 1); break;
        case AxisKind::categorical: {
            auto it = std::find(a.choices.begin(), a.choices.end(), v);
            if (it == a.choices.end()) fail(ErrorCode::invalid_hyper, "value not among choices of " + a.name);
            u[k + (it - a.choices.begin())] = 1.0;
            break;
        }
        }
        k += a.encoded_width();
    }
    return u.cwiseMax(0.0).cwiseMin(1.0);
}

json HyperSpace::sample(Rng& rng) const
{
    std::uniform_real_distribution<double> uni(0, 1);
    Eigen::VectorXd u(encoded_dim());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = uni(rng);
    return decode(u);
}

bool HyperSpace::contains(const json& config) const
{
    for (const auto& a : axes_) {
        if (!config.contains(a.name)) return false;
        const json& v = config.at(a.name);
        if (a.kind == AxisKind::categorical) {
            if (std::find(a.choices.begin(), a.choices.end(), v) == a.choices.end()) return false;
            continue;
        }
        if (!v.is_number()) return false;
        const double x = v.get<double>();
        const double tol = 1e-12 * std::max(1.0, std::abs(a.hi));
        if (x < a.lo - tol || x > a.hi + tol) return false;
        if (a.kind == AxisKind::integer && x != std::floor(x)) return false;
    }
    return true;
}

json HyperSpace::to_json() const
{
    json arr = json::array();
    for (const auto& a : axes_) {
        json j = {{"name", a.name}, {"kind", kind_name(a.kind)}};
        if (a.kind == AxisKind::categorical) j["choices"] = a.choices;
        else {
            j["lo"] = a.lo;
            j["hi"] = a.hi;
        }
        arr.push_back(j);
    }
    return arr;
}

HyperSpace HyperSpace::from_json(const json& j)
{
    std::vector<HyperAxis> axes;
    for (const auto& aj : j) {
        HyperAxis a;
        a.name = aj.at("name").get<std::string>();
        a.kind = parse_kind(aj.at("kind").get<std::string>());
        if (a.kind == AxisKind::categorical) a.choices = aj.at("choices").get<std::vector<json>>();
        else {
            a.lo = aj.at("lo").get<double>();
            a.hi = aj.at("hi").get<double>();
        }
        axes.push_back(std::move(a));
    }
    return HyperSpace(std::move(axes));
}

int SearchTrace::best_index() const
{
    int best = -1;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (best < 0 || entries[i].score < entries[static_cast<std::size_t>(best)].score) best = static_cast<int>(i);
    return best;
}

double SearchTrace::best_score() const
{
    const int b = best_index();
    return b < 0 ? std::numeric_limits<double>::infinity() : entries[static_cast<std::size_t>(b)].score;
}

const json& SearchTrace::best_config() const
{
    const int b = best_index();
    if (b < 0) fail(ErrorCode::invalid_argument, "empty search trace");
    return entries[static_cast<std::size_t>(b)].config;
}

std::vector<double> SearchTrace::best_so_far() const
{
    std::vector<double> out;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) {
        best = std::min(best, e.score);
        out.push_back(best);
    }
    return out;
}

namespace {

std::string csv_quote(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double evaluate(const HpoObjective& objective, const json& config, TraceEntry& e)
{
    const double t0 = wall_seconds();
    try {
        e.score = objective(config);
        if (!std::isfinite(e.score)) {
            e.failed = true;
            e.message = "non-finite score";
            e.score = std::numeric_limits<double>::infinity();
        }
    } catch (const std::exception& ex) {
        e.failed = true;
        e.message = ex.what();
        e.score = std::numeric_limits<double>::infinity();
    }
    e.wallclock = wall_seconds() - t0;
    return e.score;
}

bool reusable(const SearchTrace* resume, std::size_t i, const json& config)
{
    return resume && i < resume->entries.size() && resume->entries[i].config == config;
}

}  // namespace

void SearchTrace::write_csv(const std::string& path) const
{
    std::ostringstream out;
    out << "iteration,config,score,wallclock,failed,fallback,message\n";
    for (const auto& e : entries) {
        out << e.iteration << ',' << csv_quote(e.config.dump()) << ',' << format_double(e.score) << ','
            << format_double(e.wallclock) << ',' << (e.failed ? 1 : 0) << ',' << (e.fallback ? 1 : 0) << ','
            << csv_quote(e.message) << '\n';
    }
    write_text_file(path, out.str());
}

SearchTrace SearchTrace::read_csv(const std::string& path)
{
    std::istringstream in(read_text_file(path));
    SearchTrace t;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = csv_split(line);
        if (f.size() != 7) fail(ErrorCode::parse_error, path + ": trace row has " + std::to_string(f.size()) + " fields");
        TraceEntry e;
        e.iteration = std::stoi(f[0]);
        e.config = json::parse(f[1]);
        e.score = f[2] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(f[2]);
        e.wallclock = std::stod(f[3]);
        e.failed = f[4] == "1";
        e.fallback = f[5] == "1";
        e.message = f[6];
        t.entries.push_back(std::move(e));
    }
    t.budget = static_cast<int>(t.entries.size());
    return t;
}

double expected_improvement(double mean, double sd, double best)
{
    if (!(sd > 0)) return std::max(0.0, best - mean);
    const double z = (best - mean) / sd;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2 * M_PI);
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    return (best - mean) * cdf + sd * pdf;
}

SearchTrace random_search(const HpoObjective& objective, const HyperSpace& space, int budget, std::uint64_t seed,
                          int workers, const SearchTrace* resume)
{
    if (space.empty()) fail(ErrorCode::invalid_hyper, "hyperparameter space has no axes");
    if (budget < 1) fail(ErrorCode::invalid_hyper, "search budget must be at least 1");
    SearchTrace t;
    t.method = "random";
    t.budget = budget;
    Rng rng(derive_seed(seed, "random-search"));
    t.entries.resize(static_cast<std::size_t>(budget));
    for (int i = 0; i < budget; ++i) {
        t.entries[static_cast<std::size_t>(i)].iteration = i;
        t.entries[static_cast<std::size_t>(i)].config = space.sample(rng);
    }
    parallel_for(t.entries.size(), workers, [&](std::size_t i) {
        auto& e = t.entries[i];
        if (reusable(resume, i, e.config)) {
            e = resume->entries[i];
            return;
        }
        evaluate(objective, e.config, e);
    });
    return t;
}

SearchTrace gp_ei_search(const HpoObjective& objective, const HyperSpace& space, int budget, int init,
                         std::uint64_t seed, const SearchTrace* resume)
{
    if (space.empty()) fail(ErrorCode::invalid_hyper, "hyperparameter space has no axes");
    if (budget < 1 || init < 1) fail(ErrorCode::invalid_hyper, "search budget and init must be at least 1");
    init = std::min(init, budget);
    SearchTrace t;
    t.method = "gp-ei";
    t.budget = budget;
    Rng rng(derive_seed(seed, "gp-ei"));
    const int k = space.encoded_dim();
    Eigen::MatrixXd U = lhs_unit(static_cast<std::size_t>(init), static_cast<std::size_t>(k), rng);
    std::vector<Eigen::VectorXd> seen;

    auto run = [&](const json& config, bool fallback) {
        TraceEntry e;
        e.iteration = static_cast<int>(t.entries.size());
        e.config = config;
        e.fallback = fallback;
        const std::size_t i = t.entries.size();
        if (reusable(resume, i, config)) {
            e = resume->entries[i];
        } else {
            evaluate(objective, config, e);
        }
        seen.push_back(space.encode(config));
        t.entries.push_back(std::move(e));
    };

    for (int i = 0; i < init; ++i) run(space.decode(U.row(i).transpose()), false);

    std::uniform_real_distribution<double> uni(0, 1);
    std::normal_distribution<double> gauss(0, 0.05);
    while (static_cast<int>(t.entries.size()) < budget) {
        const std::size_t n = t.entries.size();
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), k);
        Eigen::MatrixXd y(static_cast<Eigen::Index>(n), 1);
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& e : t.entries)
            if (std::isfinite(e.score)) worst = std::max(worst, e.score);
        for (std::size_t i = 0; i < n; ++i) {
            X.row(static_cast<Eigen::Index>(i)) = seen[i].transpose();
            const double s = t.entries[i].score;
            y(static_cast<Eigen::Index>(i), 0) = std::isfinite(s) ? s : (std::isfinite(worst) ? worst : 0.0);
        }
        // candidate pool: uniform draws plus perturbations of the incumbent
        const int n_cand = 2000;
        Eigen::MatrixXd C(n_cand, k);
        const Eigen::VectorXd inc = seen[static_cast<std::size_t>(std::max(0, t.best_index()))];
        for (int c = 0; c < n_cand; ++c)
            for (int j = 0; j < k; ++j)
                C(c, j) = c < n_cand / 2 ? uni(rng) : std::clamp(inc[j] + gauss(rng), 0.0, 1.0);

        json proposal;
        bool fallback = false;
        try {
            GprOptions o;
            o.form = KernelForm::aniso;
            o.restarts = 2;
            o.max_iters = 50;
            o.seed = derive_seed(seed, n);
            auto gp = gpr_fit(X, y, o);
            const Eigen::MatrixXd mu = gp.predict(C);
            const Eigen::MatrixXd var = gp.predict_variance(C);
            const double best = y.minCoeff();
            int arg = -1;
            double best_ei = -1;
            for (int c = 0; c < n_cand; ++c) {
                const double ei = expected_improvement(mu(c, 0), std::sqrt(var(c, 0)), best);
                if (ei > best_ei) {
                    best_ei = ei;
                    arg = c;
                }
            }
            proposal = space.decode(C.row(arg).transpose());
        } catch (const Error&) {
            fallback = true;
            proposal = space.sample(rng);
        }
        run(proposal, fallback);
    }
    return t;
}

}  // namespace sisurr
