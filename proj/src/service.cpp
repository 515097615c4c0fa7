#include "sisurr/service.hpp"

#include <algorithm>
#include <filesystem>

#include <httplib.h>

#include "sisurr/error.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

namespace fs = std::filesystem;

namespace {

double ui_of(const std::map<std::string, double>& v)
{
    auto it = v.find("f_clock");
    if (it == v.end()) fail(ErrorCode::unbound_parameter, "f_clock");
    return 0.5e-6 / it->second;
}

json error_body(ErrorCode code, const std::string& message, json extra = json::object())
{
    extra["code"] = std::string(to_string(code));
    extra["message"] = message;
    return {{"error", extra}};
}

/// Structured bounds error for the first variable outside its range.
struct BoundsError {
    std::string parameter;
    double value, min, max;
};

std::optional<BoundsError> bounds_violation(const ParameterSpace& space, const std::map<std::string, double>& v)
{
    for (const auto& p : space.params()) {
        const double x = v.at(p.name);
        if (!(x >= p.min && x <= p.max)) return BoundsError{p.name, x, p.min, p.max};
    }
    return std::nullopt;
}

class BoundsException : public Error {
public:
    explicit BoundsException(const BoundsError& b)
        : Error(ErrorCode::out_of_bounds, b.parameter + "=" + format_double(b.value) + " outside [" +
                                              format_double(b.min) + ", " + format_double(b.max) + "]"),
          info(b)
    {
    }
    BoundsError info;
};

/// Full parameter map for a request design: every variable must be given,
/// fixed values may be repeated but must match.
std::map<std::string, double> bind_design(const ParameterSpace& space, const json& design)
{
    if (!design.is_object()) fail(ErrorCode::parse_error, "design must be an object of parameter values");
    std::map<std::string, double> v = space.fixed();
    for (const auto& [k, val] : design.items()) {
        if (!val.is_number()) fail(ErrorCode::parse_error, "parameter " + k + " is not a number");
        const double x = val.get<double>();
        if (space.index_of(k)) {
            v[k] = x;
        } else if (auto it = space.fixed().find(k); it != space.fixed().end()) {
            if (it->second != x)
                fail(ErrorCode::out_of_domain, k + " is fixed at " + format_double(it->second) + " in this model");
        } else {
            fail(ErrorCode::invalid_argument, "unknown parameter '" + k + "'");
        }
    }
    for (const auto& p : space.params())
        if (!v.count(p.name)) fail(ErrorCode::unbound_parameter, "missing parameter '" + p.name + "'");
    if (auto b = bounds_violation(space, v)) throw BoundsException(*b);
    return v;
}

}  // namespace

int http_status(ErrorCode code)
{
    switch (code) {
    case ErrorCode::out_of_bounds:
    case ErrorCode::out_of_domain:
    case ErrorCode::unbound_parameter: return 422;
    case ErrorCode::too_large_request: return 413;
    case ErrorCode::io_error: return 500;
    default: return 400;
    }
}

ExplorerService::ExplorerService(std::map<std::string, Surrogate> models, std::vector<EyeMask> user_masks,
                                 ServiceOptions opts)
    : models_(std::move(models)), masks_(ddr_masks()), opts_(opts)
{
    for (const auto& [name, m] : models_)
        if (m.space.hash() != m.train_manifest_hash)
            fail(ErrorCode::invalid_argument, "model " + name + ": space hash does not match its training manifest");
    for (auto& m : user_masks) {
        m.validate();
        masks_.push_back(std::move(m));
    }
}

ExplorerService ExplorerService::from_directory(const std::string& dir, ServiceOptions opts)
{
    if (!fs::is_directory(dir)) fail(ErrorCode::io_error, "models directory " + dir + " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::map<std::string, Surrogate> models;
    for (const auto& f : files) models.emplace(f.stem().string(), Surrogate::load(f.string()));
    std::vector<EyeMask> masks;
    if (fs::is_directory(fs::path(dir) / "masks")) {
        std::vector<fs::path> mf;
        for (const auto& e : fs::directory_iterator(fs::path(dir) / "masks"))
            if (e.path().extension() == ".json") mf.push_back(e.path());
        std::sort(mf.begin(), mf.end());
        for (const auto& f : mf) masks.push_back(EyeMask::load(f.string()));
    }
    return ExplorerService(std::move(models), std::move(masks), opts);
}

json ExplorerService::health() const
{
    return {{"status", "ok"}, {"api", "v1"}, {"models", models_.size()}, {"masks", masks_.size()}};
}

json ExplorerService::models() const
{
    json list = json::array();
    for (const auto& [name, m] : models_)
        list.push_back({{"name", name},
                        {"family", to_string(m.family)},
                        {"block", to_string(m.block)},
                        {"space_hash", m.space.hash()},
                        {"outputs", m.output_names()},
                        {"config", m.config},
                        {"report", m.report}});
    return {{"models", list}};
}

json ExplorerService::spaces() const
{
    json list = json::array();
    for (const auto& [name, m] : models_)
        list.push_back({{"model", name}, {"space_hash", m.space.hash()}, {"space", m.space.to_json()}});
    return {{"spaces", list}, {"masks", masks()["masks"]}};
}

json ExplorerService::masks() const
{
    json list = json::array();
    for (const auto& m : masks_) list.push_back(m.to_json());
    return {{"masks", list}};
}

const Surrogate& ExplorerService::model(const json& request) const
{
    if (!request.contains("model") || !request.at("model").is_string())
        fail(ErrorCode::parse_error, "request needs a model name");
    const auto name = request.at("model").get<std::string>();
    auto it = models_.find(name);
    if (it == models_.end()) fail(ErrorCode::invalid_argument, "unknown model '" + name + "'");
    return it->second;
}

const EyeMask& ExplorerService::mask(const json& ref) const
{
    if (!ref.is_string()) fail(ErrorCode::parse_error, "mask must be referenced by name");
    const auto name = ref.get<std::string>();
    for (const auto& m : masks_)
        if (m.name == name) return m;
    fail(ErrorCode::invalid_argument, "unknown mask '" + name + "'");
}

json ExplorerService::point_outputs(const Surrogate& m, const std::map<std::string, double>& v, const double* out,
                                    const EyeMask* mk) const
{
    json r = json::object();
    const auto names = m.output_names();
    switch (m.block) {
    case TargetBlock::contour: {
        const double vdd = v.at("vdd");
        const double ui = ui_of(v);
        r["contour"] = std::vector<double>(out, out + kContourWidth);
        const auto c = EyeContour::from_flat(out, ui, 0.5 * vdd);
        const auto em = eye_metrics(c, vdd, ui);
        r["eh_norm"] = em.eh_norm;
        r["ew_norm"] = em.ew_norm;
        if (mk) {
            const auto res = check_mask(EyeContour::from_flat(out, ui, mk->v_ref), *mk, vdd);
            r["pass"] = res.pass;
            r["severity"] = res.severity;
        }
        break;
    }
    case TargetBlock::features: {
        json f = json::object();
        for (std::size_t k = 0; k < names.size(); ++k) f[names[k]] = out[k];
        r["features"] = f;
        break;
    }
    default:
        for (std::size_t k = 0; k < names.size(); ++k) r[names[k]] = out[k];
    }
    if (mk && m.block != TargetBlock::contour)
        fail(ErrorCode::invalid_argument, "mask checks need a contour model");
    return r;
}

json ExplorerService::predict(const json& req) const
{
    const Surrogate& m = model(req);
    std::vector<json> designs;
    if (req.contains("design")) designs.push_back(req.at("design"));
    if (req.contains("designs")) {
        if (!req.at("designs").is_array()) fail(ErrorCode::parse_error, "designs must be an array");
        for (const auto& d : req.at("designs")) designs.push_back(d);
    }
    if (designs.empty()) fail(ErrorCode::parse_error, "request needs design or designs");
    if (designs.size() > opts_.explore_cap)
        fail(ErrorCode::too_large_request, "batch of " + std::to_string(designs.size()) + " exceeds the cap of " +
                                               std::to_string(opts_.explore_cap));
    const EyeMask* mk = req.contains("mask") ? &mask(req.at("mask")) : nullptr;

    std::vector<std::map<std::string, double>> bound;
    std::vector<DesignVector> rows;
    for (const auto& d : designs) {
        bound.push_back(bind_design(m.space, d));
        rows.push_back(m.space.from_map(bound.back()));
    }
    const Eigen::MatrixXd P = m.predict(rows);
    json results = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Eigen::RowVectorXd row = P.row(static_cast<Eigen::Index>(i));
        results.push_back(point_outputs(m, bound[i], row.data(), mk));
    }
    return {{"model", req.at("model")}, {"block", to_string(m.block)}, {"results", results}};
}

json ExplorerService::explore(const json& req) const
{
    const double t0 = wall_seconds();
    const Surrogate& m = model(req);
    if (!req.contains("mask")) fail(ErrorCode::parse_error, "explore needs a mask");
    const EyeMask& mk = mask(req.at("mask"));
    if (!req.contains("axes") || !req.at("axes").is_array()) fail(ErrorCode::parse_error, "explore needs an axes array");
    const auto& axes = req.at("axes");
    if (axes.empty() || axes.size() > 2) fail(ErrorCode::invalid_argument, "explore takes one or two axes");

    struct Axis {
        std::string name;
        std::vector<double> values;
    };
    std::vector<Axis> grid;
    std::size_t total = 1;
    for (const auto& a : axes) {
        Axis ax;
        ax.name = a.at("name").get<std::string>();
        if (!m.space.index_of(ax.name)) fail(ErrorCode::invalid_argument, "axis '" + ax.name + "' is not a model variable");
        const double lo = a.at("min").get<double>();
        const double hi = a.at("max").get<double>();
        const auto steps = a.at("steps").get<std::size_t>();
        if (steps < 1) fail(ErrorCode::invalid_argument, "axis steps must be >= 1");
        for (std::size_t k = 0; k < steps; ++k)
            ax.values.push_back(steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1));
        total *= steps;
        if (total > opts_.explore_cap)
            fail(ErrorCode::too_large_request, "grid exceeds the cap of " + std::to_string(opts_.explore_cap) + " points");
        grid.push_back(std::move(ax));
    }
    if (grid.size() == 2 && grid[0].name == grid[1].name) fail(ErrorCode::invalid_argument, "axes must differ");

    json fixed = req.value("fixed", json::object());
    std::vector<std::map<std::string, double>> bound;
    std::vector<DesignVector> rows;
    const std::size_t n1 = grid.size() == 2 ? grid[1].values.size() : 1;
    for (std::size_t i = 0; i < grid[0].values.size(); ++i)
        for (std::size_t j = 0; j < n1; ++j) {
            json d = fixed;
            d[grid[0].name] = grid[0].values[i];
            if (grid.size() == 2) d[grid[1].name] = grid[1].values[j];
            bound.push_back(bind_design(m.space, d));
            rows.push_back(m.space.from_map(bound.back()));
        }
    const Eigen::MatrixXd P = m.predict(rows);
    json points = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Eigen::RowVectorXd row = P.row(static_cast<Eigen::Index>(i));
        json p = point_outputs(m, bound[i], row.data(), &mk);
        json values = json::object();
        for (const auto& g : grid) values[g.name] = bound[i].at(g.name);
        points.push_back({{"values", values}, {"pass", p["pass"]}, {"severity", p["severity"]},
                          {"eh_norm", p["eh_norm"]}, {"ew_norm", p["ew_norm"]}});
    }
    json grid_j = json::array();
    for (const auto& g : grid) grid_j.push_back({{"name", g.name}, {"values", g.values}});
    return {{"model", req.at("model")},
            {"mask", mk.name},
            {"grid", grid_j},
            {"points", points},
            {"wallclock_seconds", wall_seconds() - t0}};
}

HttpResponse ExplorerService::handle(const std::string& method, const std::string& path, const std::string& body) const
{
    static const std::map<std::string, std::string> routes{{"/v1/health", "GET"},   {"/v1/models", "GET"},
                                                           {"/v1/spaces", "GET"},   {"/v1/masks", "GET"},
                                                           {"/v1/predict", "POST"}, {"/v1/explore", "POST"}};
    auto route = routes.find(path);
    if (route == routes.end()) return {404, error_body(ErrorCode::invalid_argument, "no endpoint " + path)};
    if (route->second != method)
        return {405, error_body(ErrorCode::invalid_argument, path + " expects " + route->second)};
    try {
        if (path == "/v1/health") return {200, health()};
        if (path == "/v1/models") return {200, models()};
        if (path == "/v1/spaces") return {200, spaces()};
        if (path == "/v1/masks") return {200, masks()};
        json req;
        try {
            req = json::parse(body);
        } catch (const json::parse_error& e) {
            fail(ErrorCode::parse_error, std::string("request body: ") + e.what());
        }
        if (path == "/v1/predict") return {200, predict(req)};
        return {200, explore(req)};
    } catch (const BoundsException& e) {
        return {422, error_body(e.code(), e.what(),
                                {{"parameter", e.info.parameter}, {"value", e.info.value}, {"min", e.info.min}, {"max", e.info.max}})};
    } catch (const Error& e) {
        json extra = json::object();
        if (e.code() == ErrorCode::too_large_request) extra["cap"] = opts_.explore_cap;
        return {http_status(e.code()), error_body(e.code(), e.what(), extra)};
    } catch (const json::exception& e) {
        return {400, error_body(ErrorCode::parse_error, e.what())};
    }
}

HttpServer::HttpServer(const ExplorerService& service) : server_(std::make_unique<httplib::Server>())
{
    auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        const auto r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server_->Get(R"(/.*)", handler);
    server_->Post(R"(/.*)", handler);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port)
{
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) fail(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen()
{
    server_->listen_after_bind();
}

void HttpServer::stop()
{
    server_->stop();
}

void run_server(const ExplorerService& service, const std::string& host, int port)
{
    HttpServer server(service);
    server.bind(host, port);
    server.listen();
}

}  // namespace sisurr
