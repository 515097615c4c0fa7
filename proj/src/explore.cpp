#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sisurr/error.hpp"
#include "sisurr/presets.hpp"
#include "sisurr/pipeline.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

namespace {

double quantile(std::vector<double> v, double q)
{
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

[[noreturn]] void outside(const std::string& what)
{
    fail(ErrorCode::out_of_domain, what + " lies outside the model's training space");
}

/// Raises out_of_domain when a value cannot be represented by the model space.
void require_in_space(const ParameterSpace& space, const std::string& name, double v)
{
    if (auto i = space.index_of(name)) {
        const auto& p = space.params()[*i];
        const double slack = 1e-12 * (p.max - p.min);
        if (!(v >= p.min - slack && v <= p.max + slack))
            outside(name + "=" + format_double(v) + " (trained on [" + format_double(p.min) + ", " + format_double(p.max) + "])");
        return;
    }
    auto it = space.fixed().find(name);
    if (it == space.fixed().end())
        fail(ErrorCode::invalid_argument, "parameter '" + name + "' is not part of the model space");
    if (it->second != v) outside(name + "=" + format_double(v) + " (model fixed at " + format_double(it->second) + ")");
}

}  // namespace

json Scenario::to_json() const
{
    json r = json::object();
    for (const auto& [k, v] : ranges) r[k] = {v[0], v[1]};
    return {{"name", name},
            {"buffer", buffer},
            {"jitter", jitter},
            {"mask", mask.to_json()},
            {"ranges", r},
            {"fixed", fixed},
            {"impedance", {{"nominal", nominal_z0}, {"adjust", adjust}, {"corners", corners}}},
            {"n", n},
            {"seed", seed},
            {"ground_truth", ground_truth}};
}

Scenario Scenario::from_json(const json& j)
{
    try {
        Scenario s;
        s.name = j.value("name", std::string("scenario"));
        s.buffer = j.at("buffer").get<std::string>();
        s.jitter = j.value("jitter", s.jitter);
        const auto& m = j.at("mask");
        s.mask = m.is_string() ? ddr_mask(m.get<std::string>()) : EyeMask::from_json(m);
        for (const auto& [k, v] : j.at("ranges").items()) {
            const auto lo = v.at(0).get<double>();
            const auto hi = v.at(1).get<double>();
            if (!(lo < hi)) fail(ErrorCode::invalid_argument, "range for " + k + " must have lo < hi");
            s.ranges[k] = {lo, hi};
        }
        if (j.contains("fixed")) s.fixed = j.at("fixed").get<std::map<std::string, double>>();
        if (j.contains("impedance")) {
            const auto& z = j.at("impedance");
            s.nominal_z0 = z.value("nominal", s.nominal_z0);
            s.adjust = z.value("adjust", s.adjust);
            if (z.contains("corners")) s.corners = z.at("corners").get<std::vector<double>>();
        }
        s.n = j.value("n", s.n);
        s.seed = j.value("seed", s.seed);
        s.ground_truth = j.value("ground_truth", s.ground_truth);
        if (s.adjust != "w") fail(ErrorCode::invalid_argument, "only the trace width can be solved for impedance");
        if (s.ground_truth > s.n) fail(ErrorCode::invalid_argument, "ground_truth subsample larger than n");
        return s;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("scenario: ") + e.what());
    }
}

Scenario Scenario::load(const std::string& path)
{
    try {
        return from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::parse_error, path + ": " + e.what());
    }
}

std::vector<std::vector<DesignVector>> scenario_designs(const Scenario& sc, const ParameterSpace& space)
{
    std::map<std::string, double> base = buffer_setting(sc.buffer).as_parameters(sc.jitter);
    for (const auto& [k, v] : sc.fixed) base[k] = v;
    for (const auto& [k, v] : base) require_in_space(space, k, v);

    std::vector<ParameterDef> axes;
    for (const auto& [k, r] : sc.ranges) {
        if (base.count(k)) fail(ErrorCode::invalid_argument, k + " is both fixed and sampled");
        require_in_space(space, k, r[0]);
        require_in_space(space, k, r[1]);
        axes.push_back({k, r[0], r[1], "", ParamRole::pcb});
    }
    for (const auto& p : space.params())
        if (!base.count(p.name) && !sc.ranges.count(p.name) && p.name != sc.adjust)
            fail(ErrorCode::invalid_argument, "scenario leaves model parameter '" + p.name + "' unbound");
    for (const char* g : {"h", "t", "eps_r"})
        if (!base.count(g) && !sc.ranges.count(g))
            fail(ErrorCode::invalid_argument, std::string("impedance solve needs '") + g + "'");

    const ParameterSpace sub(axes, {});
    const auto pts = lhs_sample(sub, sc.n, derive_seed(sc.seed, "explore"));
    std::vector<double> targets{sc.nominal_z0};
    for (double c : sc.corners) targets.push_back(c * sc.nominal_z0);

    std::vector<std::vector<DesignVector>> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto m = base;
        for (std::size_t a = 0; a < axes.size(); ++a) m[axes[a].name] = pts[i].values[a];
        for (double z : targets) {
            m[sc.adjust] = microstrip_width_for_z0(z, m.at("h"), m.at("t"), m.at("eps_r"));
            require_in_space(space, sc.adjust, m[sc.adjust]);
            out[i].push_back(space.from_map(m));
        }
    }
    return out;
}

std::vector<std::size_t> ExplorationReport::pass_set() const
{
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].pred_pass) v.push_back(i);
    return v;
}

std::vector<std::size_t> ExplorationReport::corner_pass_set(std::size_t corner) const
{
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].corner_pass.at(corner)) v.push_back(i);
    return v;
}

std::vector<std::size_t> ExplorationReport::joint_pass_set() const
{
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].joint_pass) v.push_back(i);
    return v;
}

void summarize_ground_truth(ExplorationReport& r)
{
    r.tp = r.fp = r.tn = r.fn = 0;
    r.ground_truth = 0;
    std::vector<double> fp_sev;
    for (const auto& s : r.samples) {
        if (!s.true_pass) continue;
        ++r.ground_truth;
        if (s.pred_pass && *s.true_pass) ++r.tp;
        else if (s.pred_pass) {
            ++r.fp;
            fp_sev.push_back(*s.true_severity);
        } else if (*s.true_pass) ++r.fn;
        else ++r.tn;
    }
    r.fp_severity_median = quantile(fp_sev, 0.5);
    r.fp_severity_p95 = quantile(fp_sev, 0.95);
    r.fp_severity_max = fp_sev.empty() ? 0 : *std::max_element(fp_sev.begin(), fp_sev.end());
}

ExplorationReport explore(const Surrogate& model, const Scenario& sc, const ExploreOptions& opts)
{
    if (model.block != TargetBlock::contour)
        fail(ErrorCode::invalid_argument, "exploration needs a contour model, got " + std::string(to_string(model.block)));
    sc.mask.validate();
    const auto designs = scenario_designs(sc, model.space);
    const std::size_t k = 1 + sc.corners.size();

    ExplorationReport r;
    r.scenario = sc.name;
    r.model = std::string(to_string(model.family));
    r.n = designs.size();
    r.corners = sc.corners;
    r.manifest = {{"scenario", sc.to_json()},
                  {"model_hash", fnv1a_hex(model.to_json().dump())},
                  {"space_hash", model.space.hash()}};
    if (sc.ground_truth > 0) r.manifest["simulation"] = {{"netlist", opts.netlist}, {"generate", opts.sim.to_json()}};
    r.samples.resize(r.n);

    std::vector<DesignVector> flat;
    flat.reserve(r.n * k);
    for (const auto& d : designs) flat.insert(flat.end(), d.begin(), d.end());
    const double t0 = wall_seconds();
    const Eigen::MatrixXd P = model.predict(flat);
    r.predict_seconds = wall_seconds() - t0;

    const auto& bs = buffer_setting(sc.buffer);
    const double ui = 0.5e-6 / bs.f_clock_mhz;
    for (std::size_t i = 0; i < r.n; ++i) {
        auto& s = r.samples[i];
        s.nominal = designs[i][0].values;
        for (std::size_t c = 0; c < k; ++c) {
            const auto row = static_cast<Eigen::Index>(i * k + c);
            Eigen::RowVectorXd vals = P.row(row);
            const auto contour = EyeContour::from_flat(vals.data(), ui, sc.mask.v_ref);
            const auto res = check_mask(contour, sc.mask, bs.vdd);
            if (c == 0) {
                s.pred_pass = res.pass;
                s.pred_severity = res.severity;
            } else {
                s.corner_pass.push_back(res.pass ? 1 : 0);
                s.corner_severity.push_back(res.severity);
            }
        }
        s.joint_pass = s.pred_pass && std::all_of(s.corner_pass.begin(), s.corner_pass.end(), [](auto p) { return p != 0; });
    }
    r.predicted_pass = r.pass_set().size();
    for (std::size_t c = 0; c < sc.corners.size(); ++c) r.corner_pass_count.push_back(r.corner_pass_set(c).size());
    r.joint_pass = r.joint_pass_set().size();

    if (sc.ground_truth > 0) {
        if (opts.netlist.is_null()) fail(ErrorCode::invalid_argument, "ground truth needs a netlist document");
        std::vector<DesignVector> pts;
        for (std::size_t i = 0; i < sc.ground_truth; ++i) pts.push_back(designs[i][0]);
        GenerateOptions g = opts.sim;
        g.workers = opts.workers;
        const double t1 = wall_seconds();
        const Dataset truth = simulate_points(model.space, opts.netlist, pts, g);
        r.simulate_seconds = wall_seconds() - t1;
        for (std::size_t i = 0; i < sc.ground_truth; ++i) {
            if (truth.failed[i]) continue;
            Eigen::RowVectorXd vals = truth.contour.row(static_cast<Eigen::Index>(i));
            const auto res = check_mask(EyeContour::from_flat(vals.data(), ui, sc.mask.v_ref), sc.mask, bs.vdd);
            r.samples[i].true_pass = res.pass;
            r.samples[i].true_severity = res.severity;
        }
        summarize_ground_truth(r);
    }
    return r;
}

json ExplorationReport::numbers_json() const
{
    json corner_sets = json::array();
    for (std::size_t c = 0; c < corners.size(); ++c) corner_sets.push_back(corner_pass_set(c));
    return {{"scenario", scenario},
            {"model", model},
            {"n", n},
            {"predicted_pass", predicted_pass},
            {"corners", corners},
            {"corner_pass_count", corner_pass_count},
            {"joint_pass", joint_pass},
            {"pass_set", pass_set()},
            {"corner_pass_sets", corner_sets},
            {"joint_pass_set", joint_pass_set()},
            {"ground_truth", ground_truth},
            {"confusion", {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}}},
            {"fp_severity", {{"median", fp_severity_median}, {"p95", fp_severity_p95}, {"max", fp_severity_max}}},
            {"manifest", manifest}};
}

json ExplorationReport::to_json() const
{
    json j = numbers_json();
    j["predict_seconds"] = predict_seconds;
    j["simulate_seconds"] = simulate_seconds;
    return j;
}

void ExplorationReport::write(const std::string& dir, const ParameterSpace& space) const
{
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/report.json", to_json().dump(2) + "\n");
    std::string csv = "index";
    for (const auto& name : space.names()) csv += "," + name;
    csv += ",pred_pass,pred_severity";
    for (std::size_t c = 0; c < corners.size(); ++c)
        csv += ",pass_x" + format_double(corners[c]) + ",severity_x" + format_double(corners[c]);
    csv += ",joint_pass,true_pass,true_severity\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        csv += std::to_string(i);
        for (double v : s.nominal) csv += "," + format_double(v);
        csv += "," + std::to_string(s.pred_pass ? 1 : 0) + "," + format_double(s.pred_severity);
        for (std::size_t c = 0; c < s.corner_pass.size(); ++c)
            csv += "," + std::to_string(s.corner_pass[c]) + "," + format_double(s.corner_severity[c]);
        csv += "," + std::to_string(s.joint_pass ? 1 : 0) + ",";
        csv += s.true_pass ? std::to_string(*s.true_pass ? 1 : 0) + "," + format_double(*s.true_severity) : "nan,nan";
        csv += "\n";
    }
    write_text_file(dir + "/samples.csv", csv);
}

}  // namespace sisurr
