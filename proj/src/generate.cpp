#include <algorithm>
#include <cmath>
#include <map>

#include "sisurr/error.hpp"
#include "sisurr/pipeline.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

json GenerateOptions::to_json() const
{
    return {{"n", n},
            {"seed", seed},
            {"preset", preset},
            {"stimulus",
             {{"pattern", sisurr::to_string(stimulus.pattern)},
              {"n_bits", stimulus.n_bits},
              {"settle_bits", stimulus.settle_bits}}},
            {"sim",
             {{"dt", sim.dt}, {"oversample", sim.oversample}, {"duration_bits", sim.duration_bits}}},
            {"max_failure_fraction", max_failure_fraction}};
}

GenerateOptions GenerateOptions::from_json(const json& j)
{
    GenerateOptions o;
    o.n = j.value("n", o.n);
    o.seed = j.value("seed", o.seed);
    o.preset = j.value("preset", o.preset);
    o.workers = j.value("workers", o.workers);
    if (j.contains("stimulus")) {
        const auto& s = j.at("stimulus");
        if (s.contains("pattern")) o.stimulus.pattern = parse_pattern(s.at("pattern").get<std::string>());
        o.stimulus.n_bits = s.value("n_bits", o.stimulus.n_bits);
        o.stimulus.settle_bits = s.value("settle_bits", o.stimulus.settle_bits);
    }
    if (j.contains("sim")) {
        const auto& s = j.at("sim");
        o.sim.dt = s.value("dt", o.sim.dt);
        o.sim.oversample = s.value("oversample", o.sim.oversample);
        o.sim.duration_bits = s.value("duration_bits", o.sim.duration_bits);
    }
    o.max_failure_fraction = j.value("max_failure_fraction", o.max_failure_fraction);
    return o;
}

DesignOutcome simulate_design(const json& netlist_doc, const ParameterSpace& space, const DesignVector& dv,
                              const GenerateOptions& opts)
{
    const Netlist net = build_netlist(netlist_doc, dv, space);
    StimulusSpec stim = opts.stimulus;
    stim.seed = derive_seed(opts.seed, "stimulus");
    const SimResult res = simulate_transient(net, stim, opts.sim);
    DesignOutcome out;
    out.vdd = net.driver.vdd;
    out.ui = net.driver.ui();
    out.analysis = analyze_eye(res, out.vdd, stim.settle_bits);
    return out;
}

Dataset simulate_points(const ParameterSpace& space, const json& netlist_doc, const std::vector<DesignVector>& points,
                        const GenerateOptions& opts)
{
    opts.stimulus.validate();
    Dataset ds;
    ds.space = space;
    ds.seed = opts.seed;
    ds.preset = opts.preset;
    ds.sim_config = {{"netlist", netlist_doc}, {"generate", opts.to_json()}};
    ds.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].values.size() != space.dim())
            fail(ErrorCode::dimension_mismatch, "design vector " + std::to_string(i) + " has the wrong width");
        for (std::size_t j = 0; j < space.dim(); ++j)
            ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = points[i].values[j];
    }

    parallel_for(points.size(), opts.workers, [&](std::size_t i) {
        const auto r = static_cast<Eigen::Index>(i);
        try {
            const DesignOutcome o = simulate_design(netlist_doc, space, points[i], opts);
            const auto& a = o.analysis;
            ds.eye(r, 0) = a.metrics.eh_norm;
            ds.eye(r, 1) = a.metrics.ew_norm;
            const auto flat = a.contour.flat();
            for (int k = 0; k < kContourWidth; ++k) ds.contour(r, k) = flat[static_cast<std::size_t>(k)];
            const auto fv = a.features.values();
            const auto fp = a.features.present();
            for (int k = 0; k < kFeatureCount; ++k) {
                ds.features(r, k) = fp[static_cast<std::size_t>(k)] ? fv[static_cast<std::size_t>(k)] : std::nan("");
                ds.feature_present(r, k) = fp[static_cast<std::size_t>(k)] ? 1 : 0;
            }
            ds.vdd[r] = o.vdd;
            ds.ui[r] = o.ui;
            ds.closed[i] = a.contour.closed ? 1 : 0;
            ds.partial[i] = a.contour.partial ? 1 : 0;
        } catch (const std::exception& e) {
            ds.failed[i] = 1;
            ds.fail_reason[i] = e.what();
        }
    });

    const auto failures = static_cast<std::size_t>(std::count(ds.failed.begin(), ds.failed.end(), 1));
    if (!points.empty() && static_cast<double>(failures) > opts.max_failure_fraction * static_cast<double>(points.size())) {
        std::map<std::string, std::size_t> reasons;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (ds.failed[i]) ++reasons[ds.fail_reason[i]];
        std::string summary;
        for (const auto& [why, count] : reasons) summary += "\n  " + std::to_string(count) + " x " + why;
        fail(ErrorCode::insufficient_data, std::to_string(failures) + " of " + std::to_string(points.size()) +
                                               " simulations failed:" + summary);
    }
    return ds;
}

Dataset generate_dataset(const ParameterSpace& space, const json& netlist_doc, const GenerateOptions& opts)
{
    const auto points = lhs_sample(space, opts.n, derive_seed(opts.seed, "lhs"));
    Dataset ds = simulate_points(space, netlist_doc, points, opts);
    ds.sim_config["sampling"] = "lhs";
    return ds;
}

Dataset replay_dataset(const Dataset& recorded)
{
    const auto& sc = recorded.sim_config;
    if (!sc.contains("netlist") || !sc.contains("generate"))
        fail(ErrorCode::parse_error, "dataset manifest does not record a netlist and generation options");
    GenerateOptions opts = GenerateOptions::from_json(sc.at("generate"));
    if (sc.value("sampling", std::string()) == "lhs") return generate_dataset(recorded.space, sc.at("netlist"), opts);
    std::vector<DesignVector> points;
    for (std::size_t i = 0; i < recorded.rows(); ++i) points.push_back(recorded.space.row(recorded.X, static_cast<Eigen::Index>(i)));
    return simulate_points(recorded.space, sc.at("netlist"), points, opts);
}

}  // namespace sisurr
