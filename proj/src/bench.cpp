#include <filesystem>

#include "sisurr/error.hpp"
#include "sisurr/pipeline.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

BenchReport runtime_bench(const Surrogate& model, const BenchOptions& opts)
{
    if (opts.n_batch < 1 || opts.sim_samples < 1 || opts.splits < 1)
        fail(ErrorCode::invalid_argument, "bench needs n_batch, sim_samples and splits >= 1");
    if (opts.netlist.is_null()) fail(ErrorCode::invalid_argument, "bench needs a netlist document");
    BenchReport r;

    const auto sim_pts = lhs_sample(model.space, opts.sim_samples, derive_seed(opts.seed, "bench-sim"));
    GenerateOptions g = opts.sim;
    g.workers = 1;
    const double s0 = wall_seconds();
    for (const auto& p : sim_pts) (void)simulate_design(opts.netlist, model.space, p, g);
    const double sim_total = wall_seconds() - s0;
    r.sim_per_sample = sim_total / static_cast<double>(opts.sim_samples);

    const auto pts = lhs_sample(model.space, opts.n_batch, derive_seed(opts.seed, "bench-infer"));
    const Eigen::MatrixXd X = model.space.to_matrix(pts);
    (void)model.predict(Eigen::MatrixXd(X.topRows(std::min<Eigen::Index>(X.rows(), 64))));

    const double i0 = wall_seconds();
    const Eigen::MatrixXd P = model.predict(X);
    const double infer_total = wall_seconds() - i0;
    r.infer_per_sample = infer_total / static_cast<double>(opts.n_batch);
    r.speedup = r.sim_per_sample / r.infer_per_sample;

    const auto piece = static_cast<Eigen::Index>((opts.n_batch + static_cast<std::size_t>(opts.splits) - 1) /
                                                 static_cast<std::size_t>(opts.splits));
    const double p0 = wall_seconds();
    for (Eigen::Index start = 0; start < X.rows(); start += piece) {
        const auto len = std::min(piece, X.rows() - start);
        (void)model.predict(Eigen::MatrixXd(X.middleRows(start, len)));
    }
    const double split_total = wall_seconds() - p0;
    r.split_per_sample = split_total / static_cast<double>(opts.n_batch);
    r.split_ratio = r.split_per_sample / r.infer_per_sample;

    r.rows.push_back({"data generation", "transient simulation", opts.sim_samples, sim_total, r.sim_per_sample, 1.0});
    if (model.report.contains("train_seconds")) {
        const auto n = model.report.value("n_train", std::size_t{0});
        const double t = model.report.at("train_seconds").get<double>();
        r.rows.push_back({"training", std::string(to_string(model.family)), n, t, n ? t / static_cast<double>(n) : 0.0, 0.0});
    }
    r.rows.push_back({"inference", std::string(to_string(model.family)) + " batch", opts.n_batch, infer_total,
                      r.infer_per_sample, r.speedup});
    r.rows.push_back({"inference", std::string(to_string(model.family)) + " " + std::to_string(opts.splits) + " batches",
                      opts.n_batch, split_total, r.split_per_sample, r.sim_per_sample / r.split_per_sample});
    return r;
}

json BenchReport::to_json() const
{
    json rows_j = json::array();
    for (const auto& row : rows)
        rows_j.push_back({{"phase", row.phase},
                          {"method", row.method},
                          {"samples", row.samples},
                          {"runtime", row.runtime},
                          {"per_sample", row.per_sample},
                          {"speedup", row.speedup}});
    return {{"rows", rows_j},
            {"sim_per_sample", sim_per_sample},
            {"infer_per_sample", infer_per_sample},
            {"speedup", speedup},
            {"split_per_sample", split_per_sample},
            {"split_ratio", split_ratio}};
}

void BenchReport::write(const std::string& dir) const
{
    std::filesystem::create_directories(dir);
    std::string csv = "phase,method,samples,runtime_s,per_sample_s,speedup\n";
    for (const auto& row : rows)
        csv += row.phase + "," + row.method + "," + std::to_string(row.samples) + "," + format_double(row.runtime) + "," +
               format_double(row.per_sample) + "," + (row.speedup > 0 ? format_double(row.speedup) : "") + "\n";
    write_text_file(dir + "/bench.csv", csv);
    write_text_file(dir + "/bench.json", to_json().dump(2) + "\n");
}

}  // namespace sisurr
