#include <filesystem>
#include <set>
#include <string_view>

#include "sisurr/error.hpp"
#include "sisurr/pipeline.hpp"
#include "sisurr/util.hpp"

namespace sisurr {

namespace {

std::string matrix_hash(const Eigen::MatrixXd& m)
{
    return fnv1a_hex(std::string_view(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size())));
}

std::string rows_hash(const std::vector<std::size_t>& rows)
{
    return fnv1a_hex(std::string_view(reinterpret_cast<const char*>(rows.data()), sizeof(std::size_t) * rows.size()));
}

std::string content_hash(const Dataset& ds)
{
    return fnv1a_hex(matrix_hash(ds.X) + matrix_hash(ds.eye) + matrix_hash(ds.contour) + ds.space.hash());
}

void check_disjoint(const Dataset& pool, const Dataset& test)
{
    auto key = [](const Eigen::MatrixXd& X, Eigen::Index i) {
        Eigen::RowVectorXd r = X.row(i);
        return std::string(reinterpret_cast<const char*>(r.data()), sizeof(double) * static_cast<std::size_t>(r.size()));
    };
    std::set<std::string> seen;
    for (Eigen::Index i = 0; i < pool.X.rows(); ++i) seen.insert(key(pool.X, i));
    for (Eigen::Index i = 0; i < test.X.rows(); ++i)
        if (seen.count(key(test.X, i)))
            fail(ErrorCode::invalid_argument, "test row " + std::to_string(i) + " also appears in the training pool");
}

/// Test rows usable for a block; feature rows need every feature present.
std::vector<std::size_t> test_rows(const Dataset& test, TargetBlock block)
{
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        if (block == TargetBlock::features && (test.feature_present.row(static_cast<Eigen::Index>(i)).array() == 0).any()) continue;
        rows.push_back(i);
    }
    return rows;
}

}  // namespace

json CurveOptions::to_json() const
{
    json models_j = json::array();
    for (auto m : models) models_j.push_back(to_string(m));
    json blocks_j = json::array();
    for (auto b : blocks) blocks_j.push_back(to_string(b));
    json j = {{"models", models_j},
              {"sizes", sizes},
              {"blocks", blocks_j},
              {"seed", seed},
              {"gpr_over_cap", gpr_over_cap},
              {"hpo_budget", train.hpo_budget},
              {"hpo_method", train.hpo_method},
              {"hpo_init", train.hpo_init},
              {"hyper", train.hyper},
              {"ensemble_size", train.ensemble_size},
              {"gpr_cap", train.gpr_cap},
              {"gpr_restarts", train.gpr_restarts},
              {"gpr_max_iters", train.gpr_max_iters},
              {"gpr_hyper_subset", train.gpr_hyper_subset}};
    if (!train.hpo_space.is_null()) j["hpo_space"] = train.hpo_space;
    if (train.gpr_shared_kernel) j["gpr_shared_kernel"] = *train.gpr_shared_kernel;
    return j;
}

CurveOptions CurveOptions::from_json(const json& j)
{
    CurveOptions o;
    try {
        o.models.clear();
        for (const auto& m : j.at("models")) o.models.push_back(parse_model_family(m.get<std::string>()));
        o.sizes = j.at("sizes").get<std::vector<std::size_t>>();
        o.blocks.clear();
        for (const auto& b : j.at("blocks")) o.blocks.push_back(parse_target_block(b.get<std::string>()));
        o.seed = j.at("seed").get<std::uint64_t>();
        o.gpr_over_cap = j.value("gpr_over_cap", o.gpr_over_cap);
        auto& t = o.train;
        t.hpo_budget = j.value("hpo_budget", t.hpo_budget);
        t.hpo_method = j.value("hpo_method", t.hpo_method);
        t.hpo_init = j.value("hpo_init", t.hpo_init);
        t.hyper = j.value("hyper", t.hyper);
        t.hpo_space = j.value("hpo_space", t.hpo_space);
        t.ensemble_size = j.value("ensemble_size", t.ensemble_size);
        t.gpr_cap = j.value("gpr_cap", t.gpr_cap);
        t.gpr_restarts = j.value("gpr_restarts", t.gpr_restarts);
        t.gpr_max_iters = j.value("gpr_max_iters", t.gpr_max_iters);
        t.gpr_hyper_subset = j.value("gpr_hyper_subset", t.gpr_hyper_subset);
        if (j.contains("gpr_shared_kernel")) t.gpr_shared_kernel = j.at("gpr_shared_kernel").get<bool>();
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("curve options: ") + e.what());
    }
    return o;
}

CurveResult learning_curve(const Dataset& pool_in, const Dataset& test_in, const CurveOptions& opts)
{
    if (opts.gpr_over_cap != "skip" && opts.gpr_over_cap != "subsample")
        fail(ErrorCode::invalid_argument, "gpr_over_cap must be skip or subsample");
    const Dataset pool = pool_in.usable();
    const Dataset test = test_in.usable();
    if (pool.space.hash() != test.space.hash()) fail(ErrorCode::invalid_argument, "pool and test use different spaces");
    if (test.rows() == 0) fail(ErrorCode::insufficient_data, "empty test split");
    check_disjoint(pool, test);
    if (!opts.model_dir.empty()) std::filesystem::create_directories(opts.model_dir);

    CurveResult out;
    out.manifest = {{"options", opts.to_json()},
                    {"pool_hash", content_hash(pool)},
                    {"test_hash", content_hash(test)},
                    {"pool_rows", pool.rows()},
                    {"test_rows", test.rows()},
                    {"space_hash", pool.space.hash()}};
    json splits = json::object();

    for (std::size_t size : opts.sizes) {
        const auto split = carve_train_val(pool.rows(), size, derive_seed(opts.seed, "split:" + std::to_string(size)));
        splits[std::to_string(size)] = {{"train_rows_hash", rows_hash(split.train)}, {"val_rows_hash", rows_hash(split.val)}};
        const Dataset train = pool.subset(split.train);
        const Dataset val = pool.subset(split.val);
        for (TargetBlock block : opts.blocks) {
            const auto rows = test_rows(test, block);
            const Dataset tb = test.subset(rows);
            const Eigen::MatrixXd truth = tb.target(block);
            for (ModelFamily family : opts.models) {
                MetricReport cell;
                const std::string name(to_string(family));
                const bool gpr = family == ModelFamily::gpr_iso || family == ModelFamily::gpr_ani;
                TrainOptions to = opts.train;
                to.seed = derive_seed(opts.seed, "cell:" + name + ":" + std::string(to_string(block)) + ":" + std::to_string(size));
                if (gpr && size > to.gpr_cap) {
                    if (opts.gpr_over_cap == "skip") {
                        cell.model = name;
                        cell.block = std::string(to_string(block));
                        cell.train_size = size;
                        cell.seed = opts.seed;
                        cell.skipped = true;
                        cell.skip_reason = "exact GPR limited to " + std::to_string(to.gpr_cap) + " training rows";
                        out.cells.push_back(cell);
                        continue;
                    }
                    to.gpr_subsample_over_cap = true;
                }
                const double t0 = wall_seconds();
                const Surrogate s = train_surrogate(family, train, val, block, to);
                const double t1 = wall_seconds();
                const Eigen::MatrixXd pred = s.predict(tb.X);
                const double t2 = wall_seconds();
                cell = evaluate_predictions(truth, pred, s.output_names(), block == TargetBlock::contour);
                cell.model = name;
                cell.block = std::string(to_string(block));
                cell.train_size = size;
                cell.seed = opts.seed;
                cell.train_seconds = t1 - t0;
                cell.predict_seconds = t2 - t1;
                cell.model_report = s.report;
                if (!opts.model_dir.empty())
                    s.save(opts.model_dir + "/" + name + "_" + std::string(to_string(block)) + "_" + std::to_string(size) + ".json");
                out.cells.push_back(cell);
            }
        }
    }
    out.manifest["splits"] = splits;
    return out;
}

void CurveResult::write(const std::string& dir) const
{
    std::filesystem::create_directories(dir);
    std::string csv = "model,block,train_size,seed,rmse,r2_mean,nrmse_mean,nrmse_median,train_seconds,predict_seconds,skipped\n";
    for (const auto& c : cells) {
        csv += c.model + "," + c.block + "," + std::to_string(c.train_size) + "," + std::to_string(c.seed) + ",";
        if (c.skipped) {
            csv += ",,,,,,1\n";
            continue;
        }
        csv += format_double(c.rmse_overall) + "," + format_double(c.r2_mean) + "," +
               (c.nrmse_mean ? format_double(*c.nrmse_mean) : "") + "," +
               (c.nrmse_median ? format_double(*c.nrmse_median) : "") + "," + format_double(c.train_seconds) + "," +
               format_double(c.predict_seconds) + ",0\n";
    }
    write_text_file(dir + "/curve.csv", csv);
    json j = manifest;
    j["cells"] = json::array();
    for (const auto& c : cells) j["cells"].push_back(c.to_json());
    write_text_file(dir + "/curve.json", j.dump(2) + "\n");
}

}  // namespace sisurr
