#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "sisurr/error.hpp"
#include "sisurr/pipeline.hpp"
#include "sisurr/presets.hpp"
#include "sisurr/service.hpp"
#include "sisurr/util.hpp"

using namespace sisurr;
namespace fs = std::filesystem;

namespace {

json load_json_file(const std::string& path)
{
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::parse_error, path + ": " + e.what());
    }
}

/// Netlist document and simulation options of a dataset directory.
std::pair<json, GenerateOptions> sim_setup_from_dataset(const std::string& dir)
{
    const json manifest = load_json_file(dir + "/manifest.json");
    const auto& sc = manifest.at("sim_config");
    return {sc.at("netlist"), GenerateOptions::from_json(sc.at("generate"))};
}

std::vector<TargetBlock> parse_blocks(const std::vector<std::string>& names)
{
    std::vector<TargetBlock> out;
    for (const auto& n : names) out.push_back(parse_target_block(n));
    return out;
}

struct TrainFlags {
    int hpo_budget = 100;
    std::string hpo_method = "random";
    int ensemble_size = 25;
    std::string hyper = "{}";
    std::string hpo_space;
    std::size_t gpr_cap = 5000;
    int gpr_restarts = 5;

    void add(CLI::App* app)
    {
        app->add_option("--hpo-budget", hpo_budget, "Hyperparameter evaluations per model")->capture_default_str();
        app->add_option("--hpo-method", hpo_method, "random or gp-ei")->capture_default_str();
        app->add_option("--ensemble-size", ensemble_size, "Members of ENS-MLP")->capture_default_str();
        app->add_option("--hyper", hyper, "Fixed hyperparameters as a JSON object")->capture_default_str();
        app->add_option("--hpo-space", hpo_space, "JSON file of search spaces keyed by family")->check(CLI::ExistingFile);
        app->add_option("--gpr-cap", gpr_cap, "Largest exact GPR training set")->capture_default_str();
        app->add_option("--gpr-restarts", gpr_restarts, "NLML optimizer restarts")->capture_default_str();
    }

    TrainOptions options(std::uint64_t seed, int workers) const
    {
        TrainOptions o;
        o.seed = seed;
        o.workers = workers;
        o.hpo_budget = hpo_budget;
        o.hpo_method = hpo_method;
        o.ensemble_size = ensemble_size;
        o.hyper = json::parse(hyper);
        if (!hpo_space.empty()) o.hpo_space = load_json_file(hpo_space);
        o.gpr_cap = gpr_cap;
        o.gpr_restarts = gpr_restarts;
        return o;
    }
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Buffer-parameterized signal-integrity surrogate workbench"};
    app.set_config("--config", "", "TOML/INI file with option defaults");
    app.require_subcommand(1);

    int workers = 1;
    std::uint64_t seed = 1;
    app.add_option("--workers", workers, "Worker threads")->capture_default_str();
    app.add_option("--seed", seed, "Experiment seed")->capture_default_str();

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Sample a space with LHS and simulate every point");
    std::string preset = "buffered-simple", space_file, netlist_file, out_dir;
    std::size_t n = 1000;
    int n_bits = 256, oversample = 8;
    gen->add_option("--preset", preset, "simple, buffered-simple or complex")->capture_default_str();
    gen->add_option("--space", space_file, "Parameter space JSON (overrides the preset space)");
    gen->add_option("--netlist", netlist_file, "Netlist document JSON (defaults to the preset's)");
    gen->add_option("-n,--samples", n, "Number of designs")->capture_default_str();
    gen->add_option("--bits", n_bits, "PRBS bits per simulation")->capture_default_str();
    gen->add_option("--oversample", oversample, "Time steps per contour bin")->capture_default_str();
    gen->add_option("-o,--out", out_dir, "Output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Fit one model on a dataset (25% of it held out for validation)");
    std::string data_dir, family = "ENS-MLP", block = "eye", model_out, trace;
    TrainFlags tf;
    train->add_option("--data", data_dir, "Dataset directory")->required();
    train->add_option("--model", family, "Model family")->capture_default_str();
    train->add_option("--block", block, "eye, eh, ew, contour or features")->capture_default_str();
    train->add_option("--trace", trace, "Write the HPO trace CSV here");
    train->add_option("-o,--out", model_out, "Model artifact path")->required();
    tf.add(train);

    // curve
    auto* curve = app.add_subcommand("curve", "Learning curves over training-set sizes");
    std::string pool_dir, test_dir, over_cap = "skip", curve_out;
    std::vector<std::string> models{"GPR-ISO", "GPR-ANI", "MLP", "ENS-MLP"}, blocks{"eh"};
    std::vector<std::size_t> sizes{500, 2000, 8000, 20000};
    bool save_models = false;
    TrainFlags cf;
    curve->add_option("--pool", pool_dir, "Dataset with training/validation rows")->required();
    curve->add_option("--test", test_dir, "Held-out test dataset")->required();
    curve->add_option("--models", models, "Model families")->capture_default_str();
    curve->add_option("--sizes", sizes, "Training-set sizes")->capture_default_str();
    curve->add_option("--blocks", blocks, "Target blocks")->capture_default_str();
    curve->add_option("--gpr-over-cap", over_cap, "skip or subsample")->capture_default_str();
    curve->add_flag("--save-models", save_models, "Keep every trained model under <out>/models");
    curve->add_option("-o,--out", curve_out, "Output directory")->required();
    cf.add(curve);

    // explore
    auto* expl = app.add_subcommand("explore", "Mask-compliance exploration of a scenario");
    std::string model_path, scenario_file, explore_out, sim_data;
    long explore_n = -1, ground_truth = -1;
    expl->add_option("--model", model_path, "Contour model artifact")->required();
    expl->add_option("--scenario", scenario_file, "Scenario JSON")->required();
    expl->add_option("--data", sim_data, "Dataset whose simulation settings drive ground truth");
    expl->add_option("-n,--samples", explore_n, "Override the scenario's sample count");
    expl->add_option("--ground-truth", ground_truth, "Override the simulated subsample size");
    expl->add_option("-o,--out", explore_out, "Output directory")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "Per-sample simulation versus batch inference timing");
    std::string bench_model, bench_data, bench_out;
    BenchOptions bo;
    bench->add_option("--model", bench_model, "Model artifact")->required();
    bench->add_option("--data", bench_data, "Dataset whose simulation settings are timed")->required();
    bench->add_option("--batch", bo.n_batch, "Inference batch size")->capture_default_str();
    bench->add_option("--sim-samples", bo.sim_samples, "Simulations to time")->capture_default_str();
    bench->add_option("--splits", bo.splits, "Pieces for the batch-split check")->capture_default_str();
    bench->add_option("-o,--out", bench_out, "Output directory")->required();

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP explorer service");
    std::string models_dir;
    int port = 8080;
    std::size_t cap = 10000;
    serve->add_option("--models-dir", models_dir, "Directory of model artifacts")->required();
    serve->add_option("--port", port, "TCP port")->capture_default_str();
    serve->add_option("--cap", cap, "Largest explore grid")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const ParameterSpace space = space_file.empty() ? preset_space(preset) : ParameterSpace::load(space_file);
            const json doc = netlist_file.empty() ? preset_netlist(netlist_for_space(preset)) : load_json_file(netlist_file);
            GenerateOptions go;
            go.n = n;
            go.seed = seed;
            go.workers = workers;
            go.preset = space_file.empty() ? preset : space_file;
            go.stimulus.n_bits = n_bits;
            go.sim.oversample = oversample;
            const double t0 = wall_seconds();
            const Dataset ds = generate_dataset(space, doc, go);
            save_dataset(ds, out_dir);
            std::size_t failed = 0, closed = 0;
            for (std::size_t i = 0; i < ds.rows(); ++i) {
                failed += ds.failed[i];
                closed += ds.closed[i];
            }
            std::cout << "wrote " << ds.rows() << " rows to " << out_dir << " (" << closed << " closed, " << failed
                      << " failed) in " << format_double(wall_seconds() - t0) << " s\n";
        } else if (*train) {
            const Dataset ds = load_dataset(data_dir).usable();
            const auto n_train = static_cast<std::size_t>(static_cast<double>(ds.rows()) / 1.25);
            const auto split = carve_train_val(ds.rows(), n_train, derive_seed(seed, "split"));
            TrainOptions to = tf.options(seed, workers);
            to.trace_path = trace;
            const Surrogate s = train_surrogate(parse_model_family(family), ds.subset(split.train), ds.subset(split.val),
                                                parse_target_block(block), to);
            s.save(model_out);
            std::cout << s.report.dump(2) << "\n";
        } else if (*curve) {
            CurveOptions co;
            for (const auto& m : models) co.models.push_back(parse_model_family(m));
            co.sizes = sizes;
            co.blocks = parse_blocks(blocks);
            co.seed = seed;
            co.train = cf.options(seed, workers);
            co.gpr_over_cap = over_cap;
            if (save_models) co.model_dir = curve_out + "/models";
            const auto res = learning_curve(load_dataset(pool_dir), load_dataset(test_dir), co);
            res.write(curve_out);
            std::cout << read_text_file(curve_out + "/curve.csv");
        } else if (*expl) {
            const Surrogate m = Surrogate::load(model_path);
            Scenario sc = Scenario::load(scenario_file);
            if (explore_n >= 0) sc.n = static_cast<std::size_t>(explore_n);
            if (ground_truth >= 0) sc.ground_truth = static_cast<std::size_t>(ground_truth);
            ExploreOptions eo;
            eo.workers = workers;
            if (!sim_data.empty()) std::tie(eo.netlist, eo.sim) = sim_setup_from_dataset(sim_data);
            else if (sc.ground_truth > 0) fail(ErrorCode::invalid_argument, "ground truth needs --data");
            const auto r = explore(m, sc, eo);
            r.write(explore_out, m.space);
            std::cout << r.to_json().dump(2).substr(0, 2000) << "\n";
        } else if (*bench) {
            const Surrogate m = Surrogate::load(bench_model);
            std::tie(bo.netlist, bo.sim) = sim_setup_from_dataset(bench_data);
            bo.seed = seed;
            const auto r = runtime_bench(m, bo);
            r.write(bench_out);
            std::cout << read_text_file(bench_out + "/bench.csv");
        } else if (*serve) {
            const char* bind = std::getenv("SISURR_BIND");
            const std::string host = bind ? bind : "127.0.0.1";
            ServiceOptions so;
            so.explore_cap = cap;
            const auto svc = ExplorerService::from_directory(models_dir, so);
            std::cout << "serving " << svc.registry().size() << " models on " << host << ":" << port << std::endl;
            run_server(svc, host, port);
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
