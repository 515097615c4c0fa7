#include "sisurr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "sisurr/error.hpp"

namespace sisurr {

namespace fs = std::filesystem;

std::string_view to_string(Split split)
{
    switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view text)
{
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    fail(ErrorCode::parse_error, "unknown split '" + std::string(text) + "'");
}

const std::vector<std::string>& eye_target_names()
{
    static const std::vector<std::string> names{"eh_norm", "ew_norm"};
    return names;
}

const std::vector<std::string>& contour_target_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (int b = 0; b < kContourBins; ++b) out.push_back("upper_" + std::to_string(b));
        for (int b = 0; b < kContourBins; ++b) out.push_back("lower_" + std::to_string(b));
        return out;
    }();
    return names;
}

const std::vector<std::string>& feature_target_names()
{
    static const std::vector<std::string> names{"energy", "entropy", "v_max", "v_min",
                                                "rise_time", "overshoot", "prop_delay"};
    return names;
}

std::string_view to_string(TargetBlock block)
{
    switch (block) {
    case TargetBlock::eye: return "eye";
    case TargetBlock::eh: return "eh";
    case TargetBlock::ew: return "ew";
    case TargetBlock::contour: return "contour";
    case TargetBlock::features: return "features";
    }
    return "eye";
}

TargetBlock parse_target_block(std::string_view text)
{
    for (auto b : {TargetBlock::eye, TargetBlock::eh, TargetBlock::ew, TargetBlock::contour, TargetBlock::features})
        if (to_string(b) == text) return b;
    fail(ErrorCode::parse_error, "unknown target block '" + std::string(text) + "'");
}

void Dataset::resize(std::size_t n)
{
    const auto rows = static_cast<Eigen::Index>(n);
    X.resize(rows, static_cast<Eigen::Index>(space.dim()));
    eye.setConstant(rows, 2, std::nan(""));
    contour.setConstant(rows, kContourWidth, std::nan(""));
    features.setConstant(rows, kFeatureCount, std::nan(""));
    vdd.setConstant(rows, std::nan(""));
    ui.setConstant(rows, std::nan(""));
    closed.assign(n, 0);
    partial.assign(n, 0);
    failed.assign(n, 0);
    fail_reason.assign(n, {});
    feature_present.setZero(rows, kFeatureCount);
}

void Dataset::check_consistent() const
{
    const auto n = X.rows();
    auto bad = [&](const char* what) { fail(ErrorCode::dimension_mismatch, std::string("dataset block ") + what); };
    if (X.cols() != static_cast<Eigen::Index>(space.dim())) bad("X width");
    if (eye.rows() != n || eye.cols() != 2) bad("eye");
    if (contour.rows() != n || contour.cols() != kContourWidth) bad("contour");
    if (features.rows() != n || features.cols() != kFeatureCount) bad("features");
    if (vdd.size() != n || ui.size() != n) bad("aux");
    const auto un = static_cast<std::size_t>(n);
    if (closed.size() != un || partial.size() != un || failed.size() != un || fail_reason.size() != un) bad("flags");
    if (feature_present.rows() != n || feature_present.cols() != kFeatureCount) bad("feature mask");
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const
{
    Dataset out;
    out.space = space;
    out.split = split;
    out.seed = seed;
    out.preset = preset;
    out.sim_config = sim_config;
    out.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(idx[k]);
        if (idx[k] >= rows()) fail(ErrorCode::invalid_argument, "subset row out of range");
        const auto r = static_cast<Eigen::Index>(k);
        out.X.row(r) = X.row(i);
        out.eye.row(r) = eye.row(i);
        out.contour.row(r) = contour.row(i);
        out.features.row(r) = features.row(i);
        out.vdd[r] = vdd[i];
        out.ui[r] = ui[i];
        out.closed[k] = closed[idx[k]];
        out.partial[k] = partial[idx[k]];
        out.failed[k] = failed[idx[k]];
        out.fail_reason[k] = fail_reason[idx[k]];
        out.feature_present.row(r) = feature_present.row(i);
    }
    return out;
}

Dataset Dataset::usable() const
{
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < rows(); ++i)
        if (!failed[i]) keep.push_back(i);
    return subset(keep);
}

Eigen::MatrixXd Dataset::target(TargetBlock block) const
{
    switch (block) {
    case TargetBlock::eye: return eye;
    case TargetBlock::eh: return eye.col(0);
    case TargetBlock::ew: return eye.col(1);
    case TargetBlock::contour: return contour;
    case TargetBlock::features: return features;
    }
    return eye;
}

namespace {

const char* kDataFiles[] = {"X.csv", "targets_eye.csv", "targets_contour.csv", "targets_features.csv", "aux.csv"};

std::vector<std::string> aux_header()
{
    std::vector<std::string> h{"vdd", "ui", "closed", "partial", "failed"};
    for (const auto& f : feature_target_names()) h.push_back("present_" + f);
    return h;
}

}  // namespace

json save_dataset(const Dataset& ds, const std::string& dir)
{
    ds.check_consistent();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::io_error, "cannot create " + dir + ": " + ec.message());

    write_csv(dir + "/X.csv", ds.space.names(), ds.X);
    write_csv(dir + "/targets_eye.csv", eye_target_names(), ds.eye);
    write_csv(dir + "/targets_contour.csv", contour_target_names(), ds.contour);
    write_csv(dir + "/targets_features.csv", feature_target_names(), ds.features);

    const auto n = static_cast<Eigen::Index>(ds.rows());
    Eigen::MatrixXd aux(n, 5 + kFeatureCount);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        aux(i, 0) = ds.vdd[i];
        aux(i, 1) = ds.ui[i];
        aux(i, 2) = ds.closed[u];
        aux(i, 3) = ds.partial[u];
        aux(i, 4) = ds.failed[u];
        for (int f = 0; f < kFeatureCount; ++f) aux(i, 5 + f) = ds.feature_present(i, f);
    }
    write_csv(dir + "/aux.csv", aux_header(), aux);

    json failures = json::object();
    for (std::size_t i = 0; i < ds.rows(); ++i)
        if (ds.failed[i]) failures[std::to_string(i)] = ds.fail_reason[i];

    json files = json::object();
    for (const char* f : kDataFiles) files[f] = fnv1a_hex(read_text_file(dir + "/" + f));

    json manifest{{"format", "sisurr-dataset-1"},
                  {"space", ds.space.to_json()},
                  {"space_hash", ds.space.hash()},
                  {"split", std::string(to_string(ds.split))},
                  {"seed", ds.seed},
                  {"preset", ds.preset},
                  {"sim_config", ds.sim_config},
                  {"sim_config_hash", fnv1a_hex(ds.sim_config.dump())},
                  {"rows", ds.rows()},
                  {"failures", failures},
                  {"files", files}};
    write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

Dataset load_dataset(const std::string& dir)
{
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir + "/manifest.json"));
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, dir + "/manifest.json: " + e.what());
    }
    Dataset ds;
    ds.space = ParameterSpace::from_json(manifest.at("space"));
    ds.split = parse_split(manifest.at("split").get<std::string>());
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.preset = manifest.value("preset", std::string());
    ds.sim_config = manifest.value("sim_config", json::object());
    const auto n = manifest.at("rows").get<std::size_t>();
    ds.resize(n);

    auto load_block = [&](const std::string& file, Eigen::MatrixXd& dst, const std::vector<std::string>& names) {
        CsvTable t = read_csv(dir + "/" + file);
        if (t.header != names) fail(ErrorCode::parse_error, file + " header does not match expected columns");
        if (static_cast<std::size_t>(t.values.rows()) != n)
            fail(ErrorCode::dimension_mismatch, file + " row count differs from manifest");
        dst = std::move(t.values);
    };
    load_block("X.csv", ds.X, ds.space.names());
    load_block("targets_eye.csv", ds.eye, eye_target_names());
    load_block("targets_contour.csv", ds.contour, contour_target_names());
    load_block("targets_features.csv", ds.features, feature_target_names());
    Eigen::MatrixXd aux;
    load_block("aux.csv", aux, aux_header());
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        ds.vdd[r] = aux(r, 0);
        ds.ui[r] = aux(r, 1);
        ds.closed[i] = aux(r, 2) != 0;
        ds.partial[i] = aux(r, 3) != 0;
        ds.failed[i] = aux(r, 4) != 0;
        for (int f = 0; f < kFeatureCount; ++f) ds.feature_present(r, f) = aux(r, 5 + f) != 0;
    }
    if (manifest.contains("failures"))
        for (const auto& [k, v] : manifest.at("failures").items()) ds.fail_reason.at(std::stoul(k)) = v.get<std::string>();
    return ds;
}

std::string dataset_hash(const std::string& dir)
{
    std::string all;
    for (const char* f : kDataFiles) all += fnv1a_hex(read_text_file(dir + "/" + f));
    all += fnv1a_hex(json::parse(read_text_file(dir + "/manifest.json")).at("space").dump());
    return fnv1a_hex(all);
}

TrainValSplit carve_train_val(std::size_t pool_rows, std::size_t n_train, std::uint64_t seed)
{
    const std::size_t n_val = static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(n_train)));
    if (n_train == 0) fail(ErrorCode::insufficient_data, "training size must be positive");
    if (n_train + n_val > pool_rows)
        fail(ErrorCode::insufficient_data, "need " + std::to_string(n_train + n_val) + " rows for train+val, pool has " +
                                               std::to_string(pool_rows));
    std::vector<std::size_t> perm(pool_rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    TrainValSplit s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                 perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    return s;
}

}  // namespace sisurr
