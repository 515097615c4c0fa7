#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "sisurr/dataset.hpp"
#include "sisurr/error.hpp"
#include "sisurr/param_space.hpp"
#include "sisurr/presets.hpp"

using namespace sisurr;

namespace {

ParameterSpace unit_space(std::size_t d)
{
    std::vector<ParameterDef> p;
    for (std::size_t i = 0; i < d; ++i) p.push_back({"x" + std::to_string(i), 0.0, 1.0, "", ParamRole::pcb});
    return ParameterSpace(p, {});
}

void expect_stratified(const ParameterSpace& space, const std::vector<DesignVector>& s, std::size_t strata)
{
    const std::size_t n = s.size();
    for (std::size_t j = 0; j < space.dim(); ++j) {
        const auto& p = space.params()[j];
        std::vector<std::size_t> count(strata, 0);
        for (const auto& dv : s) {
            double u = (dv.values[j] - p.min) / (p.max - p.min);
            ASSERT_GE(u, 0.0);
            ASSERT_LE(u, 1.0);
            auto b = std::min(strata - 1, static_cast<std::size_t>(u * static_cast<double>(strata)));
            count[b]++;
        }
        for (auto c : count) EXPECT_EQ(c, n / strata) << "dimension " << p.name;
    }
}

}  // namespace

TEST(Lhs, FourByTwoOccupiesEachQuarterOnce)
{
    auto space = unit_space(2);
    auto s = lhs_sample(space, 4, 7);
    ASSERT_EQ(s.size(), 4u);
    expect_stratified(space, s, 4);
}

TEST(Lhs, SinglePointInsideBounds)
{
    auto space = preset_space("complex");
    auto s = lhs_sample(space, 1, 3);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_NO_THROW(space.check_within(s[0]));
}

TEST(Lhs, ThousandPointsFillTenBinsEvenly)
{
    auto space = preset_space("simple");
    auto s = lhs_sample(space, 1000, 11);
    expect_stratified(space, s, 10);
}

TEST(Lhs, StratificationHoldsForManyN)
{
    auto space = unit_space(3);
    for (std::size_t n : {1u, 2u, 3u, 7u, 16u, 101u}) expect_stratified(space, lhs_sample(space, n, n), n);
}

TEST(Lhs, SeedDeterminismAndVariation)
{
    auto space = unit_space(2);
    auto a = lhs_sample(space, 16, 5);
    auto b = lhs_sample(space, 16, 5);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values, b[i].values);
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        auto c = lhs_sample(space, 16, seed);
        auto d = lhs_sample(space, 16, seed + 100);
        bool differ = false;
        for (std::size_t i = 0; i < c.size(); ++i) differ |= c[i].values != d[i].values;
        EXPECT_TRUE(differ);
    }
}

TEST(Lhs, EmptySpaceRejected)
{
    ParameterSpace empty;
    try {
        lhs_sample(empty, 3, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_space);
    }
}

TEST(ParameterSpace, InvariantsEnforced)
{
    EXPECT_THROW(ParameterSpace({{"a", 1, 1, "", ParamRole::pcb}}, {}), Error);
    EXPECT_THROW(ParameterSpace({{"a", 0, 1, "", ParamRole::pcb}, {"a", 0, 2, "", ParamRole::pcb}}, {}), Error);
    EXPECT_THROW(ParameterSpace({{"a", 0, 1, "", ParamRole::pcb}}, {{"a", 0.5}}), Error);
}

TEST(ParameterSpace, ComplexPresetHas44Parameters)
{
    auto space = preset_space("complex");
    EXPECT_EQ(space.dim(), 44u);
    auto idx = space.index_of("f_clock");
    ASSERT_TRUE(idx);
    EXPECT_EQ(space.params()[*idx].min, 800);
    EXPECT_EQ(space.params()[*idx].max, 2400);
}

TEST(ParameterSpace, SaveLoadKeepsOrder)
{
    auto space = preset_space("buffered-simple");
    auto path = std::filesystem::temp_directory_path() / "sisurr_space_test.json";
    space.save(path.string());
    auto back = ParameterSpace::load(path.string());
    EXPECT_EQ(back.names(), space.names());
    EXPECT_EQ(back.hash(), space.hash());
    EXPECT_EQ(back.to_json(), space.to_json());
}

TEST(ParameterSpace, OutOfBoundsNamesParameter)
{
    auto space = preset_space("complex");
    auto m = space.to_map(lhs_sample(space, 1, 1)[0]);
    m["f_clock"] = 2500;
    try {
        space.check_within(space.from_map(m));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::out_of_bounds);
        EXPECT_NE(std::string(e.what()).find("f_clock"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("2400"), std::string::npos);
    }
}

TEST(Normalizer, MinmaxOverGeometryBounds)
{
    auto space = preset_space("simple");
    auto n = fit_normalizer(NormKind::minmax_inputs, space);
    auto h = *space.index_of("h");
    auto w = *space.index_of("w");
    EXPECT_DOUBLE_EQ(n.transform(0.1, h), 0.0);
    EXPECT_DOUBLE_EQ(n.transform(0.7, w), 1.0);
    EXPECT_DOUBLE_EQ(n.transform(space.params()[0].min, 0), 0.0);
}

TEST(Normalizer, StandardizeConstantColumnNamesFeature)
{
    Eigen::MatrixXd m(3, 2);
    m << 1, 5, 2, 5, 3, 5;
    try {
        fit_normalizer(NormKind::standardize, m, {"a", "flat"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate_feature);
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(Normalizer, StandardizeCenters)
{
    Eigen::MatrixXd m(3, 1);
    m << 1, 2, 3;
    auto n = fit_normalizer(NormKind::standardize, m);
    EXPECT_DOUBLE_EQ(n.offset()[0], 2.0);
    EXPECT_DOUBLE_EQ(n.scale()[0], std::sqrt(2.0 / 3.0));
    EXPECT_DOUBLE_EQ(n.transform(2.0), 0.0);
}

TEST(Normalizer, PerSampleEyeNormalization)
{
    auto eh = Normalizer::per_sample(NormKind::eh_by_vdd);
    EXPECT_DOUBLE_EQ(eh.transform(0.75, 0, NormContext{1.5, std::nullopt}), 0.5);
    auto ew = Normalizer::per_sample(NormKind::ew_by_ui);
    EXPECT_DOUBLE_EQ(ew.transform(625e-12, 0, NormContext{std::nullopt, 625e-12}), 1.0);
    try {
        eh.transform(0.75);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::missing_context);
    }
}

TEST(Normalizer, RoundTripRandomData)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(3.0, 7.0);
    Eigen::MatrixXd m(50, 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    for (auto kind : {NormKind::minmax_inputs, NormKind::standardize}) {
        auto n = fit_normalizer(kind, m);
        Eigen::MatrixXd back = n.inverse_transform(n.transform(m));
        for (Eigen::Index i = 0; i < m.size(); ++i)
            EXPECT_NEAR(back.data()[i], m.data()[i], 1e-12 * std::max(1.0, std::abs(m.data()[i])));
        auto copy = Normalizer::from_json(n.to_json());
        EXPECT_EQ(copy.transform(m), n.transform(m));
    }
    std::vector<NormContext> ctx(50);
    for (auto& c : ctx) c.vdd = std::abs(g(rng)) + 0.1;
    auto eh = Normalizer::per_sample(NormKind::eh_by_vdd);
    Eigen::MatrixXd back = eh.inverse_transform(eh.transform(m, ctx), ctx);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        EXPECT_NEAR(back.data()[i], m.data()[i], 1e-12 * std::max(1.0, std::abs(m.data()[i])));
}

TEST(Dataset, CarveValidationIsQuarterOfTrain)
{
    auto s = carve_train_val(1000, 400, 9);
    EXPECT_EQ(s.train.size(), 400u);
    EXPECT_EQ(s.val.size(), 100u);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    EXPECT_EQ(all.size(), 500u);
    EXPECT_THROW(carve_train_val(100, 90, 1), Error);
}

TEST(Dataset, SaveLoadRoundTrip)
{
    Dataset ds;
    ds.space = preset_space("simple");
    ds.seed = 4;
    ds.preset = "simple";
    auto pts = lhs_sample(ds.space, 5, 2);
    ds.resize(5);
    ds.X = ds.space.to_matrix(pts);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (Eigen::Index i = 0; i < 5; ++i) {
        ds.eye.row(i) << u(rng), u(rng);
        for (int k = 0; k < kContourWidth; ++k) ds.contour(i, k) = u(rng);
        for (int k = 0; k < kFeatureCount; ++k) ds.features(i, k) = u(rng) * 1e-9;
        ds.vdd[i] = 1.2;
        ds.ui[i] = 625e-12;
        ds.feature_present.row(i).setOnes();
    }
    ds.failed[3] = 1;
    ds.fail_reason[3] = "synthetic";
    auto dir = (std::filesystem::temp_directory_path() / "sisurr_ds_test").string();
    save_dataset(ds, dir);
    auto back = load_dataset(dir);
    EXPECT_EQ(back.X, ds.X);
    EXPECT_EQ(back.eye, ds.eye);
    EXPECT_EQ(back.contour, ds.contour);
    EXPECT_EQ(back.features, ds.features);
    EXPECT_EQ(back.failed, ds.failed);
    EXPECT_EQ(back.fail_reason[3], "synthetic");
    EXPECT_EQ(back.usable().rows(), 4u);
    std::string h1 = dataset_hash(dir);
    save_dataset(back, dir);
    EXPECT_EQ(dataset_hash(dir), h1);
}
