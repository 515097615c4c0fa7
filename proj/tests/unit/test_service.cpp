#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <thread>

#include "sisurr/error.hpp"
#include "sisurr/pipeline.hpp"
#include "sisurr/presets.hpp"
#include "sisurr/service.hpp"

// after Eigen: <resolv.h> defines a _res macro
#include <httplib.h>

using namespace sisurr;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    Surrogate contour;
    Surrogate eye;
    ExplorerService service;
    double sim_seconds = 0;
};

const Fixture& fixture()
{
    static const Fixture f = [] {
        Fixture x;
        const auto space = preset_space("buffered-simple");
        GenerateOptions g;
        g.n = 60;
        g.seed = 41;
        g.stimulus.n_bits = 128;
        const double t0 = wall_seconds();
        const auto train = generate_dataset(space, preset_netlist("simple"), g);
        x.sim_seconds = (wall_seconds() - t0) / 60.0;
        TrainOptions o;
        o.hpo_budget = 0;
        o.hyper = {{"max_depth", 5}};
        x.contour = train_surrogate(ModelFamily::cart, train, train.subset({0, 1, 2, 3}), TargetBlock::contour, o);
        x.eye = train_surrogate(ModelFamily::cart, train, train.subset({0, 1, 2, 3}), TargetBlock::eye, o);
        x.service = ExplorerService({{"contour", x.contour}, {"eye", x.eye}});
        return x;
    }();
    return f;
}

json nominal_design(const ParameterSpace& space)
{
    json d = json::object();
    for (const auto& p : space.params()) d[p.name] = 0.5 * (p.min + p.max);
    d["f_clock"] = 800.0;  // DDR3-1600 mask UI
    return d;
}

/// Checks `required`, `type`, `enum`, `properties`, `items` and local `$ref`s.
void validate(const json& v, const json& schema, const json& root, const std::string& where)
{
    if (schema.contains("$ref")) {
        const auto ref = schema.at("$ref").get<std::string>();
        ASSERT_EQ(ref.rfind("#/$defs/", 0), 0u) << ref;
        return validate(v, root.at("$defs").at(ref.substr(8)), root, where);
    }
    if (schema.contains("type")) {
        const auto t = schema.at("type").get<std::string>();
        const bool ok = (t == "object" && v.is_object()) || (t == "array" && v.is_array()) ||
                        (t == "string" && v.is_string()) || (t == "boolean" && v.is_boolean()) ||
                        (t == "number" && v.is_number()) || (t == "integer" && v.is_number_integer());
        ASSERT_TRUE(ok) << where << " expected " << t << ", got " << v.dump().substr(0, 80);
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& e : schema.at("enum")) found |= e == v;
        EXPECT_TRUE(found) << where;
    }
    if (schema.contains("required"))
        for (const auto& k : schema.at("required")) EXPECT_TRUE(v.contains(k.get<std::string>())) << where << "." << k;
    if (schema.contains("properties") && v.is_object())
        for (const auto& [k, sub] : schema.at("properties").items())
            if (v.contains(k)) validate(v.at(k), sub, root, where + "." + k);
    if (schema.contains("items") && v.is_array())
        for (std::size_t i = 0; i < v.size(); ++i) validate(v[i], schema.at("items"), root, where + "[" + std::to_string(i) + "]");
}

void expect_schema(const json& v, const std::string& def)
{
    static const json root = json::parse(read_text_file(std::string(SISURR_SOURCE_DIR) + "/schema/explorer-v1.schema.json"));
    validate(v, root.at("$defs").at(def), root, def);
}

}  // namespace

TEST(Service, HealthModelsAndEmptyRegistry)
{
    const auto& f = fixture();
    auto r = f.service.handle("GET", "/v1/health", "");
    EXPECT_EQ(r.status, 200);
    expect_schema(r.body, "health_response");
    EXPECT_EQ(r.body.at("models"), 2);
    r = f.service.handle("GET", "/v1/models", "");
    expect_schema(r.body, "models_response");
    EXPECT_EQ(r.body.at("models").size(), 2u);

    const ExplorerService empty;
    for (const char* path : {"/v1/health", "/v1/models", "/v1/spaces"}) EXPECT_EQ(empty.handle("GET", path, "").status, 200);
    EXPECT_TRUE(empty.handle("GET", "/v1/models", "").body.at("models").empty());
    EXPECT_TRUE(empty.handle("GET", "/v1/spaces", "").body.at("spaces").empty());
}

TEST(Service, MasksListTableValues)
{
    const auto r = fixture().service.handle("GET", "/v1/masks", "");
    expect_schema(r.body, "masks_response");
    bool found = false;
    for (const auto& m : r.body.at("masks"))
        if (m.at("name") == "DDR3-1600") {
            found = true;
            EXPECT_EQ(m.at("ui_ps"), 625.0);
            EXPECT_EQ(m.at("v_ref"), 0.75);
            EXPECT_EQ(m.at("t0_ps"), 174.0);
            EXPECT_EQ(m.at("t1_ps"), 469.0);
            EXPECT_EQ(m.at("v0"), 0.55);
            EXPECT_EQ(m.at("v1"), 0.95);
        }
    EXPECT_TRUE(found);
}

TEST(Service, SpacesRoundTripThroughTheSpaceParser)
{
    const auto& f = fixture();
    const auto r = f.service.handle("GET", "/v1/spaces", "");
    expect_schema(r.body, "spaces_response");
    for (const auto& s : r.body.at("spaces")) {
        const auto parsed = ParameterSpace::from_json(s.at("space"));
        EXPECT_EQ(parsed.to_json(), s.at("space"));
        EXPECT_EQ(parsed.hash(), s.at("space_hash").get<std::string>());
    }
}

TEST(Service, PredictIsPassThrough)
{
    const auto& f = fixture();
    const json design = nominal_design(f.contour.space);
    const json req = {{"model", "contour"}, {"design", design}, {"mask", "DDR3-1600"}};
    const auto r = f.service.handle("POST", "/v1/predict", req.dump());
    ASSERT_EQ(r.status, 200) << r.body.dump();
    expect_schema(r.body, "predict_response");
    const auto& res = r.body.at("results").at(0);

    std::map<std::string, double> values = f.contour.space.fixed();
    for (const auto& [k, v] : design.items()) values[k] = v.get<double>();
    const Eigen::MatrixXd P = f.contour.predict({f.contour.space.from_map(values)});
    const auto contour = res.at("contour").get<std::vector<double>>();
    ASSERT_EQ(contour.size(), 100u);
    for (int k = 0; k < 100; ++k) EXPECT_EQ(contour[static_cast<std::size_t>(k)], P(0, k));

    const double vdd = values.at("vdd"), ui = 0.5e-6 / values.at("f_clock");
    Eigen::RowVectorXd row = P.row(0);
    const auto m = eye_metrics(EyeContour::from_flat(row.data(), ui, 0.5 * vdd), vdd, ui);
    EXPECT_EQ(res.at("eh_norm").get<double>(), m.eh_norm);
    EXPECT_EQ(res.at("ew_norm").get<double>(), m.ew_norm);
    const auto& mk = ddr_mask("DDR3-1600");
    const auto c = check_mask(EyeContour::from_flat(row.data(), ui, mk.v_ref), mk, vdd);
    EXPECT_EQ(res.at("pass").get<bool>(), c.pass);
    EXPECT_EQ(res.at("severity").get<double>(), c.severity);

    const json batch = {{"model", "contour"}, {"designs", json::array({design})}, {"mask", "DDR3-1600"}};
    EXPECT_EQ(f.service.handle("POST", "/v1/predict", batch.dump()).body, r.body);
    EXPECT_EQ(f.service.handle("POST", "/v1/predict", req.dump()).body, r.body);

    const auto e = f.service.handle("POST", "/v1/predict", json({{"model", "eye"}, {"design", design}}).dump());
    ASSERT_EQ(e.status, 200);
    const Eigen::MatrixXd Pe = f.eye.predict({f.eye.space.from_map(values)});
    EXPECT_EQ(e.body.at("results").at(0).at("eh_norm").get<double>(), Pe(0, 0));
}

TEST(Service, FloatsSurviveSerializationBitForBit)
{
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::uint64_t> bits;
    int checked = 0;
    while (checked < 20000) {
        double x;
        const std::uint64_t b = bits(rng);
        std::memcpy(&x, &b, sizeof x);
        if (!std::isfinite(x)) continue;
        const double y = json::parse(json(x).dump()).get<double>();
        ASSERT_EQ(std::memcmp(&x, &y, sizeof x), 0) << json(x).dump();
        ++checked;
    }
    for (double x : {0.1, 1.0 / 3.0, 5e-324, 2.2250738585072014e-308, 1.7976931348623157e308, -0.0})
        EXPECT_EQ(json::parse(json(x).dump()).get<double>(), x);
}

TEST(Service, OutOfBoundsClockNamesParameterAndBounds)
{
    const auto& f = fixture();
    json design = nominal_design(f.contour.space);
    design["f_clock"] = 2500;
    const auto r = f.service.handle("POST", "/v1/predict", json({{"model", "contour"}, {"design", design}}).dump());
    EXPECT_EQ(r.status, 422);
    expect_schema(r.body, "error");
    const auto& err = r.body.at("error");
    EXPECT_EQ(err.at("code"), "out_of_bounds");
    EXPECT_EQ(err.at("parameter"), "f_clock");
    EXPECT_EQ(err.at("min"), 800.0);
    EXPECT_EQ(err.at("max"), 2400.0);
    EXPECT_NE(err.at("message").get<std::string>().find("2400"), std::string::npos);
}

TEST(Service, MalformedRequestsMapToStatusCodes)
{
    const auto& s = fixture().service;
    EXPECT_EQ(s.handle("GET", "/v2/health", "").status, 404);
    EXPECT_EQ(s.handle("GET", "/v1/predict", "").status, 405);
    EXPECT_EQ(s.handle("POST", "/v1/predict", "{not json").status, 400);
    EXPECT_EQ(s.handle("POST", "/v1/predict", R"({"model":"none","design":{}})").status, 400);
    json partial = nominal_design(fixture().contour.space);
    partial.erase("h");
    const auto r = s.handle("POST", "/v1/predict", json({{"model", "contour"}, {"design", partial}}).dump());
    EXPECT_EQ(r.status, 422);
    EXPECT_NE(r.body.at("error").at("message").get<std::string>().find("h"), std::string::npos);
}

TEST(Service, OneByOneGridMatchesPredictAndMask)
{
    const auto& f = fixture();
    json fixed = nominal_design(f.contour.space);
    const double l = fixed.at("l").get<double>();
    fixed.erase("l");
    const json req = {{"model", "contour"},
                      {"mask", "DDR3-1600"},
                      {"fixed", fixed},
                      {"axes", json::array({{{"name", "l"}, {"min", l}, {"max", l}, {"steps", 1}}})}};
    const auto r = f.service.handle("POST", "/v1/explore", req.dump());
    ASSERT_EQ(r.status, 200) << r.body.dump();
    expect_schema(r.body, "explore_response");
    ASSERT_EQ(r.body.at("points").size(), 1u);
    const auto single = f.service.predict({{"model", "contour"}, {"design", nominal_design(f.contour.space)}, {"mask", "DDR3-1600"}});
    const auto& p = r.body.at("points").at(0);
    const auto& q = single.at("results").at(0);
    for (const char* k : {"pass", "severity", "eh_norm", "ew_norm"}) EXPECT_EQ(p.at(k), q.at(k)) << k;
}

TEST(Service, SweepAtFixedValueIsConstant)
{
    const auto& f = fixture();
    json fixed = nominal_design(f.contour.space);
    const double h = fixed.at("h").get<double>();
    fixed.erase("h");
    const json req = {{"model", "contour"},
                      {"mask", "DDR3-1600"},
                      {"fixed", fixed},
                      {"axes", json::array({{{"name", "h"}, {"min", h}, {"max", h}, {"steps", 25}}})}};
    const auto r = f.service.handle("POST", "/v1/explore", req.dump());
    ASSERT_EQ(r.status, 200);
    const auto& pts = r.body.at("points");
    ASSERT_EQ(pts.size(), 25u);
    for (const auto& p : pts) {
        EXPECT_EQ(p.at("severity"), pts[0].at("severity"));
        EXPECT_EQ(p.at("pass"), pts[0].at("pass"));
    }
}

TEST(Service, GridCapAndSpeed)
{
    const auto& f = fixture();
    json fixed = nominal_design(f.contour.space);
    fixed.erase("h");
    fixed.erase("l");
    json axes = json::array({{{"name", "h"}, {"min", 0.1}, {"max", 0.5}, {"steps", 100}},
                             {{"name", "l"}, {"min", 10}, {"max", 100}, {"steps", 101}}});
    json req = {{"model", "contour"}, {"mask", "DDR3-1600"}, {"fixed", fixed}, {"axes", axes}};
    auto r = f.service.handle("POST", "/v1/explore", req.dump());
    EXPECT_EQ(r.status, 413);
    EXPECT_EQ(r.body.at("error").at("code"), "too_large_request");
    EXPECT_EQ(r.body.at("error").at("cap"), 10000);

    req["axes"][1]["steps"] = 100;
    r = f.service.handle("POST", "/v1/explore", req.dump());
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body.at("points").size(), 10000u);
    const double wall = r.body.at("wallclock_seconds").get<double>();
    EXPECT_LT(wall, 100.0 * f.sim_seconds) << "grid " << wall << " s, one simulation " << f.sim_seconds << " s";

    req["axes"][1]["min"] = 5;
    r = f.service.handle("POST", "/v1/explore", req.dump());
    EXPECT_EQ(r.status, 422);
    EXPECT_EQ(r.body.at("error").at("parameter"), "l");
}

TEST(Service, RegistryRejectsModelWithForeignManifest)
{
    auto m = fixture().eye;
    m.train_manifest_hash = "deadbeef";
    EXPECT_THROW(ExplorerService({{"bad", m}}), Error);
}

TEST(Service, LoadsDirectoryAndServesOverHttp)
{
    const auto& f = fixture();
    const auto dir = fs::temp_directory_path() / "sisurr_service_models";
    fs::remove_all(dir);
    fs::create_directories(dir / "masks");
    f.contour.save((dir / "contour.json").string());
    EyeMask custom = ddr_mask("DDR3-1600");
    custom.name = "tight";
    custom.v1 = 1.0;
    write_text_file((dir / "masks" / "tight.json").string(), custom.to_json().dump());
    const auto svc = ExplorerService::from_directory(dir.string());
    ASSERT_EQ(svc.registry().size(), 1u);
    EXPECT_EQ(svc.mask(json("tight")).v1, 1.0);

    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    std::thread t([&] { server.listen(); });
    httplib::Client cli("127.0.0.1", port);
    const json req = {{"model", "contour"}, {"design", nominal_design(f.contour.space)}, {"mask", "tight"}};
    auto res = cli.Post("/v1/predict", req.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body, svc.predict(req).dump());
    auto health = cli.Get("/v1/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(json::parse(health->body).at("status"), "ok");
    server.stop();
    t.join();
}
