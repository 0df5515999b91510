#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "rastervec/annotation.hpp"
#include "rastervec/config.hpp"
#include "rastervec/plot.hpp"
#include "rastervec/svg.hpp"

using namespace rastervec;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / "rastervec_io_tests";
    fs::create_directories(dir);
    return dir;
}

geom::Annotation sample_annotation() {
    geom::Annotation ann;
    ann.image = "diagram.png";
    ann.width = 320;
    ann.height = 240;
    ann.primitives = {
        geom::Primitive::line(0.1, 0.2, 0.85, 0.7),
        geom::Primitive::circle(0.5, 0.5, 0.15, 0.15 * 320.0 / 240.0),
        geom::Primitive::arc(0.2, 0.8, 0.75, 0.75, 0.45, 0.55),
    };
    ann.confidences = {0.9, 0.75, 0.6};
    return ann;
}

}  // namespace

TEST_CASE("annotation json round-trip preserves primitives") {
    const geom::Annotation ann = sample_annotation();
    const geom::Annotation back = geom::annotation_from_json(geom::annotation_to_json(ann));

    REQUIRE(back.primitives.size() == ann.primitives.size());
    CHECK(back.image == ann.image);
    CHECK(back.width == ann.width);
    CHECK(back.height == ann.height);
    for (size_t i = 0; i < ann.primitives.size(); ++i) {
        CHECK(back.primitives[i].cls == ann.primitives[i].cls);
        for (int k = 0; k < ann.primitives[i].n_params(); ++k)
            CHECK(back.primitives[i].params[k] ==
                  doctest::Approx(ann.primitives[i].params[k]).epsilon(1e-9));
        CHECK(back.confidences[i] == doctest::Approx(ann.confidences[i]));
    }
}

TEST_CASE("annotation file round-trip") {
    const fs::path path = scratch_dir() / "roundtrip.json";
    const geom::Annotation ann = sample_annotation();
    geom::save_annotation(path.string(), ann);
    const geom::Annotation back = geom::load_annotation(path.string());
    REQUIRE(back.primitives.size() == 3);
    CHECK(back.primitives[2].params[5] == doctest::Approx(ann.primitives[2].params[5]));
}

TEST_CASE("validate_annotation reports zero findings on a clean file") {
    const fs::path path = scratch_dir() / "clean.json";
    geom::save_annotation(path.string(), sample_annotation());
    std::vector<geom::Finding> findings;
    const geom::Annotation ann = geom::validate_annotation(path.string(), findings);
    CHECK(findings.empty());
    CHECK(ann.primitives.size() == 3);
}

TEST_CASE("validate_annotation flags collinear arcs with file and index") {
    nlohmann::json j;
    j["image"] = "x.png";
    j["width"] = 100;
    j["height"] = 100;
    j["primitives"] = nlohmann::json::array();
    j["primitives"].push_back(
        {{"type", "line"}, {"points", {{10.0, 10.0}, {90.0, 90.0}}}});
    j["primitives"].push_back(
        {{"type", "arc"}, {"points", {{10.0, 10.0}, {50.0, 50.0}, {90.0, 90.0}}}});

    const fs::path path = scratch_dir() / "collinear.json";
    std::ofstream(path) << j.dump(2);

    std::vector<geom::Finding> findings;
    geom::validate_annotation(path.string(), findings);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].code == "CollinearArc");
    CHECK(findings[0].file == path.string());
    CHECK(findings[0].index == 1);
}

TEST_CASE("validate_annotation flags schema and bounds problems") {
    const fs::path dir = scratch_dir();

    std::ofstream(dir / "broken.json") << "{not json";
    std::vector<geom::Finding> f1;
    geom::validate_annotation((dir / "broken.json").string(), f1);
    REQUIRE(f1.size() == 1);
    CHECK(f1[0].code == "Schema");
    CHECK(f1[0].index == -1);

    nlohmann::json j;
    j["image"] = "x.png";
    j["width"] = 100;
    j["height"] = 100;
    j["primitives"] = nlohmann::json::array();
    j["primitives"].push_back(
        {{"type", "line"}, {"points", {{-30.0, 10.0}, {90.0, 90.0}}}});
    std::ofstream(dir / "oob.json") << j.dump();
    std::vector<geom::Finding> f2;
    geom::validate_annotation((dir / "oob.json").string(), f2);
    REQUIRE(f2.size() == 1);
    CHECK(f2[0].code == "OutOfBounds");
    CHECK(f2[0].index == 0);
}

TEST_CASE("svg arc path matches the arc center form") {
    geom::Annotation ann;
    ann.image = "a.png";
    ann.width = 200;
    ann.height = 200;
    ann.primitives = {geom::Primitive::arc(0.2, 0.5, 0.8, 0.5, 0.5, 0.15)};

    const std::string svg = geom::annotation_to_svg(ann);
    const size_t at = svg.find("d=\"M ");
    REQUIRE(at != std::string::npos);
    std::istringstream path(svg.substr(at + 3));
    char cmd;
    double x1, y1, r1, r2, rot, x2, y2;
    int large_arc, sweep_flag;
    path >> cmd >> x1 >> y1;  // M
    path >> cmd >> r1 >> r2 >> rot >> large_arc >> sweep_flag >> x2 >> y2;
    REQUIRE(cmd == 'A');

    const geom::Primitive px = geom::Primitive::arc(
        ann.primitives[0].params[0] * 200, ann.primitives[0].params[1] * 200,
        ann.primitives[0].params[2] * 200, ann.primitives[0].params[3] * 200,
        ann.primitives[0].params[4] * 200, ann.primitives[0].params[5] * 200);
    const geom::ArcCenterForm f = geom::arc_center_form(px);

    CHECK(r1 == doctest::Approx(f.radius).epsilon(1e-6));
    CHECK(r2 == doctest::Approx(f.radius).epsilon(1e-6));
    CHECK(x1 == doctest::Approx(px.params[0]).epsilon(1e-6));
    CHECK(y1 == doctest::Approx(px.params[1]).epsilon(1e-6));
    CHECK(x2 == doctest::Approx(px.params[2]).epsilon(1e-6));
    CHECK(y2 == doctest::Approx(px.params[3]).epsilon(1e-6));
    CHECK(sweep_flag == (f.sweep > 0 ? 1 : 0));
    CHECK(large_arc == (std::abs(f.sweep) > 3.14159265358979 ? 1 : 0));

    // Recover the candidate centers from the SVG endpoint parameterization
    // and confirm one is within half a pixel of the exact center.
    const double mx = (x1 + x2) / 2, my = (y1 + y2) / 2;
    const double dx = x2 - x1, dy = y2 - y1;
    const double half = std::hypot(dx, dy) / 2;
    REQUIRE(r1 >= half - 1e-9);
    const double off = std::sqrt(std::max(0.0, r1 * r1 - half * half));
    const double nx = -dy / (2 * half), ny = dx / (2 * half);
    const double da = std::hypot(mx + off * nx - f.cx, my + off * ny - f.cy);
    const double db = std::hypot(mx - off * nx - f.cx, my - off * ny - f.cy);
    CHECK(std::min(da, db) < 0.5);
}

TEST_CASE("svg contains backdrop layer when requested") {
    geom::Annotation ann = sample_annotation();
    geom::SvgOptions opt;
    opt.backdrop_href = "diagram.png";
    const std::string svg = geom::annotation_to_svg(ann, opt);
    CHECK(svg.find("<image href=\"diagram.png\"") != std::string::npos);
    CHECK(svg.find("<line ") != std::string::npos);
    CHECK(svg.find("<circle ") != std::string::npos);
    CHECK(svg.find("<path ") != std::string::npos);
}

TEST_CASE("run config round-trips losslessly through json") {
    cfg::RunConfig rc;
    rc.gen.image_min = 192;
    rc.gen.image_max = 256;
    rc.gen.p_tangent = 0.33;
    rc.aug.p_hflip = 0.25;
    rc.model.hidden = 32;
    rc.model.enc_layers = 1;
    rc.model.dec_layers = 3;
    rc.model.query_mode = "pure";
    rc.model.multi_scale = false;
    rc.loss.lambda_cls = 2.5;
    rc.denoise.lambda_pos = 0.3;
    rc.eval.delta_max = 6;
    rc.eval.sweep = {1, 3, 9};
    rc.schedule = train::schedule_preset("desk");
    rc.schedule.lr = 3e-4;
    rc.seed = 1234567;
    rc.out_dir = "runs/io_test";

    const nlohmann::json j = cfg::run_config_to_json(rc);
    const cfg::RunConfig back = cfg::run_config_from_json(j);
    CHECK(cfg::run_config_to_json(back) == j);
    CHECK(back.gen.p_tangent == rc.gen.p_tangent);
    CHECK(back.model.query_mode == "pure");
    CHECK(back.eval.sweep == rc.eval.sweep);
    CHECK(back.schedule.lr == rc.schedule.lr);
    CHECK(back.seed == rc.seed);
}

TEST_CASE("run config rejects unknown keys with their path") {
    nlohmann::json j = cfg::run_config_to_json(cfg::RunConfig{});
    j["model"]["hiddenn"] = 64;
    CHECK_THROWS_WITH_AS(cfg::run_config_from_json(j), "unknown key: $.model.hiddenn",
                         cfg::ConfigError);

    nlohmann::json j2 = cfg::run_config_to_json(cfg::RunConfig{});
    j2["warmup"] = true;
    CHECK_THROWS_WITH_AS(cfg::run_config_from_json(j2), "unknown key: $.warmup",
                         cfg::ConfigError);
}

TEST_CASE("run config file round-trip") {
    const fs::path path = scratch_dir() / "run.json";
    cfg::RunConfig rc;
    rc.seed = 11;
    rc.model.hidden = 48;
    cfg::save_run_config(path.string(), rc);
    const cfg::RunConfig back = cfg::load_run_config(path.string());
    CHECK(back.seed == 11);
    CHECK(back.model.hidden == 48);
}

TEST_CASE("curve_series reproduces report values verbatim") {
    eval::Report rep;
    rep.curve = {
        {1.0, {{"line", 0.25}, {"circle", 0.5}, {"mAP", 0.375}}},
        {2.0, {{"line", 0.5}, {"circle", 0.75}, {"mAP", 0.625}}},
        {4.0, {{"line", 0.9}, {"circle", 1.0}, {"mAP", 0.95}}},
    };
    const auto [x, series] = plot::curve_series(rep);
    REQUIRE(x == std::vector<double>{1.0, 2.0, 4.0});
    REQUIRE(series.count("mAP") == 1);
    CHECK(series.at("line") == std::vector<double>{0.25, 0.5, 0.9});
    CHECK(series.at("circle") == std::vector<double>{0.5, 0.75, 1.0});
    CHECK(series.at("mAP") == std::vector<double>{0.375, 0.625, 0.95});

    CHECK_THROWS_AS(plot::curve_series(eval::Report{}), plot::EmptyInput);
}

TEST_CASE("charts are written to disk") {
    const fs::path dir = scratch_dir();
    const fs::path chart = dir / "chart.png";
    const fs::path hist = dir / "hist.png";

    plot::line_chart(chart.string(), "ap by delta", {1, 2, 4, 8},
                     {{"mAP", {0.2, 0.4, 0.7, 0.9}}, {"line", {0.1, 0.3, 0.6, 0.8}}});
    plot::histogram(hist.string(), "primitive counts", {{"line", 40}, {"circle", 12}, {"arc", 7}});

    const cv::Mat a = cv::imread(chart.string());
    const cv::Mat b = cv::imread(hist.string());
    REQUIRE_FALSE(a.empty());
    REQUIRE_FALSE(b.empty());
    CHECK(a.cols > 400);
    CHECK(b.rows > 300);

    CHECK_THROWS_AS(plot::line_chart(chart.string(), "t", {}, {}), plot::EmptyInput);
    CHECK_THROWS_AS(plot::histogram(hist.string(), "t", {}), plot::EmptyInput);
}
