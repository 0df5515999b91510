#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "rastervec/annotation.hpp"
#include "rastervec/config.hpp"
#include "rastervec/evaluation.hpp"
#include "rastervec/model.hpp"
#include "rastervec/plot.hpp"
#include "rastervec/svg.hpp"
#include "rastervec/synthgen.hpp"
#include "rastervec/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rastervec;

namespace {

geom::Annotation sample_to_annotation(const synth::SyntheticSample& s,
                                      const std::string& image_name) {
    geom::Annotation ann;
    ann.image = image_name;
    ann.width = s.image.cols;
    ann.height = s.image.rows;
    ann.primitives = s.primitives;
    return ann;
}

std::vector<fs::path> sorted_json_files(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

int cmd_generate(const std::string& config_path, int count, std::uint64_t seed,
                 const std::string& out_dir) {
    cfg::RunConfig rc;
    if (!config_path.empty()) rc = cfg::load_run_config(config_path);
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        const synth::SyntheticSample s =
            synth::generate_sample(rc.gen, synth::sample_seed(seed, i));
        char name[32];
        std::snprintf(name, sizeof name, "sample_%05d", i);
        const fs::path png = fs::path(out_dir) / (std::string(name) + ".png");
        if (!cv::imwrite(png.string(), s.image))
            throw std::runtime_error("cannot write " + png.string());
        geom::save_annotation((fs::path(out_dir) / (std::string(name) + ".json")).string(),
                              sample_to_annotation(s, std::string(name) + ".png"));
    }
    std::cout << "wrote " << count << " samples to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume_path,
              const std::string& scale, std::uint64_t seed, bool seed_set,
              const std::string& out_dir) {
    cfg::RunConfig rc;
    if (!config_path.empty()) rc = cfg::load_run_config(config_path);
    if (!scale.empty()) rc.schedule = train::schedule_preset(scale);
    if (seed_set) rc.seed = seed;
    if (!out_dir.empty()) rc.out_dir = out_dir;

    train::TrainConfig tc;
    tc.gen = rc.gen;
    tc.aug = rc.aug;
    tc.model = rc.model;
    tc.loss = rc.loss;
    tc.denoise = rc.denoise;
    tc.schedule = rc.schedule;
    tc.seed = rc.seed;
    tc.out_dir = rc.out_dir;
    tc.config_echo = cfg::run_config_to_json(rc).dump(2);

    train::Trainer trainer(tc);
    if (!resume_path.empty()) trainer.resume(resume_path);

    const long total = static_cast<long>(tc.schedule.epochs) * tc.schedule.steps_per_epoch;
    trainer.run([&](const train::StepRecord& rec) {
        if (rec.step % 10 == 0 || rec.step == total)
            std::cout << "step " << rec.step << "/" << total << " loss " << rec.loss.total
                      << " lr " << rec.lr << "\n";
    });
    std::cout << "done; checkpoints in " << tc.out_dir << "\n";
    return 0;
}

json report_to_json(const eval::Report& rep) {
    json j;
    j["delta_max"] = rep.delta_max;
    j["mAP"] = rep.map;
    j["ap"] = rep.ap;
    j["gt_counts"] = rep.gt_counts;
    j["curve"] = json::array();
    for (const auto& [delta, values] : rep.curve)
        j["curve"].push_back({{"delta", delta}, {"ap", values}});
    return j;
}

eval::Report report_from_json(const json& j) {
    eval::Report rep;
    rep.delta_max = j.at("delta_max").get<double>();
    rep.map = j.at("mAP").get<double>();
    rep.ap = j.at("ap").get<std::map<std::string, double>>();
    rep.gt_counts = j.at("gt_counts").get<std::map<std::string, int>>();
    for (const auto& pt : j.at("curve"))
        rep.curve.emplace_back(pt.at("delta").get<double>(),
                               pt.at("ap").get<std::map<std::string, double>>());
    return rep;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir, double delta_max,
                 const std::string& curve, double conf_floor, const std::string& out_path,
                 const std::string& plot_path) {
    eval::EvalConfig ec;
    ec.delta_max = delta_max;
    ec.conf_floor = conf_floor;
    if (!curve.empty()) {
        ec.sweep.clear();
        std::stringstream ss(curve);
        std::string tok;
        while (std::getline(ss, tok, ',')) ec.sweep.push_back(std::stod(tok));
    }

    std::vector<eval::PredSet> preds;
    std::vector<std::vector<geom::Primitive>> gts;
    for (const fs::path& gt_file : sorted_json_files(gt_dir)) {
        const geom::Annotation gt = geom::load_annotation(gt_file.string());
        gts.push_back(gt.primitives);
        eval::PredSet ps;
        const fs::path pred_file = fs::path(pred_dir) / gt_file.filename();
        if (fs::exists(pred_file)) {
            const geom::Annotation pr = geom::load_annotation(pred_file.string());
            ps.prims = pr.primitives;
            ps.conf = pr.confidences;
            ps.conf.resize(ps.prims.size(), 1.0);
        }
        preds.push_back(std::move(ps));
    }
    if (gts.empty()) throw std::runtime_error("no ground-truth annotations in " + gt_dir);

    const eval::Report rep = eval::evaluate_dataset(preds, gts, ec);
    const json j = report_to_json(rep);
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        if (!os) throw std::runtime_error("cannot write " + out_path);
        os << j.dump(2) << "\n";
    }
    if (!plot_path.empty()) {
        const auto [x, series] = plot::curve_series(rep);
        plot::line_chart(plot_path, "AP vs delta_max", x, series);
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_predict(const std::string& image_path, const std::string& ckpt_path, double conf_floor,
                std::string out_prefix) {
    const cv::Mat image = cv::imread(image_path, cv::IMREAD_COLOR);
    if (image.empty()) throw std::runtime_error("cannot read image: " + image_path);

    const train::CheckpointMeta meta = train::peek_checkpoint(ckpt_path);
    cfg::RunConfig rc;
    if (!meta.config_json.empty())
        rc = cfg::run_config_from_json(json::parse(meta.config_json));

    nn::ParamStore store;
    std::mt19937_64 rng(rc.seed);
    model::Model net(rc.model, store, rng);
    nn::AdamW opt;
    train::load_checkpoint(ckpt_path, store, opt);

    nn::Graph g;
    const model::ModelOutput out = net.forward(g, image);
    const std::vector<model::Detection> dets = model::decode_output(out.layers.back());

    geom::Annotation ann;
    ann.image = fs::path(image_path).filename().string();
    ann.width = image.cols;
    ann.height = image.rows;
    for (const auto& d : dets) {
        if (d.confidence < conf_floor) continue;
        ann.primitives.push_back(d.primitive);
        ann.confidences.push_back(d.confidence);
    }

    if (out_prefix.empty())
        out_prefix = (fs::path(image_path).parent_path() / fs::path(image_path).stem()).string();
    geom::save_annotation(out_prefix + ".json", ann);
    geom::SvgOptions opt_svg;
    opt_svg.backdrop_href = ann.image;
    geom::save_svg(out_prefix + ".svg", ann, opt_svg);
    std::cout << ann.primitives.size() << " primitives above conf " << conf_floor << "; wrote "
              << out_prefix << ".json and " << out_prefix << ".svg\n";
    return 0;
}

int cmd_validate(const std::string& dir, const std::string& out_path,
                 const std::string& plot_path) {
    std::vector<geom::Finding> findings;
    std::map<std::string, int> class_counts;
    std::map<std::string, int> per_image_hist;  // primitive-count bucket -> images
    int files = 0;
    for (const fs::path& f : sorted_json_files(dir)) {
        ++files;
        const geom::Annotation ann = geom::validate_annotation(f.string(), findings);
        for (const auto& p : ann.primitives) class_counts[geom::class_name(p.cls)] += 1;
        per_image_hist[std::to_string(ann.primitives.size())] += 1;
    }
    if (files == 0) throw std::runtime_error("no annotation files in " + dir);

    json j;
    j["files"] = files;
    j["class_counts"] = class_counts;
    j["primitives_per_image"] = per_image_hist;
    j["findings"] = json::array();
    for (const auto& f : findings)
        j["findings"].push_back(
            {{"file", f.file}, {"index", f.index}, {"code", f.code}, {"message", f.message}});
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        if (!os) throw std::runtime_error("cannot write " + out_path);
        os << j.dump(2) << "\n";
    }
    if (!plot_path.empty()) plot::histogram(plot_path, "primitives per class", class_counts);
    std::cout << j.dump(2) << "\n";
    return findings.empty() ? 0 : 2;
}

int cmd_plot(const std::string& metrics_path, const std::string& report_path,
             const std::string& out_dir) {
    fs::create_directories(out_dir);
    bool did = false;
    if (!metrics_path.empty()) {
        std::ifstream in(metrics_path);
        if (!in) throw std::runtime_error("cannot read " + metrics_path);
        std::vector<double> x;
        std::map<std::string, std::vector<double>> series;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            x.push_back(j.at("step").get<double>());
            for (const char* key : {"total", "cls", "box", "param", "dn"})
                series[key].push_back(j.at(key).get<double>());
        }
        plot::line_chart((fs::path(out_dir) / "loss_curves.png").string(), "training loss", x,
                         series);
        did = true;
    }
    if (!report_path.empty()) {
        std::ifstream in(report_path);
        if (!in) throw std::runtime_error("cannot read " + report_path);
        const eval::Report rep = report_from_json(json::parse(std::string(
            std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())));
        const auto [x, series] = plot::curve_series(rep);
        plot::line_chart((fs::path(out_dir) / "ap_curves.png").string(), "AP vs delta_max", x,
                         series);
        if (!rep.gt_counts.empty())
            plot::histogram((fs::path(out_dir) / "gt_histogram.png").string(),
                            "ground-truth primitives", rep.gt_counts);
        did = true;
    }
    if (!did) throw plot::EmptyInput("plot: pass --metrics and/or --report");
    std::cout << "figures written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rastervec: geometric-primitive detection in raster diagrams"};
    app.require_subcommand(1);

    std::string gen_config, gen_out;
    int gen_count = 16;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("generate", "Render synthetic diagrams with annotations");
    gen->add_option("--config", gen_config, "Run config JSON");
    gen->add_option("--count", gen_count, "Number of samples");
    gen->add_option("--seed", gen_seed, "Global seed");
    gen->add_option("--out", gen_out, "Output directory")->required();

    std::string tr_config, tr_resume, tr_scale, tr_out;
    std::uint64_t tr_seed = 0;
    auto* tr = app.add_subcommand("train", "Train a detector on streamed synthetic data");
    tr->add_option("--config", tr_config, "Run config JSON");
    tr->add_option("--resume", tr_resume, "Checkpoint to resume from");
    tr->add_option("--scale", tr_scale, "Schedule preset: paper|desk|smoke");
    auto* seed_opt = tr->add_option("--seed", tr_seed, "Override the config seed");
    tr->add_option("--out", tr_out, "Override the config out_dir");

    std::string ev_pred, ev_gt, ev_curve, ev_out, ev_plot;
    double ev_delta_max = 4.0, ev_conf_floor = 0.0;
    auto* ev = app.add_subcommand("evaluate", "Score predictions against ground truth");
    ev->add_option("--pred", ev_pred, "Directory of prediction JSON files")->required();
    ev->add_option("--gt", ev_gt, "Directory of ground-truth JSON files")->required();
    ev->add_option("--delta-max", ev_delta_max, "TP distance threshold");
    ev->add_option("--curve", ev_curve, "Comma-separated delta sweep (default 1,2,4,8)");
    ev->add_option("--conf-floor", ev_conf_floor, "Drop predictions below this confidence");
    ev->add_option("--out", ev_out, "Write the JSON report here");
    ev->add_option("--plot", ev_plot, "Write an AP-vs-delta figure here");

    std::string pr_image, pr_ckpt, pr_out;
    double pr_conf = 0.5;
    auto* pr = app.add_subcommand("predict", "Run a checkpoint on an image");
    pr->add_option("image", pr_image, "Input raster image")->required();
    pr->add_option("--checkpoint", pr_ckpt, "Model checkpoint")->required();
    pr->add_option("--conf", pr_conf, "Confidence floor");
    pr->add_option("--out", pr_out, "Output path prefix (.json/.svg appended)");

    std::string va_dir, va_out, va_plot;
    auto* va = app.add_subcommand("validate", "Check an annotation directory");
    va->add_option("--dir", va_dir, "Directory of annotation JSON files")->required();
    va->add_option("--out", va_out, "Write the findings report here");
    va->add_option("--plot", va_plot, "Write a class-count histogram here");

    std::string pl_metrics, pl_report, pl_out = "plots";
    auto* pl = app.add_subcommand("plot", "Draw figures from logs and reports");
    pl->add_option("--metrics", pl_metrics, "metrics.ndjson from training");
    pl->add_option("--report", pl_report, "Evaluation report JSON");
    pl->add_option("--out", pl_out, "Output directory for figures");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_generate(gen_config, gen_count, gen_seed, gen_out);
        if (tr->parsed())
            return cmd_train(tr_config, tr_resume, tr_scale, tr_seed, seed_opt->count() > 0,
                             tr_out);
        if (ev->parsed())
            return cmd_evaluate(ev_pred, ev_gt, ev_delta_max, ev_curve, ev_conf_floor, ev_out,
                                ev_plot);
        if (pr->parsed()) return cmd_predict(pr_image, pr_ckpt, pr_conf, pr_out);
        if (va->parsed()) return cmd_validate(va_dir, va_out, va_plot);
        if (pl->parsed()) return cmd_plot(pl_metrics, pl_report, pl_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
