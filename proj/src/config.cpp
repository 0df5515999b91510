#include <fstream>
#include <set>

#include "rastervec/config.hpp"

namespace rastervec::cfg {

using nlohmann::json;

namespace {

// Tracks consumed keys so unknown ones can be reported with their path.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& target) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            target = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError("unknown key: " + path_ + "." + key);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json gen_to_json(const synth::GenConfig& g) {
    return json{{"image_min", g.image_min},
                {"image_max", g.image_max},
                {"lines_max", g.lines_max},
                {"circles_max", g.circles_max},
                {"arcs_max", g.arcs_max},
                {"min_total", g.min_total},
                {"p_concentric", g.p_concentric},
                {"p_tangent", g.p_tangent},
                {"p_parallel", g.p_parallel},
                {"p_connected_arc", g.p_connected_arc},
                {"words_max", g.words_max},
                {"numbers_max", g.numbers_max},
                {"glyphs_max", g.glyphs_max},
                {"background_dir", g.background_dir},
                {"procedural_fallback", g.procedural_fallback},
                {"stroke_min", g.stroke_min},
                {"stroke_max", g.stroke_max},
                {"opacity_min", g.opacity_min},
                {"opacity_max", g.opacity_max},
                {"p_filled_circle", g.p_filled_circle},
                {"dark_strokes_only", g.dark_strokes_only},
                {"degrade", g.degrade},
                {"blur_sigma_min", g.blur_sigma_min},
                {"blur_sigma_max", g.blur_sigma_max},
                {"noise_shapes_max", g.noise_shapes_max},
                {"resize_min", g.resize_min},
                {"resize_max", g.resize_max},
                {"chips_max", g.chips_max},
                {"chip_size", g.chip_size},
                {"margin", g.margin}};
}

void gen_from_json(const json& j, const std::string& path, synth::GenConfig& g) {
    Section s(j, path);
    s.get("image_min", g.image_min);
    s.get("image_max", g.image_max);
    s.get("lines_max", g.lines_max);
    s.get("circles_max", g.circles_max);
    s.get("arcs_max", g.arcs_max);
    s.get("min_total", g.min_total);
    s.get("p_concentric", g.p_concentric);
    s.get("p_tangent", g.p_tangent);
    s.get("p_parallel", g.p_parallel);
    s.get("p_connected_arc", g.p_connected_arc);
    s.get("words_max", g.words_max);
    s.get("numbers_max", g.numbers_max);
    s.get("glyphs_max", g.glyphs_max);
    s.get("background_dir", g.background_dir);
    s.get("procedural_fallback", g.procedural_fallback);
    s.get("stroke_min", g.stroke_min);
    s.get("stroke_max", g.stroke_max);
    s.get("opacity_min", g.opacity_min);
    s.get("opacity_max", g.opacity_max);
    s.get("p_filled_circle", g.p_filled_circle);
    s.get("dark_strokes_only", g.dark_strokes_only);
    s.get("degrade", g.degrade);
    s.get("blur_sigma_min", g.blur_sigma_min);
    s.get("blur_sigma_max", g.blur_sigma_max);
    s.get("noise_shapes_max", g.noise_shapes_max);
    s.get("resize_min", g.resize_min);
    s.get("resize_max", g.resize_max);
    s.get("chips_max", g.chips_max);
    s.get("chip_size", g.chip_size);
    s.get("margin", g.margin);
    s.finish();
}

json aug_to_json(const synth::AugmentConfig& a) {
    return json{{"short_min", a.short_min}, {"short_max", a.short_max},
                {"long_max", a.long_max},   {"p_crop", a.p_crop},
                {"crop_min_frac", a.crop_min_frac},
                {"p_hflip", a.p_hflip},     {"p_vflip", a.p_vflip},
                {"p_rot90", a.p_rot90},     {"enabled", a.enabled}};
}

void aug_from_json(const json& j, const std::string& path, synth::AugmentConfig& a) {
    Section s(j, path);
    s.get("short_min", a.short_min);
    s.get("short_max", a.short_max);
    s.get("long_max", a.long_max);
    s.get("p_crop", a.p_crop);
    s.get("crop_min_frac", a.crop_min_frac);
    s.get("p_hflip", a.p_hflip);
    s.get("p_vflip", a.p_vflip);
    s.get("p_rot90", a.p_rot90);
    s.get("enabled", a.enabled);
    s.finish();
}

json model_to_json(const model::ModelConfig& m) {
    return json{{"hidden", m.hidden},
                {"heads", m.heads},
                {"enc_layers", m.enc_layers},
                {"dec_layers", m.dec_layers},
                {"num_queries", m.num_queries},
                {"points", m.points},
                {"ffn", m.ffn},
                {"backbone", m.backbone},
                {"query_mode", m.query_mode},
                {"with_refinement", m.with_refinement},
                {"multi_scale", m.multi_scale},
                {"encoder_only", m.encoder_only}};
}

void model_from_json(const json& j, const std::string& path, model::ModelConfig& m) {
    Section s(j, path);
    s.get("hidden", m.hidden);
    s.get("heads", m.heads);
    s.get("enc_layers", m.enc_layers);
    s.get("dec_layers", m.dec_layers);
    s.get("num_queries", m.num_queries);
    s.get("points", m.points);
    s.get("ffn", m.ffn);
    s.get("backbone", m.backbone);
    s.get("query_mode", m.query_mode);
    s.get("with_refinement", m.with_refinement);
    s.get("multi_scale", m.multi_scale);
    s.get("encoder_only", m.encoder_only);
    s.finish();
    if (m.hidden % m.heads != 0)
        throw ConfigError(path + ": hidden must be divisible by heads");
}

}  // namespace

json run_config_to_json(const RunConfig& rc) {
    return json{
        {"generation", gen_to_json(rc.gen)},
        {"augment", aug_to_json(rc.aug)},
        {"model", model_to_json(rc.model)},
        {"loss",
         {{"lambda_cls", rc.loss.lambda_cls},
          {"lambda_box", rc.loss.lambda_box},
          {"lambda_param", rc.loss.lambda_param},
          {"focal_alpha", rc.loss.focal_alpha},
          {"focal_gamma", rc.loss.focal_gamma}}},
        {"denoise",
         {{"lambda_pos", rc.denoise.lambda_pos},
          {"lambda_neg", rc.denoise.lambda_neg},
          {"p_flip", rc.denoise.p_flip},
          {"query_budget", rc.denoise.query_budget},
          {"enabled", rc.denoise.enabled}}},
        {"eval",
         {{"delta_max", rc.eval.delta_max},
          {"sweep", rc.eval.sweep},
          {"conf_floor", rc.eval.conf_floor}}},
        {"schedule",
         {{"epochs", rc.schedule.epochs},
          {"steps_per_epoch", rc.schedule.steps_per_epoch},
          {"batch", rc.schedule.batch},
          {"lr_drop_epoch", rc.schedule.lr_drop_epoch},
          {"lr", rc.schedule.lr},
          {"lr_backbone", rc.schedule.lr_backbone}}},
        {"seed", rc.seed},
        {"out_dir", rc.out_dir}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig rc;
    Section root(j, "$");
    if (const json* g = root.child("generation")) gen_from_json(*g, "$.generation", rc.gen);
    if (const json* a = root.child("augment")) aug_from_json(*a, "$.augment", rc.aug);
    if (const json* m = root.child("model")) model_from_json(*m, "$.model", rc.model);
    if (const json* l = root.child("loss")) {
        Section s(*l, "$.loss");
        s.get("lambda_cls", rc.loss.lambda_cls);
        s.get("lambda_box", rc.loss.lambda_box);
        s.get("lambda_param", rc.loss.lambda_param);
        s.get("focal_alpha", rc.loss.focal_alpha);
        s.get("focal_gamma", rc.loss.focal_gamma);
        s.finish();
    }
    if (const json* d = root.child("denoise")) {
        Section s(*d, "$.denoise");
        s.get("lambda_pos", rc.denoise.lambda_pos);
        s.get("lambda_neg", rc.denoise.lambda_neg);
        s.get("p_flip", rc.denoise.p_flip);
        s.get("query_budget", rc.denoise.query_budget);
        s.get("enabled", rc.denoise.enabled);
        s.finish();
    }
    if (const json* e = root.child("eval")) {
        Section s(*e, "$.eval");
        s.get("delta_max", rc.eval.delta_max);
        s.get("sweep", rc.eval.sweep);
        s.get("conf_floor", rc.eval.conf_floor);
        s.finish();
    }
    if (const json* sc = root.child("schedule")) {
        Section s(*sc, "$.schedule");
        std::string preset;
        s.get("preset", preset);
        if (!preset.empty()) rc.schedule = train::schedule_preset(preset);
        s.get("epochs", rc.schedule.epochs);
        s.get("steps_per_epoch", rc.schedule.steps_per_epoch);
        s.get("batch", rc.schedule.batch);
        s.get("lr_drop_epoch", rc.schedule.lr_drop_epoch);
        s.get("lr", rc.schedule.lr);
        s.get("lr_backbone", rc.schedule.lr_backbone);
        s.finish();
    }
    root.get("seed", rc.seed);
    root.get("out_dir", rc.out_dir);
    root.finish();
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return run_config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& rc) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write config: " + path);
    os << run_config_to_json(rc).dump(2) << "\n";
}

}  // namespace rastervec::cfg
