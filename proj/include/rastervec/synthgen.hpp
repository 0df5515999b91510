#pragma once

#include <opencv2/core.hpp>
#include <random>
#include <string>
#include <vector>

#include "rastervec/geometry.hpp"

namespace rastervec::synth {

struct MissingAssets : std::runtime_error {
    explicit MissingAssets(const std::string& what) : std::runtime_error(what) {}
};
struct LayoutOverconstrained : std::runtime_error {
    explicit LayoutOverconstrained(const std::string& what) : std::runtime_error(what) {}
};

struct PrimitiveStyle {
    double stroke_width = 2.0;  // pixels
    cv::Scalar color = {20, 20, 20};
    double opacity = 1.0;
    bool filled = false;  // circles only
};

struct GenConfig {
    int image_min = 256;
    int image_max = 256;

    // per-class counts ~ U{0..max}; a redraw keeps at least min_total
    int lines_max = 12;
    int circles_max = 6;
    int arcs_max = 4;
    int min_total = 1;

    // structured-configuration probabilities
    double p_concentric = 0.2;
    double p_tangent = 0.2;
    double p_parallel = 0.2;
    double p_connected_arc = 0.3;

    // clutter
    int words_max = 5;
    int numbers_max = 3;
    int glyphs_max = 6;

    // backgrounds: user pool with a procedural parchment fallback
    std::string background_dir;
    bool procedural_fallback = true;

    // stroke style
    double stroke_min = 1.5;
    double stroke_max = 4.0;
    double opacity_min = 0.75;
    double opacity_max = 1.0;
    double p_filled_circle = 0.2;
    bool dark_strokes_only = false;

    // degradations, applied in order blur / noise shapes / resize / chips
    bool degrade = true;
    double blur_sigma_min = 0.0;
    double blur_sigma_max = 1.2;
    int noise_shapes_max = 5;
    double resize_min = 0.75;
    double resize_max = 1.25;
    int chips_max = 4;
    int chip_size = 20;

    double margin = 0.04;  // frame margin for layouts, normalized
};

struct AugmentConfig {
    int short_min = 480;
    int short_max = 800;
    int long_max = 1333;
    double p_crop = 0.5;
    double crop_min_frac = 0.6;
    double p_hflip = 0.5;
    double p_vflip = 0.25;
    double p_rot90 = 0.5;
    bool enabled = true;
};

struct SyntheticSample {
    cv::Mat image;  // BGR 8U
    std::vector<geom::Primitive> primitives;
    std::vector<PrimitiveStyle> styles;
    std::uint64_t seed = 0;
};

std::vector<geom::Primitive> sample_layout(const GenConfig& cfg, std::mt19937_64& rng);

cv::Mat make_background(const GenConfig& cfg, int w, int h, std::mt19937_64& rng);
void add_clutter(cv::Mat& img, const GenConfig& cfg, std::mt19937_64& rng);

// Anti-aliased strokes composited over the background. stroke_mask, when
// given, receives a 8U mask of the drawn primitive pixels.
cv::Mat render(const std::vector<geom::Primitive>& prims,
               const std::vector<PrimitiveStyle>& styles, const cv::Mat& background,
               cv::Mat* stroke_mask = nullptr);

cv::Mat degrade(const cv::Mat& img, const GenConfig& cfg, std::mt19937_64& rng,
                const cv::Mat& background);

SyntheticSample generate_sample(const GenConfig& cfg, std::uint64_t seed);

SyntheticSample augment(const SyntheticSample& sample, const AugmentConfig& cfg,
                        std::mt19937_64& rng);

// Per-sample seed for worker-parallel streams.
std::uint64_t sample_seed(std::uint64_t global_seed, std::uint64_t index);

// Fraction of `count` points along the primitive that have a stroke-mask
// pixel within `radius` pixels (the label-fidelity measure).
double stroke_coverage(const geom::Primitive& p, const cv::Mat& stroke_mask, int count = 64,
                       int radius = 2);

}  // namespace rastervec::synth
