#include "rastervec/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace rastervec::synth {

using geom::ArcCenterForm;
using geom::BBox;
using geom::Primitive;
using geom::PrimitiveClass;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kShift = 4;  // subpixel bits for OpenCV drawing
constexpr double kShiftScale = 16.0;

double uni(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int unii(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool bern(std::mt19937_64& rng, double p) { return uni(rng, 0.0, 1.0) < p; }

bool in_frame(const Primitive& p, double margin) {
    try {
        const BBox b = geom::bbox_of(p);
        return b.x0() >= margin && b.x1() <= 1 - margin && b.y0() >= margin &&
               b.y1() <= 1 - margin;
    } catch (const geom::CollinearArc&) {
        return false;
    }
}

Primitive random_line(const GenConfig& cfg, std::mt19937_64& rng) {
    const double m = cfg.margin;
    for (int t = 0; t < 1000; ++t) {
        Primitive p = Primitive::line(uni(rng, m, 1 - m), uni(rng, m, 1 - m),
                                      uni(rng, m, 1 - m), uni(rng, m, 1 - m));
        const double len = std::hypot(p.params[2] - p.params[0], p.params[3] - p.params[1]);
        if (len > 0.08) return p;
    }
    throw LayoutOverconstrained("line");
}

Primitive random_circle(const GenConfig& cfg, std::mt19937_64& rng) {
    const double m = cfg.margin;
    const double r = uni(rng, 0.04, 0.3);
    const double cx = uni(rng, m + r, 1 - m - r);
    const double cy = uni(rng, m + r, 1 - m - r);
    return Primitive::circle(cx, cy, r, r);
}

Primitive arc_from_center(double cx, double cy, double r, double start, double sweep) {
    ArcCenterForm f;
    f.cx = cx;
    f.cy = cy;
    f.radius = r;
    f.start_angle = start;
    f.sweep = sweep;
    const auto a = f.at(0.0), b = f.at(1.0), mid = f.at(0.5);
    return Primitive::arc(a.x, a.y, b.x, b.y, mid.x, mid.y);
}

Primitive random_arc(const GenConfig& cfg, std::mt19937_64& rng) {
    for (int t = 0; t < 1000; ++t) {
        const double r = uni(rng, 0.06, 0.35);
        const Primitive p =
            arc_from_center(uni(rng, 0.1, 0.9), uni(rng, 0.1, 0.9), r, uni(rng, -kPi, kPi),
                            (bern(rng, 0.5) ? 1 : -1) * uni(rng, 0.6, 5.5));
        if (in_frame(p, cfg.margin)) return p;
    }
    throw LayoutOverconstrained("arc");
}

// Retry structured draws; fall back to an unstructured draw when the
// configuration cannot be placed.
template <typename Fn>
void place_structured(std::vector<Primitive>& out, int budget, Fn&& draw,
                      const GenConfig& cfg, std::mt19937_64& rng,
                      const std::function<void()>& fallback) {
    for (int t = 0; t < 1000; ++t) {
        std::vector<Primitive> group = draw();
        bool ok = !group.empty() && static_cast<int>(group.size()) <= budget;
        for (const auto& p : group) ok = ok && in_frame(p, cfg.margin);
        if (ok) {
            out.insert(out.end(), group.begin(), group.end());
            return;
        }
        (void)rng;
    }
    fallback();
}

}  // namespace

std::vector<Primitive> sample_layout(const GenConfig& cfg, std::mt19937_64& rng) {
    int n_lines = 0, n_circles = 0, n_arcs = 0;
    for (int t = 0; t < 100; ++t) {
        n_lines = unii(rng, 0, cfg.lines_max);
        n_circles = unii(rng, 0, cfg.circles_max);
        n_arcs = unii(rng, 0, cfg.arcs_max);
        if (n_lines + n_circles + n_arcs >= cfg.min_total) break;
    }
    if (n_lines + n_circles + n_arcs < cfg.min_total) n_lines = cfg.min_total;

    std::vector<Primitive> prims;

    int circles_left = n_circles;
    while (circles_left > 0) {
        if (circles_left >= 2 && bern(rng, cfg.p_concentric)) {
            const int k = std::min(circles_left, unii(rng, 2, 3));
            place_structured(
                prims, k,
                [&]() {
                    std::vector<Primitive> g;
                    const double cx = uni(rng, 0.2, 0.8), cy = uni(rng, 0.2, 0.8);
                    double r = uni(rng, 0.03, 0.12);
                    for (int i = 0; i < k; ++i) {
                        g.push_back(Primitive::circle(cx, cy, r, r));
                        r += uni(rng, 0.03, 0.1);
                    }
                    return g;
                },
                cfg, rng, [&]() { prims.push_back(random_circle(cfg, rng)); });
            circles_left -= k;
        } else if (circles_left >= 2 && bern(rng, cfg.p_tangent)) {
            place_structured(
                prims, 2,
                [&]() -> std::vector<Primitive> {
                    const double r1 = uni(rng, 0.05, 0.2);
                    const double r2 = uni(rng, 0.05, 0.2);
                    const double theta = uni(rng, -kPi, kPi);
                    const double cx = uni(rng, 0.2, 0.8), cy = uni(rng, 0.2, 0.8);
                    const bool external = bern(rng, 0.75) || std::abs(r1 - r2) < 0.02;
                    const double dist = external ? r1 + r2 : std::abs(r1 - r2);
                    return {Primitive::circle(cx, cy, r1, r1),
                            Primitive::circle(cx + dist * std::cos(theta),
                                              cy + dist * std::sin(theta), r2, r2)};
                },
                cfg, rng, [&]() { prims.push_back(random_circle(cfg, rng)); });
            circles_left -= 2;
        } else {
            prims.push_back(random_circle(cfg, rng));
            circles_left -= 1;
        }
    }

    int lines_left = n_lines;
    while (lines_left > 0) {
        if (lines_left >= 2 && bern(rng, cfg.p_parallel)) {
            const int k = std::min(lines_left, unii(rng, 2, 3));
            place_structured(
                prims, k,
                [&]() {
                    std::vector<Primitive> g;
                    const Primitive base = random_line(cfg, rng);
                    g.push_back(base);
                    const double dx = base.params[2] - base.params[0];
                    const double dy = base.params[3] - base.params[1];
                    const double len = std::hypot(dx, dy);
                    const double nx = -dy / len, ny = dx / len;
                    double off = 0;
                    for (int i = 1; i < k; ++i) {
                        off += uni(rng, 0.03, 0.12) * (bern(rng, 0.5) ? 1 : -1);
                        g.push_back(Primitive::line(
                            base.params[0] + off * nx, base.params[1] + off * ny,
                            base.params[2] + off * nx, base.params[3] + off * ny));
                    }
                    return g;
                },
                cfg, rng, [&]() { prims.push_back(random_line(cfg, rng)); });
            lines_left -= k;
        } else {
            prims.push_back(random_line(cfg, rng));
            lines_left -= 1;
        }
    }

    for (int a = 0; a < n_arcs; ++a) {
        const bool connect = bern(rng, cfg.p_connected_arc) && !prims.empty();
        if (connect) {
            // pick a host endpoint among existing lines/arcs
            std::vector<std::pair<double, double>> hosts;
            for (const auto& p : prims) {
                if (p.cls == PrimitiveClass::Circle) continue;
                hosts.push_back({p.params[0], p.params[1]});
                hosts.push_back({p.params[2], p.params[3]});
            }
            if (!hosts.empty()) {
                const auto [ex, ey] = hosts[unii(rng, 0, static_cast<int>(hosts.size()) - 1)];
                bool placed = false;
                for (int t = 0; t < 1000 && !placed; ++t) {
                    const double r = uni(rng, 0.06, 0.3);
                    const double phi = uni(rng, -kPi, kPi);
                    const double cx = ex - r * std::cos(phi);
                    const double cy = ey - r * std::sin(phi);
                    Primitive arc = arc_from_center(
                        cx, cy, r, phi, (bern(rng, 0.5) ? 1 : -1) * uni(rng, 0.8, 4.5));
                    arc.params[0] = ex;  // shared endpoint, exactly
                    arc.params[1] = ey;
                    if (in_frame(arc, cfg.margin)) {
                        prims.push_back(arc);
                        placed = true;
                    }
                }
                if (placed) continue;
            }
        }
        prims.push_back(random_arc(cfg, rng));
    }
    return prims;
}

cv::Mat make_background(const GenConfig& cfg, int w, int h, std::mt19937_64& rng) {
    if (!cfg.background_dir.empty()) {
        std::vector<std::string> files;
        if (std::filesystem::is_directory(cfg.background_dir)) {
            for (const auto& e : std::filesystem::directory_iterator(cfg.background_dir))
                if (e.is_regular_file()) files.push_back(e.path().string());
            std::sort(files.begin(), files.end());
        }
        if (!files.empty()) {
            const cv::Mat src =
                cv::imread(files[unii(rng, 0, static_cast<int>(files.size()) - 1)]);
            if (!src.empty()) {
                cv::Mat out;
                cv::resize(src, out, {w, h}, 0, 0, cv::INTER_AREA);
                return out;
            }
        }
        if (!cfg.procedural_fallback)
            throw MissingAssets("background pool empty: " + cfg.background_dir);
    }
    // procedural parchment: warm base tone plus low-frequency noise
    const double b = uni(rng, 185, 210), g = uni(rng, 205, 228), r = uni(rng, 222, 244);
    cv::Mat out(h, w, CV_8UC3, cv::Scalar(b, g, r));
    cv::Mat noise(8, 8, CV_32FC1);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) noise.at<float>(i, j) = static_cast<float>(uni(rng, -14, 14));
    cv::Mat noise_big;
    cv::resize(noise, noise_big, {w, h}, 0, 0, cv::INTER_CUBIC);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            auto& px = out.at<cv::Vec3b>(y, x);
            const float n = noise_big.at<float>(y, x);
            for (int c = 0; c < 3; ++c)
                px[c] = cv::saturate_cast<uchar>(px[c] + n);
        }
    }
    return out;
}

void add_clutter(cv::Mat& img, const GenConfig& cfg, std::mt19937_64& rng) {
    static const int fonts[] = {cv::FONT_HERSHEY_SIMPLEX,       cv::FONT_HERSHEY_PLAIN,
                                cv::FONT_HERSHEY_DUPLEX,        cv::FONT_HERSHEY_COMPLEX,
                                cv::FONT_HERSHEY_TRIPLEX,       cv::FONT_HERSHEY_COMPLEX_SMALL,
                                cv::FONT_HERSHEY_SCRIPT_SIMPLEX, cv::FONT_HERSHEY_SCRIPT_COMPLEX};
    static const char letters[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    auto rand_color = [&]() {
        const double v = uni(rng, 10, 110);
        return cv::Scalar(v + uni(rng, -10, 10), v + uni(rng, -10, 10), v + uni(rng, -10, 10));
    };
    const int n_words = unii(rng, 0, cfg.words_max);
    for (int i = 0; i < n_words; ++i) {
        std::string word;
        const int len = unii(rng, 2, 8);
        for (int c = 0; c < len; ++c) word += letters[unii(rng, 0, 51)];
        cv::putText(img, word, {unii(rng, 0, img.cols), unii(rng, 0, img.rows)},
                    fonts[unii(rng, 0, 7)], uni(rng, 0.35, 1.1), rand_color(),
                    unii(rng, 1, 2), cv::LINE_AA);
    }
    const int n_numbers = unii(rng, 0, cfg.numbers_max);
    for (int i = 0; i < n_numbers; ++i) {
        std::string num;
        const int len = unii(rng, 1, 4);
        for (int c = 0; c < len; ++c) num += static_cast<char>('0' + unii(rng, 0, 9));
        cv::putText(img, num, {unii(rng, 0, img.cols), unii(rng, 0, img.rows)},
                    fonts[unii(rng, 0, 7)], uni(rng, 0.35, 1.0), rand_color(),
                    unii(rng, 1, 2), cv::LINE_AA);
    }
    const int n_glyphs = unii(rng, 0, cfg.glyphs_max);
    for (int i = 0; i < n_glyphs; ++i) {
        const int cx = unii(rng, 0, img.cols - 1), cy = unii(rng, 0, img.rows - 1);
        const int box = unii(rng, 6, 22);
        cv::Point prev(cx, cy);
        const cv::Scalar col = rand_color();
        const int segs = unii(rng, 2, 4);
        for (int s = 0; s < segs; ++s) {
            cv::Point next(cx + unii(rng, -box, box), cy + unii(rng, -box, box));
            cv::line(img, prev, next, col, 1, cv::LINE_AA);
            prev = next;
        }
    }
}

namespace {

std::vector<cv::Point> arc_polyline(const Primitive& arc, int w, int h) {
    const ArcCenterForm f = geom::arc_center_form(arc);
    const int steps = std::max(8, static_cast<int>(std::abs(f.sweep) * f.radius *
                                                   std::max(w, h) / 2.0));
    std::vector<cv::Point> pts;
    pts.reserve(steps + 1);
    for (int i = 0; i <= steps; ++i) {
        const auto p = f.at(static_cast<double>(i) / steps);
        pts.emplace_back(static_cast<int>(std::lround(p.x * w * kShiftScale)),
                         static_cast<int>(std::lround(p.y * h * kShiftScale)));
    }
    return pts;
}

void draw_primitive(cv::Mat& img, const Primitive& p, const cv::Scalar& color, int thickness,
                    bool filled) {
    const int w = img.cols, h = img.rows;
    auto px = [&](double x, double y) {
        return cv::Point(static_cast<int>(std::lround(x * w * kShiftScale)),
                         static_cast<int>(std::lround(y * h * kShiftScale)));
    };
    switch (p.cls) {
        case PrimitiveClass::Line:
            cv::line(img, px(p.params[0], p.params[1]), px(p.params[2], p.params[3]), color,
                     thickness, cv::LINE_AA, kShift);
            break;
        case PrimitiveClass::Circle: {
            const cv::Point c = px(p.params[0], p.params[1]);
            const int r = static_cast<int>(std::lround(p.params[2] * w * kShiftScale));
            if (filled) cv::circle(img, c, r, color, cv::FILLED, cv::LINE_AA, kShift);
            cv::circle(img, c, r, color, thickness, cv::LINE_AA, kShift);
            break;
        }
        case PrimitiveClass::Arc: {
            const auto pts = arc_polyline(p, w, h);
            cv::polylines(img, pts, false, color, thickness, cv::LINE_AA, kShift);
            break;
        }
        default:
            break;
    }
}

}  // namespace

cv::Mat render(const std::vector<Primitive>& prims, const std::vector<PrimitiveStyle>& styles,
               const cv::Mat& background, cv::Mat* stroke_mask) {
    cv::Mat out = background.clone();
    if (stroke_mask) *stroke_mask = cv::Mat::zeros(background.size(), CV_8UC1);
    for (size_t i = 0; i < prims.size(); ++i) {
        const PrimitiveStyle st = i < styles.size() ? styles[i] : PrimitiveStyle{};
        const int thickness = std::max(1, static_cast<int>(std::lround(st.stroke_width)));
        if (st.opacity >= 0.999) {
            draw_primitive(out, prims[i], st.color, thickness, st.filled);
        } else {
            cv::Mat overlay = out.clone();
            draw_primitive(overlay, prims[i], st.color, thickness, st.filled);
            cv::addWeighted(overlay, st.opacity, out, 1.0 - st.opacity, 0.0, out);
        }
        if (stroke_mask) {
            draw_primitive(*stroke_mask, prims[i], cv::Scalar(255), thickness, st.filled);
        }
    }
    return out;
}

cv::Mat degrade(const cv::Mat& img, const GenConfig& cfg, std::mt19937_64& rng,
                const cv::Mat& background) {
    cv::Mat out = img.clone();
    // 1. Gaussian blur
    const double sigma = uni(rng, cfg.blur_sigma_min, cfg.blur_sigma_max);
    if (sigma > 0.01) {
        const int k = 2 * static_cast<int>(std::ceil(3 * sigma)) + 1;
        cv::GaussianBlur(out, out, {k, k}, sigma);
    }
    // 2. translucent noise shapes
    const int n_shapes = cfg.noise_shapes_max > 0 ? unii(rng, 0, cfg.noise_shapes_max) : 0;
    for (int i = 0; i < n_shapes; ++i) {
        cv::Mat overlay = out.clone();
        const cv::Scalar col(uni(rng, 0, 255), uni(rng, 0, 255), uni(rng, 0, 255));
        if (bern(rng, 0.5)) {
            std::vector<cv::Point> poly;
            const int cx = unii(rng, 0, out.cols - 1), cy = unii(rng, 0, out.rows - 1);
            const int nv = unii(rng, 3, 6);
            for (int v = 0; v < nv; ++v)
                poly.emplace_back(cx + unii(rng, -40, 40), cy + unii(rng, -40, 40));
            cv::fillConvexPoly(overlay, poly, col, cv::LINE_AA);
        } else {
            cv::ellipse(overlay, {unii(rng, 0, out.cols - 1), unii(rng, 0, out.rows - 1)},
                        {unii(rng, 4, 40), unii(rng, 4, 40)}, uni(rng, 0, 180), 0, 360, col,
                        cv::FILLED, cv::LINE_AA);
        }
        const double alpha = uni(rng, 0.05, 0.4);
        cv::addWeighted(overlay, alpha, out, 1 - alpha, 0, out);
    }
    // 3. random down/up resize
    if (cfg.resize_max > cfg.resize_min || cfg.resize_min != 1.0) {
        const double f = uni(rng, cfg.resize_min, cfg.resize_max);
        if (std::abs(f - 1.0) > 0.01) {
            cv::Mat small;
            cv::resize(out, small,
                       {std::max(8, static_cast<int>(out.cols * f)),
                        std::max(8, static_cast<int>(out.rows * f))},
                       0, 0, f < 1 ? cv::INTER_AREA : cv::INTER_LINEAR);
            cv::resize(small, out, img.size(), 0, 0, cv::INTER_LINEAR);
        }
    }
    // 4. chipping: replace small regions with background patches
    const int n_chips = cfg.chips_max > 0 ? unii(rng, 0, cfg.chips_max) : 0;
    std::vector<cv::Rect> placed;
    for (int i = 0; i < n_chips; ++i) {
        for (int t = 0; t < 200; ++t) {
            const int cw = unii(rng, cfg.chip_size / 2, cfg.chip_size);
            const int ch = unii(rng, cfg.chip_size / 2, cfg.chip_size);
            const cv::Rect rect(unii(rng, 0, std::max(0, out.cols - cw - 1)),
                                unii(rng, 0, std::max(0, out.rows - ch - 1)), cw, ch);
            bool overlap = false;
            for (const auto& r : placed) overlap = overlap || (rect & r).area() > 0;
            if (overlap) continue;
            background(rect).copyTo(out(rect));
            placed.push_back(rect);
            break;
        }
    }
    return out;
}

std::uint64_t sample_seed(std::uint64_t global_seed, std::uint64_t index) {
    // splitmix64 over the pair
    std::uint64_t z = global_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SyntheticSample generate_sample(const GenConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SyntheticSample s;
    s.seed = seed;
    const int side = unii(rng, cfg.image_min, cfg.image_max);
    s.primitives = sample_layout(cfg, rng);
    for (const auto& p : s.primitives) {
        PrimitiveStyle st;
        st.stroke_width = uni(rng, cfg.stroke_min, cfg.stroke_max);
        const double v = cfg.dark_strokes_only ? uni(rng, 5, 60) : uni(rng, 5, 120);
        st.color = cv::Scalar(v + uni(rng, -5, 5), v + uni(rng, -5, 5), v + uni(rng, -5, 5));
        st.opacity = uni(rng, cfg.opacity_min, cfg.opacity_max);
        st.filled = p.cls == PrimitiveClass::Circle && bern(rng, cfg.p_filled_circle);
        s.styles.push_back(st);
    }
    cv::Mat background = make_background(cfg, side, side, rng);
    add_clutter(background, cfg, rng);
    s.image = render(s.primitives, s.styles, background);
    if (cfg.degrade) s.image = degrade(s.image, cfg, rng, background);
    return s;
}

SyntheticSample augment(const SyntheticSample& sample, const AugmentConfig& cfg,
                        std::mt19937_64& rng) {
    SyntheticSample out = sample;
    out.image = sample.image.clone();
    if (!cfg.enabled) return out;

    // instance-aware square crop, rejected while it would cut a primitive
    if (bern(rng, cfg.p_crop) && !out.primitives.empty()) {
        const int minside = std::min(out.image.cols, out.image.rows);
        for (int t = 0; t < 100; ++t) {
            const int side =
                std::max(32, static_cast<int>(uni(rng, cfg.crop_min_frac, 1.0) * minside));
            const int x0 = unii(rng, 0, out.image.cols - side);
            const int y0 = unii(rng, 0, out.image.rows - side);
            geom::Transform crop;
            crop.kind = geom::Transform::Kind::Crop;
            crop.x0 = static_cast<double>(x0) / out.image.cols;
            crop.y0 = static_cast<double>(y0) / out.image.rows;
            crop.w = static_cast<double>(side) / out.image.cols;
            crop.h = static_cast<double>(side) / out.image.rows;
            try {
                std::vector<Primitive> moved;
                moved.reserve(out.primitives.size());
                for (const auto& p : out.primitives)
                    moved.push_back(geom::transform_primitive(p, crop));
                out.primitives = std::move(moved);
                out.image = out.image(cv::Rect(x0, y0, side, side)).clone();
                break;
            } catch (const geom::CropCutsPrimitive&) {
                continue;  // falls back to the full frame after 100 rejections
            }
        }
    }

    // scale jitter: shortest side in [short_min, short_max], longest capped
    {
        const int shortest = std::min(out.image.cols, out.image.rows);
        const int longest = std::max(out.image.cols, out.image.rows);
        const double target = uni(rng, cfg.short_min, cfg.short_max);
        double scale = target / shortest;
        if (longest * scale > cfg.long_max) scale = static_cast<double>(cfg.long_max) / longest;
        const int nw = std::max(8, static_cast<int>(std::lround(out.image.cols * scale)));
        const int nh = std::max(8, static_cast<int>(std::lround(out.image.rows * scale)));
        cv::Mat resized;
        cv::resize(out.image, resized, {nw, nh}, 0, 0,
                   scale < 1 ? cv::INTER_AREA : cv::INTER_LINEAR);
        out.image = resized;  // normalized params unchanged
    }

    if (bern(rng, cfg.p_hflip)) {
        cv::flip(out.image, out.image, 1);
        geom::Transform t;
        t.kind = geom::Transform::Kind::HFlip;
        for (auto& p : out.primitives) p = geom::transform_primitive(p, t);
    }
    if (bern(rng, cfg.p_vflip)) {
        cv::flip(out.image, out.image, 0);
        geom::Transform t;
        t.kind = geom::Transform::Kind::VFlip;
        for (auto& p : out.primitives) p = geom::transform_primitive(p, t);
    }
    if (bern(rng, cfg.p_rot90)) {
        const int k = unii(rng, 1, 3);
        for (int i = 0; i < k; ++i)
            cv::rotate(out.image, out.image, cv::ROTATE_90_COUNTERCLOCKWISE);
        geom::Transform t;
        t.kind = geom::Transform::Kind::Rot90;
        t.quarter_turns = k;
        for (auto& p : out.primitives) p = geom::transform_primitive(p, t);
    }
    return out;
}

double stroke_coverage(const Primitive& p, const cv::Mat& mask, int count, int radius) {
    const auto pts = geom::sample_points(p, count);
    int hit = 0;
    for (const auto& q : pts) {
        const int cx = static_cast<int>(std::lround(q.x * mask.cols - 0.5));
        const int cy = static_cast<int>(std::lround(q.y * mask.rows - 0.5));
        bool found = false;
        for (int dy = -radius; dy <= radius && !found; ++dy) {
            for (int dx = -radius; dx <= radius && !found; ++dx) {
                const int x = cx + dx, y = cy + dy;
                if (x < 0 || y < 0 || x >= mask.cols || y >= mask.rows) continue;
                found = mask.at<uchar>(y, x) > 0;
            }
        }
        hit += found ? 1 : 0;
    }
    return static_cast<double>(hit) / count;
}

}  // namespace rastervec::synth
