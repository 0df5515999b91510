#include <cmath>

#include <opencv2/core.hpp>

#include "rastervec/model.hpp"

// Convolutional backbone producing a 4-level pyramid at strides
// 8/16/32/64 (single stride-8 level when multi_scale is off). Weights
// are trained from scratch; no pretrained initialization is used.

namespace rastervec::model::detail {

using nn::Graph;
using nn::Mat;
using nn::ParamStore;
using nn::Var;

namespace {

struct ConvSpec {
    std::string name;
    int cin, cout, k, stride, pad;
};

std::vector<ConvSpec> backbone_plan(const ModelConfig& cfg) {
    const int c = cfg.hidden;
    std::vector<ConvSpec> plan = {
        {"bb.stem1", 3, c / 4, 3, 2, 1},        // stride 2
        {"bb.stem2", c / 4, c / 2, 3, 2, 1},    // stride 4
        {"bb.l0", c / 2, c, 3, 2, 1},           // stride 8
        {"bb.l1", c, c, 3, 2, 1},               // stride 16
        {"bb.l2", c, c, 3, 2, 1},               // stride 32
        {"bb.l3", c, c, 3, 2, 1},               // stride 64
    };
    if (cfg.backbone == "deep") {
        // an extra residual 3x3 stage per level
        for (int l = 0; l < 4; ++l) {
            plan.push_back({"bb.res" + std::to_string(l) + "a", c, c, 3, 1, 1});
            plan.push_back({"bb.res" + std::to_string(l) + "b", c, c, 3, 1, 1});
        }
    }
    return plan;
}

double he_std(int fan_in) { return std::sqrt(2.0 / fan_in); }

}  // namespace

void create_backbone_params(const ModelConfig& cfg, ParamStore& store, std::mt19937_64& rng) {
    for (const auto& s : backbone_plan(cfg)) {
        store.create(s.name + ".w", s.k * s.k * s.cin, s.cout, he_std(s.k * s.k * s.cin), rng,
                     true);
        store.create(s.name + ".b", 1, s.cout, 0.0, rng, true);
    }
    for (int l = 0; l < cfg.levels(); ++l) {
        const std::string p = "bb.proj" + std::to_string(l);
        store.create(p + ".w", cfg.hidden, cfg.hidden, he_std(cfg.hidden), rng, true);
        store.create(p + ".b", 1, cfg.hidden, 0.0, rng, true);
        store.create(p + ".g", 1, cfg.hidden, 0.0, rng, true).v.setOnes();
        store.create(p + ".beta", 1, cfg.hidden, 0.0, rng, true);
    }
}

FeaturePyramid backbone_forward(const ModelConfig& cfg, ParamStore& store, Graph& g,
                                const cv::Mat& image) {
    const int h = image.rows, w = image.cols;
    Mat x(h * w, 3);
    for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
            const auto px = image.at<cv::Vec3b>(y, xx);
            for (int c = 0; c < 3; ++c) x(y * w + xx, c) = px[c] / 255.0 - 0.5;
        }
    }
    auto conv = [&](const Var& in, const std::string& name, int k, int stride, int pad, int& ch,
                    int& cw) {
        const Var wv = nn::param_leaf(g, *store.find(name + ".w"));
        const Var bv = nn::param_leaf(g, *store.find(name + ".b"));
        return nn::conv2d(in, ch, cw, wv, bv, k, stride, pad, &ch, &cw);
    };

    int ch = h, cw = w;
    Var t = g.leaf(std::move(x));
    t = nn::relu(conv(t, "bb.stem1", 3, 2, 1, ch, cw));
    t = nn::relu(conv(t, "bb.stem2", 3, 2, 1, ch, cw));

    FeaturePyramid pyr;
    Var cur = t;
    for (int l = 0; l < 4; ++l) {
        cur = nn::relu(conv(cur, "bb.l" + std::to_string(l), 3, 2, 1, ch, cw));
        if (cfg.backbone == "deep") {
            int rh = ch, rw = cw;
            Var r = nn::relu(conv(cur, "bb.res" + std::to_string(l) + "a", 3, 1, 1, rh, rw));
            rh = ch;
            rw = cw;
            r = conv(r, "bb.res" + std::to_string(l) + "b", 3, 1, 1, rh, rw);
            cur = nn::relu(nn::add(cur, r));
        }
        if (l < cfg.levels()) {
            const std::string p = "bb.proj" + std::to_string(l);
            Var f = nn::linear(cur, nn::param_leaf(g, *store.find(p + ".w")),
                               nn::param_leaf(g, *store.find(p + ".b")));
            f = nn::layernorm(f, nn::param_leaf(g, *store.find(p + ".g")),
                              nn::param_leaf(g, *store.find(p + ".beta")));
            pyr.feats.push_back(f);
            pyr.hs.push_back(ch);
            pyr.ws.push_back(cw);
        }
        if (static_cast<int>(pyr.feats.size()) == cfg.levels()) break;
    }
    return pyr;
}

}  // namespace rastervec::model::detail
