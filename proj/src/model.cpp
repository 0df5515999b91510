#include "rastervec/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rastervec::model {

using geom::BBox;
using geom::Primitive;
using geom::PrimitiveClass;
using nn::Graph;
using nn::Mat;
using nn::ParamStore;
using nn::Var;

namespace detail {
void create_backbone_params(const ModelConfig& cfg, ParamStore& store, std::mt19937_64& rng);
FeaturePyramid backbone_forward(const ModelConfig& cfg, ParamStore& store, Graph& g,
                                const cv::Mat& image);
}  // namespace detail

// ---- refinement math ----

double inv_sigmoid(double p, double eps) {
    p = std::clamp(p, eps, 1.0 - eps);
    return std::log(p / (1.0 - p));
}

double refine_scalar(double base, double delta, double eps) {
    return 1.0 / (1.0 + std::exp(-(delta + inv_sigmoid(base, eps))));
}

Eigen::MatrixXd refine_mat(const Eigen::MatrixXd& base, const Eigen::MatrixXd& delta,
                           double eps) {
    Eigen::MatrixXd out(base.rows(), base.cols());
    for (Eigen::Index i = 0; i < base.size(); ++i)
        out(i) = refine_scalar(base(i), delta(i), eps);
    return out;
}

Var refine(Graph& g, const Eigen::MatrixXd& base, const Var& delta, double eps) {
    Mat logits(base.rows(), base.cols());
    for (Eigen::Index i = 0; i < base.size(); ++i) logits(i) = inv_sigmoid(base(i), eps);
    return nn::sigmoid(nn::add_const(delta, logits));
}

// ---- parameter-vector layout ----

Eigen::RowVectorXd primitive_to_s14(const Primitive& p) {
    Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(geom::kParamTotal);
    const int off = geom::param_offset(p.cls);
    for (int i = 0; i < p.n_params(); ++i) s(off + i) = p.params[i];
    return s;
}

Primitive s14_to_primitive(PrimitiveClass cls, const Eigen::RowVectorXd& s) {
    Primitive p;
    p.cls = cls;
    const int off = geom::param_offset(cls);
    for (int i = 0; i < p.n_params(); ++i) p.params[i] = s(off + i);
    return p;
}

Eigen::RowVectorXd bbox_to_s4(const BBox& b) {
    Eigen::RowVectorXd s(4);
    s << b.cx, b.cy, b.w, b.h;
    return s;
}

BBox s4_to_bbox(const Eigen::RowVectorXd& s) { return BBox{s(0), s(1), s(2), s(3)}; }

// ---- feature pyramid ----

int FeaturePyramid::total_tokens() const {
    int n = 0;
    for (size_t l = 0; l < hs.size(); ++l) n += hs[l] * ws[l];
    return n;
}

// ---- multi-scale deformable attention ----

MsdParams make_msd_params(const std::string& prefix, const ModelConfig& cfg, ParamStore& store,
                          std::mt19937_64& rng, bool backbone) {
    const int c = cfg.hidden, hlk = cfg.heads * cfg.levels() * cfg.points;
    MsdParams p;
    p.w_off = &store.create(prefix + ".woff", c, hlk * 2, 0.0, rng, backbone);
    p.b_off = &store.create(prefix + ".boff", 1, hlk * 2, 0.0, rng, backbone);
    // offset bias: one direction per head, growing radius per point
    for (int h = 0; h < cfg.heads; ++h) {
        const double ang = 2.0 * M_PI * h / cfg.heads;
        for (int l = 0; l < cfg.levels(); ++l) {
            for (int k = 0; k < cfg.points; ++k) {
                const int i = ((h * cfg.levels() + l) * cfg.points + k) * 2;
                const double r = (k + 1.0) / cfg.points;
                p.b_off->v(0, i) = std::cos(ang) * r;
                p.b_off->v(0, i + 1) = std::sin(ang) * r;
            }
        }
    }
    p.w_attn = &store.create(prefix + ".wattn", c, hlk, 0.0, rng, backbone);
    p.b_attn = &store.create(prefix + ".battn", 1, hlk, 0.0, rng, backbone);
    const double xs = std::sqrt(1.0 / c);
    p.w_val = &store.create(prefix + ".wval", c, c, xs, rng, backbone);
    p.b_val = &store.create(prefix + ".bval", 1, c, 0.0, rng, backbone);
    p.w_out = &store.create(prefix + ".wout", c, c, xs, rng, backbone);
    p.b_out = &store.create(prefix + ".bout", 1, c, 0.0, rng, backbone);
    return p;
}

Var msd_attention(Graph& g, const MsdParams& p, const ModelConfig& cfg,
                  const FeaturePyramid& values, const Var& queries,
                  const Eigen::MatrixXd& ref_boxes) {
    const int L = static_cast<int>(values.feats.size());
    const int H = cfg.heads, K = cfg.points, dh = cfg.head_dim();
    const Var off = nn::linear(queries, nn::param_leaf(g, *p.w_off), nn::param_leaf(g, *p.b_off));
    const Var attn =
        nn::linear(queries, nn::param_leaf(g, *p.w_attn), nn::param_leaf(g, *p.b_attn));

    std::vector<Var> vals(L);
    for (int l = 0; l < L; ++l)
        vals[l] = nn::linear(values.feats[l], nn::param_leaf(g, *p.w_val),
                             nn::param_leaf(g, *p.b_val));

    const Var half_w = g.constant(0.5 * ref_boxes.col(2));
    const Var half_h = g.constant(0.5 * ref_boxes.col(3));
    const Mat cx = ref_boxes.col(0), cy = ref_boxes.col(1);

    std::vector<Var> heads;
    heads.reserve(H);
    for (int h = 0; h < H; ++h) {
        const Var ah = nn::softmax_rows(nn::slice_cols(attn, h * L * K, L * K));
        std::vector<Var> acc;
        acc.reserve(L * K);
        for (int l = 0; l < L; ++l) {
            const Var vh = nn::slice_cols(vals[l], h * dh, dh);
            for (int k = 0; k < K; ++k) {
                const int oi = ((h * L + l) * K + k) * 2;
                const Var xloc =
                    nn::add_const(nn::mul_colvec(nn::slice_cols(off, oi, 1), half_w), cx);
                const Var yloc =
                    nn::add_const(nn::mul_colvec(nn::slice_cols(off, oi + 1, 1), half_h), cy);
                const Var s = nn::bilinear_sample(vh, values.hs[l], values.ws[l], xloc, yloc);
                acc.push_back(nn::mul_colvec(s, nn::slice_cols(ah, l * K + k, 1)));
            }
        }
        heads.push_back(nn::add_n(acc));
    }
    return nn::linear(nn::concat_cols(heads), nn::param_leaf(g, *p.w_out),
                      nn::param_leaf(g, *p.b_out));
}

// ---- denoising ----

DnBatch make_denoise_batch(const std::vector<Primitive>& gts, const DnConfig& cfg,
                           std::mt19937_64& rng) {
    DnBatch b;
    if (cfg.groups <= 0 || gts.empty()) return b;
    b.groups = cfg.groups;
    const int n = static_cast<int>(gts.size());
    b.per_group = 2 * n;
    const int total = b.total();
    b.init_boxes.resize(total, 4);
    b.init_params.resize(total, geom::kParamTotal);
    b.cls.resize(total);
    b.gt_index.resize(total);
    b.positive.resize(total);
    std::uniform_real_distribution<double> u01(0.0, 1.0), u11(-1.0, 1.0);
    auto clampv = [](double v) { return std::clamp(v, 1e-3, 1.0 - 1e-3); };
    for (int grp = 0; grp < b.groups; ++grp) {
        for (int half = 0; half < 2; ++half) {
            for (int i = 0; i < n; ++i) {
                const int row = grp * b.per_group + half * n + i;
                const bool pos = half == 0;
                const double lam = pos ? u01(rng) * cfg.lambda_pos
                                       : cfg.lambda_pos +
                                             u01(rng) * (cfg.lambda_neg - cfg.lambda_pos);
                const BBox box = geom::bbox_of(gts[i]);
                b.init_boxes(row, 0) = clampv(box.cx + u11(rng) * lam * box.w / 2);
                b.init_boxes(row, 1) = clampv(box.cy + u11(rng) * lam * box.h / 2);
                b.init_boxes(row, 2) = clampv(box.w * (1.0 + u11(rng) * lam));
                b.init_boxes(row, 3) = clampv(box.h * (1.0 + u11(rng) * lam));
                Eigen::RowVectorXd s = primitive_to_s14(gts[i]);
                for (int j = 0; j < s.size(); ++j)
                    s(j) = clampv(s(j) + u11(rng) * lam * 0.1);
                b.init_params.row(row) = s;
                int cls = static_cast<int>(gts[i].cls);
                if (u01(rng) < cfg.p_flip) cls = (cls + 1 + (u01(rng) < 0.5)) % 3;
                b.cls[row] = cls;
                b.gt_index[row] = i;
                b.positive[row] = pos ? 1 : 0;
            }
        }
    }
    return b;
}

Eigen::MatrixXd denoise_attention_mask(int dn_total, int per_group, int num_matching) {
    const int n = dn_total + num_matching;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    const double blocked = -1e9;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dn_total; ++j) {
            if (i >= dn_total) {
                m(i, j) = blocked;  // matching queries never see dn content
            } else if (i / per_group != j / per_group) {
                m(i, j) = blocked;  // dn groups are mutually invisible
            }
        }
    }
    return m;
}

// ---- model ----

namespace {

double xavier(int fan_in) { return std::sqrt(1.0 / fan_in); }

constexpr double kFocalBias = -4.595119850134589;  // logit of prior 0.01

struct Mlp2 {
    nn::Param *w1, *b1, *w2, *b2;
};

Mlp2 make_mlp2(const std::string& prefix, int cin, int chid, int cout, ParamStore& store,
               std::mt19937_64& rng, bool zero_last = true) {
    Mlp2 m;
    m.w1 = &store.create(prefix + ".w1", cin, chid, std::sqrt(2.0 / cin), rng);
    m.b1 = &store.create(prefix + ".b1", 1, chid, 0.0, rng);
    m.w2 = &store.create(prefix + ".w2", chid, cout, zero_last ? 0.0 : xavier(chid), rng);
    m.b2 = &store.create(prefix + ".b2", 1, cout, 0.0, rng);
    return m;
}

Var run_mlp2(Graph& g, const Mlp2& m, const Var& x) {
    return nn::linear(nn::relu(nn::linear(x, nn::param_leaf(g, *m.w1), nn::param_leaf(g, *m.b1))),
                      nn::param_leaf(g, *m.w2), nn::param_leaf(g, *m.b2));
}

void make_layernorm(const std::string& name, int c, ParamStore& store, std::mt19937_64& rng) {
    store.create(name + ".g", 1, c, 0.0, rng).v.setOnes();
    store.create(name + ".beta", 1, c, 0.0, rng);
}

Var run_layernorm(Graph& g, ParamStore& store, const std::string& name, const Var& x) {
    return nn::layernorm(x, nn::param_leaf(g, *store.find(name + ".g")),
                         nn::param_leaf(g, *store.find(name + ".beta")));
}

void make_ffn(const std::string& prefix, const ModelConfig& cfg, ParamStore& store,
              std::mt19937_64& rng) {
    store.create(prefix + ".w1", cfg.hidden, cfg.ffn, std::sqrt(2.0 / cfg.hidden), rng);
    store.create(prefix + ".b1", 1, cfg.ffn, 0.0, rng);
    store.create(prefix + ".w2", cfg.ffn, cfg.hidden, xavier(cfg.ffn), rng);
    store.create(prefix + ".b2", 1, cfg.hidden, 0.0, rng);
}

Var run_ffn(Graph& g, ParamStore& store, const std::string& prefix, const Var& x) {
    Var h = nn::relu(nn::linear(x, nn::param_leaf(g, *store.find(prefix + ".w1")),
                                nn::param_leaf(g, *store.find(prefix + ".b1"))));
    return nn::linear(h, nn::param_leaf(g, *store.find(prefix + ".w2")),
                      nn::param_leaf(g, *store.find(prefix + ".b2")));
}

// standard multi-head self-attention with an optional additive mask
Var self_attention(Graph& g, ParamStore& store, const std::string& prefix,
                   const ModelConfig& cfg, const Var& x, const Var& x_pos,
                   const Eigen::MatrixXd* mask) {
    const int dh = cfg.head_dim();
    const Var q = nn::linear(x_pos, nn::param_leaf(g, *store.find(prefix + ".wq")),
                             nn::param_leaf(g, *store.find(prefix + ".bq")));
    const Var k = nn::linear(x_pos, nn::param_leaf(g, *store.find(prefix + ".wk")),
                             nn::param_leaf(g, *store.find(prefix + ".bk")));
    const Var v = nn::linear(x, nn::param_leaf(g, *store.find(prefix + ".wv")),
                             nn::param_leaf(g, *store.find(prefix + ".bv")));
    std::vector<Var> heads;
    for (int h = 0; h < cfg.heads; ++h) {
        const Var qh = nn::slice_cols(q, h * dh, dh);
        const Var kh = nn::slice_cols(k, h * dh, dh);
        const Var vh = nn::slice_cols(v, h * dh, dh);
        Var scores = nn::scale(nn::matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
        const Var attn = mask ? nn::softmax_rows_masked(scores, *mask) : nn::softmax_rows(scores);
        heads.push_back(nn::matmul(attn, vh));
    }
    return nn::linear(nn::concat_cols(heads), nn::param_leaf(g, *store.find(prefix + ".wo")),
                      nn::param_leaf(g, *store.find(prefix + ".bo")));
}

Mat token_positions(const FeaturePyramid& pyr, int dim) {
    Mat xy(pyr.total_tokens(), 2);
    int row = 0;
    for (size_t l = 0; l < pyr.hs.size(); ++l) {
        for (int y = 0; y < pyr.hs[l]; ++y)
            for (int x = 0; x < pyr.ws[l]; ++x, ++row) {
                xy(row, 0) = (x + 0.5) / pyr.ws[l];
                xy(row, 1) = (y + 0.5) / pyr.hs[l];
            }
    }
    return nn::sinusoid_embed(xy, dim / 2);
}

double prior_size(int level) { return 0.05 * (1 << level); }

constexpr int kPosSinDim = 16;  // sinusoid dims per positional scalar

}  // namespace

Var Model::embed_positional_query(Graph& g, const Eigen::MatrixXd& box_and_params) const {
    auto& store = *store_;
    const Mat raw = nn::sinusoid_embed(box_and_params, kPosSinDim);
    Var h = nn::relu(nn::linear(g.constant(raw), nn::param_leaf(g, *store.find("qpos.w1")),
                                nn::param_leaf(g, *store.find("qpos.b1"))));
    return nn::linear(h, nn::param_leaf(g, *store.find("qpos.w2")),
                      nn::param_leaf(g, *store.find("qpos.b2")));
}

Model::Model(const ModelConfig& cfg, ParamStore& store, std::mt19937_64& rng)
    : cfg_(cfg), store_(&store) {
    const int c = cfg.hidden;
    detail::create_backbone_params(cfg, store, rng);
    store.create("lvl_embed", cfg.levels(), c, 0.02, rng);

    for (int i = 0; i < cfg.enc_layers; ++i) {
        const std::string p = "enc" + std::to_string(i);
        make_msd_params(p + ".msd", cfg, store, rng);
        make_layernorm(p + ".ln1", c, store, rng);
        make_layernorm(p + ".ln2", c, store, rng);
        make_ffn(p + ".ffn", cfg, store, rng);
    }

    store.create("enc_cls.w", c, geom::kNumClasses, xavier(c), rng);
    store.create("enc_cls.b", 1, geom::kNumClasses, 0.0, rng).v.setConstant(kFocalBias);
    make_mlp2("enc_box", c, c, 4, store, rng);
    make_mlp2("enc_par", c, c, geom::kParamTotal, store, rng);

    store.create("tgt_embed", cfg.num_queries, c, 0.02, rng);
    store.create("ref_embed", cfg.num_queries, 4, 1.0, rng);
    store.create("dn_embed", geom::kNumClasses, c, 0.02, rng);
    const int pos_in = (4 + geom::kParamTotal) * kPosSinDim;
    store.create("qpos.w1", pos_in, c, std::sqrt(2.0 / pos_in), rng);
    store.create("qpos.b1", 1, c, 0.0, rng);
    store.create("qpos.w2", c, c, xavier(c), rng);
    store.create("qpos.b2", 1, c, 0.0, rng);

    for (int i = 0; i < cfg.dec_layers; ++i) {
        const std::string p = "dec" + std::to_string(i);
        for (const char* nm : {"wq", "wk", "wv", "wo"})
            store.create(p + ".sa." + nm, c, c, xavier(c), rng);
        for (const char* nm : {"bq", "bk", "bv", "bo"})
            store.create(p + ".sa." + nm, 1, c, 0.0, rng);
        make_layernorm(p + ".ln1", c, store, rng);
        make_msd_params(p + ".msd", cfg, store, rng);
        make_layernorm(p + ".ln2", c, store, rng);
        make_ffn(p + ".ffn", cfg, store, rng);
        make_layernorm(p + ".ln3", c, store, rng);
    }

    store.create("dec_cls.w", c, geom::kNumClasses, xavier(c), rng);
    store.create("dec_cls.b", 1, geom::kNumClasses, 0.0, rng).v.setConstant(kFocalBias);
    make_mlp2("dec_box", c, c, 4, store, rng);
    make_mlp2("dec_par", c, c, geom::kParamTotal, store, rng);
}

FeaturePyramid Model::run_backbone(Graph& g, const cv::Mat& image) const {
    return detail::backbone_forward(cfg_, *store_, g, image);
}

Var Model::encode(Graph& g, FeaturePyramid& pyr) const {
    auto& store = *store_;
    Var tokens = pyr.feats.size() == 1 ? pyr.feats[0] : nn::concat_rows(pyr.feats);
    const Mat pos = token_positions(pyr, cfg_.hidden);

    std::vector<int> level_of;
    Mat ref_boxes(pyr.total_tokens(), 4);
    {
        int row = 0;
        for (size_t l = 0; l < pyr.hs.size(); ++l) {
            const double s = prior_size(static_cast<int>(l));
            for (int y = 0; y < pyr.hs[l]; ++y)
                for (int x = 0; x < pyr.ws[l]; ++x, ++row) {
                    ref_boxes(row, 0) = (x + 0.5) / pyr.ws[l];
                    ref_boxes(row, 1) = (y + 0.5) / pyr.hs[l];
                    ref_boxes(row, 2) = s;
                    ref_boxes(row, 3) = s;
                    level_of.push_back(static_cast<int>(l));
                }
        }
    }
    const Var lvl = nn::gather_rows(nn::param_leaf(g, *store.find("lvl_embed")), level_of);
    const Var pos_total = nn::add_const(lvl, pos);

    for (int i = 0; i < cfg_.enc_layers; ++i) {
        const std::string p = "enc" + std::to_string(i);
        FeaturePyramid view;
        view.hs = pyr.hs;
        view.ws = pyr.ws;
        int row = 0;
        for (size_t l = 0; l < pyr.hs.size(); ++l) {
            const int n = pyr.hs[l] * pyr.ws[l];
            view.feats.push_back(nn::slice_rows(tokens, row, n));
            row += n;
        }
        const Var q = nn::add(tokens, pos_total);
        const MsdParams msd{store.find(p + ".msd.woff"),  store.find(p + ".msd.boff"),
                            store.find(p + ".msd.wattn"), store.find(p + ".msd.battn"),
                            store.find(p + ".msd.wval"),  store.find(p + ".msd.bval"),
                            store.find(p + ".msd.wout"),  store.find(p + ".msd.bout")};
        tokens = run_layernorm(g, store, p + ".ln1",
                               nn::add(tokens, msd_attention(g, msd, cfg_, view, q, ref_boxes)));
        tokens = run_layernorm(g, store, p + ".ln2",
                               nn::add(tokens, run_ffn(g, store, p + ".ffn", tokens)));
    }
    return tokens;
}

ModelOutput Model::forward(Graph& g, const cv::Mat& image, const DnBatch* dn) const {
    auto& store = *store_;
    if (std::min(image.rows, image.cols) < 16)
        throw ImageTooSmall("input side " + std::to_string(std::min(image.rows, image.cols)) +
                            " px is below the 16 px minimum");
    FeaturePyramid pyr = run_backbone(g, image);
    const Var memory = encode(g, pyr);
    const int n_tokens = pyr.total_tokens();

    // encoder priors: token centers with level-dependent sizes
    Mat priors(n_tokens, 4);
    {
        int row = 0;
        for (size_t l = 0; l < pyr.hs.size(); ++l) {
            const double s = prior_size(static_cast<int>(l));
            for (int y = 0; y < pyr.hs[l]; ++y)
                for (int x = 0; x < pyr.ws[l]; ++x, ++row)
                    priors.row(row) << (x + 0.5) / pyr.ws[l], (y + 0.5) / pyr.hs[l], s, s;
        }
    }

    // query selection heads over all tokens
    const Var enc_logits = nn::linear(memory, nn::param_leaf(g, *store.find("enc_cls.w")),
                                      nn::param_leaf(g, *store.find("enc_cls.b")));
    const Mlp2 enc_box{store.find("enc_box.w1"), store.find("enc_box.b1"),
                       store.find("enc_box.w2"), store.find("enc_box.b2")};
    const Mlp2 enc_par{store.find("enc_par.w1"), store.find("enc_par.b1"),
                       store.find("enc_par.w2"), store.find("enc_par.b2")};
    const Var enc_box_delta = run_mlp2(g, enc_box, memory);
    const Var enc_par_delta = run_mlp2(g, enc_par, memory);

    // top-N tokens by best class logit
    if (cfg_.num_queries > n_tokens)
        throw TokenShortage("N=" + std::to_string(cfg_.num_queries) + " queries but only " +
                            std::to_string(n_tokens) + " encoder tokens");
    const int N = cfg_.num_queries;
    std::vector<int> idx(n_tokens);
    std::iota(idx.begin(), idx.end(), 0);
    const Mat& lg = enc_logits->v;
    std::partial_sort(idx.begin(), idx.begin() + N, idx.end(), [&](int a, int b) {
        return lg.row(a).maxCoeff() > lg.row(b).maxCoeff();
    });
    idx.resize(N);

    Mat sel_priors(N, 4);
    for (int i = 0; i < N; ++i) sel_priors.row(i) = priors.row(idx[i]);

    ModelOutput out;
    out.encoder.logits = nn::gather_rows(enc_logits, idx);
    out.encoder.boxes = refine(g, sel_priors, nn::gather_rows(enc_box_delta, idx));
    out.encoder.params = refine(g, Mat::Constant(N, geom::kParamTotal, 0.5),
                                nn::gather_rows(enc_par_delta, idx));

    if (cfg_.encoder_only) {
        out.layers.push_back(out.encoder);
        return out;
    }

    // decoder initial state (detached from the selection heads)
    Mat ref_boxes, ref_params;
    Var content;
    if (cfg_.query_mode == "none") {
        // free anchors, fixed at their (sigmoided) initial values
        const Mat raw = store.find("ref_embed")->v;
        ref_boxes.resize(cfg_.num_queries, 4);
        for (int i = 0; i < raw.rows(); ++i)
            for (int j = 0; j < 4; ++j) ref_boxes(i, j) = 1.0 / (1.0 + std::exp(-raw(i, j)));
        ref_params = Mat::Constant(cfg_.num_queries, geom::kParamTotal, 0.5);
        content = nn::param_leaf(g, *store.find("tgt_embed"));
    } else {
        ref_boxes = out.encoder.boxes->v;
        ref_params = out.encoder.params->v;
        if (cfg_.query_mode == "pure") {
            // content initialized from the selected token features (detached)
            Mat sel(N, cfg_.hidden);
            for (int i = 0; i < N; ++i) sel.row(i) = memory->v.row(idx[i]);
            content = g.constant(sel);
        } else {
            content = nn::param_leaf(g, *store.find("tgt_embed"));
        }
    }
    const Mat init_boxes = ref_boxes;

    // prepend denoising queries
    int dn_total = 0;
    std::unique_ptr<Eigen::MatrixXd> mask;
    if (dn && dn->total() > 0) {
        dn_total = dn->total();
        content = nn::concat_rows(
            {nn::gather_rows(nn::param_leaf(g, *store.find("dn_embed")), dn->cls), content});
        Mat all_boxes(dn_total + ref_boxes.rows(), 4);
        all_boxes << dn->init_boxes, ref_boxes;
        ref_boxes = all_boxes;
        Mat all_params(dn_total + ref_params.rows(), geom::kParamTotal);
        all_params << dn->init_params, ref_params;
        ref_params = all_params;
        mask = std::make_unique<Eigen::MatrixXd>(denoise_attention_mask(
            dn_total, dn->per_group, static_cast<int>(content->v.rows()) - dn_total));
    }

    const Mlp2 dec_box{store.find("dec_box.w1"), store.find("dec_box.b1"),
                       store.find("dec_box.w2"), store.find("dec_box.b2")};
    const Mlp2 dec_par{store.find("dec_par.w1"), store.find("dec_par.b1"),
                       store.find("dec_par.w2"), store.find("dec_par.b2")};

    Var x = content;
    for (int i = 0; i < cfg_.dec_layers; ++i) {
        const std::string p = "dec" + std::to_string(i);
        // positional embedding of the current (b, s) estimate
        Mat bs(ref_boxes.rows(), 4 + geom::kParamTotal);
        bs << ref_boxes, ref_params;
        const Var qpos = embed_positional_query(g, bs);
        const Var x_pos = nn::add(x, qpos);
        x = run_layernorm(
            g, store, p + ".ln1",
            nn::add(x, self_attention(g, store, p + ".sa", cfg_, x, x_pos, mask.get())));
        const MsdParams msd{store.find(p + ".msd.woff"),  store.find(p + ".msd.boff"),
                            store.find(p + ".msd.wattn"), store.find(p + ".msd.battn"),
                            store.find(p + ".msd.wval"),  store.find(p + ".msd.bval"),
                            store.find(p + ".msd.wout"),  store.find(p + ".msd.bout")};
        FeaturePyramid view;
        view.hs = pyr.hs;
        view.ws = pyr.ws;
        int row = 0;
        for (size_t l = 0; l < pyr.hs.size(); ++l) {
            const int n = pyr.hs[l] * pyr.ws[l];
            view.feats.push_back(nn::slice_rows(memory, row, n));
            row += n;
        }
        x = run_layernorm(g, store, p + ".ln2",
                          nn::add(x, msd_attention(g, msd, cfg_, view, nn::add(x, qpos),
                                                   ref_boxes)));
        x = run_layernorm(g, store, p + ".ln3", nn::add(x, run_ffn(g, store, p + ".ffn", x)));

        LayerOutput lo;
        lo.logits = nn::linear(x, nn::param_leaf(g, *store.find("dec_cls.w")),
                               nn::param_leaf(g, *store.find("dec_cls.b")));
        const Var box_delta = run_mlp2(g, dec_box, x);
        const Var par_delta = run_mlp2(g, dec_par, x);
        if (cfg_.with_refinement) {
            lo.boxes = refine(g, ref_boxes, box_delta);
            lo.params = refine(g, ref_params, par_delta);
            ref_boxes = lo.boxes->v;   // detach at the layer boundary
            ref_params = lo.params->v;
        } else {
            Mat base = ref_boxes;  // fixed initial anchors, no iteration
            base.bottomRows(init_boxes.rows()) = init_boxes;
            lo.boxes = refine(g, base, box_delta);
            lo.params = refine(g, ref_params, par_delta);
        }

        if (dn_total > 0) {
            LayerOutput dn_lo;
            dn_lo.logits = nn::slice_rows(lo.logits, 0, dn_total);
            dn_lo.boxes = nn::slice_rows(lo.boxes, 0, dn_total);
            dn_lo.params = nn::slice_rows(lo.params, 0, dn_total);
            out.dn_layers.push_back(dn_lo);
            LayerOutput main;
            const int nm = static_cast<int>(lo.logits->v.rows()) - dn_total;
            main.logits = nn::slice_rows(lo.logits, dn_total, nm);
            main.boxes = nn::slice_rows(lo.boxes, dn_total, nm);
            main.params = nn::slice_rows(lo.params, dn_total, nm);
            out.layers.push_back(main);
        } else {
            out.layers.push_back(lo);
        }
    }
    return out;
}

std::vector<Detection> decode_output(const LayerOutput& out) {
    std::vector<Detection> dets;
    const Mat& lg = out.logits->v;
    for (int i = 0; i < lg.rows(); ++i) {
        int best = 0;
        lg.row(i).maxCoeff(&best);
        Detection d;
        d.confidence = 1.0 / (1.0 + std::exp(-lg(i, best)));
        d.primitive = s14_to_primitive(static_cast<PrimitiveClass>(best),
                                       out.params->v.row(i));
        d.box = s4_to_bbox(out.boxes->v.row(i));
        dets.push_back(d);
    }
    return dets;
}

}  // namespace rastervec::model
