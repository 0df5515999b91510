#pragma once

#include <opencv2/core.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rastervec/geometry.hpp"
#include "rastervec/nn.hpp"

namespace rastervec::model {

struct ModelConfig {
    int hidden = 64;
    int heads = 8;
    int enc_layers = 2;
    int dec_layers = 2;
    int num_queries = 50;
    int points = 4;  // sampling points per head and level
    int ffn = 256;
    std::string backbone = "tiny";  // tiny | deep
    // mixed: selected anchors + learned content; pure: content also from
    // the selected tokens; none: free learned anchors.
    std::string query_mode = "mixed";
    bool with_refinement = true;
    bool multi_scale = true;  // false: single stride-8 level
    bool encoder_only = false;  // ablation: predict straight from encoder tokens

    int levels() const { return multi_scale ? 4 : 1; }
    int head_dim() const { return hidden / heads; }
};

struct TokenShortage : std::runtime_error {
    explicit TokenShortage(const std::string& what) : std::runtime_error(what) {}
};
struct ImageTooSmall : std::runtime_error {
    explicit ImageTooSmall(const std::string& what) : std::runtime_error(what) {}
};

// ---- pure refinement math (exposed for unit checks) ----
double inv_sigmoid(double p, double eps = 1e-3);
double refine_scalar(double base, double delta, double eps = 1e-3);

// sigma(delta + sigma^-1(base)), elementwise over a matrix of values
Eigen::MatrixXd refine_mat(const Eigen::MatrixXd& base, const Eigen::MatrixXd& delta,
                           double eps = 1e-3);

// Var version: base enters as a constant (gradient stops at layer input).
nn::Var refine(nn::Graph& g, const Eigen::MatrixXd& base, const nn::Var& delta,
               double eps = 1e-3);

// ---- feature pyramid ----
struct FeaturePyramid {
    std::vector<nn::Var> feats;  // per level, (Hl*Wl) x C
    std::vector<int> hs, ws;
    int total_tokens() const;
};

// ---- multi-scale deformable attention ----
struct MsdParams {
    nn::Param* w_off = nullptr;   // C x (H*L*K*2)
    nn::Param* b_off = nullptr;   // 1 x (H*L*K*2)
    nn::Param* w_attn = nullptr;  // C x (H*L*K)
    nn::Param* b_attn = nullptr;
    nn::Param* w_val = nullptr;  // C x C value projection
    nn::Param* b_val = nullptr;
    nn::Param* w_out = nullptr;  // C x C output projection
    nn::Param* b_out = nullptr;
};

MsdParams make_msd_params(const std::string& prefix, const ModelConfig& cfg,
                          nn::ParamStore& store, std::mt19937_64& rng, bool backbone = false);

// Queries (n x C) attend into the pyramid. ref is n x 4 (cx, cy, w, h) in
// normalized [0,1] coordinates; offsets are scaled by half the box size.
nn::Var msd_attention(nn::Graph& g, const MsdParams& p, const ModelConfig& cfg,
                      const FeaturePyramid& values, const nn::Var& queries,
                      const Eigen::MatrixXd& ref_boxes);

// ---- denoising branch ----
struct DnConfig {
    int groups = 0;  // 0 disables the branch
    double lambda_pos = 0.4;
    double lambda_neg = 0.8;
    double p_flip = 0.0;
};

struct DnBatch {
    int groups = 0;
    int per_group = 0;  // 2 * n_gt (positive + negative per target)
    Eigen::MatrixXd init_boxes;   // (groups*per_group) x 4, sigmoid space
    Eigen::MatrixXd init_params;  // (groups*per_group) x 14
    std::vector<int> cls;         // noised class label fed to the query
    std::vector<int> gt_index;    // target primitive per denoising query
    std::vector<char> positive;   // 1 = reconstruction target, 0 = reject
    int total() const { return groups * per_group; }
};

DnBatch make_denoise_batch(const std::vector<geom::Primitive>& gts, const DnConfig& cfg,
                           std::mt19937_64& rng);

// Additive self-attention mask (0 = visible, -1e9 = blocked) over
// [dn queries | matching queries]. Matching queries never see dn queries;
// dn groups are mutually invisible.
Eigen::MatrixXd denoise_attention_mask(int dn_total, int per_group, int num_matching);

// ---- model ----
struct LayerOutput {
    nn::Var logits;  // n x 3
    nn::Var boxes;   // n x 4, sigmoid space
    nn::Var params;  // n x 14, sigmoid space
};

struct ModelOutput {
    std::vector<LayerOutput> layers;     // one per decoder layer, last is final
    LayerOutput encoder;                 // query-selection head outputs (top-N tokens)
    std::vector<LayerOutput> dn_layers;  // denoising branch, aligned with `layers`
};

class Model {
public:
    Model(const ModelConfig& cfg, nn::ParamStore& store, std::mt19937_64& rng);

    // image: BGR 8U. dn: optional denoising queries for training.
    ModelOutput forward(nn::Graph& g, const cv::Mat& image, const DnBatch* dn = nullptr) const;

    const ModelConfig& config() const { return cfg_; }

    FeaturePyramid run_backbone(nn::Graph& g, const cv::Mat& image) const;

    // Sinusoidal embedding of the 18 positional scalars (4 box + 14
    // params) through a 2-layer MLP; length-generic in the scalar count.
    nn::Var embed_positional_query(nn::Graph& g, const Eigen::MatrixXd& box_and_params) const;

private:
    ModelConfig cfg_;
    nn::ParamStore* store_;

    nn::Var encode(nn::Graph& g, FeaturePyramid& pyr) const;
};

// Decode a LayerOutput row into a primitive + confidence (argmax class).
struct Detection {
    geom::Primitive primitive;
    geom::BBox box;
    double confidence = 0;
};

std::vector<Detection> decode_output(const LayerOutput& out);

// Parameter-vector layout helpers ([line(4) | circle(4) | arc(6)]).
Eigen::RowVectorXd primitive_to_s14(const geom::Primitive& p);
geom::Primitive s14_to_primitive(geom::PrimitiveClass cls, const Eigen::RowVectorXd& s);
Eigen::RowVectorXd bbox_to_s4(const geom::BBox& b);
geom::BBox s4_to_bbox(const Eigen::RowVectorXd& s);

}  // namespace rastervec::model
