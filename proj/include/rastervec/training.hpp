#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rastervec/model.hpp"
#include "rastervec/nn.hpp"
#include "rastervec/synthgen.hpp"

namespace rastervec::train {

struct NonFinite : std::runtime_error {
    explicit NonFinite(const std::string& what) : std::runtime_error(what) {}
};
struct TrainingDiverged : std::runtime_error {
    TrainingDiverged(const std::string& what, std::uint64_t batch_seed)
        : std::runtime_error(what), batch_seed(batch_seed) {}
    std::uint64_t batch_seed;
};
struct SchemaMismatch : std::runtime_error {
    explicit SchemaMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct LossWeights {
    double lambda_cls = 2.0;
    double lambda_box = 5.0;
    double lambda_param = 5.0;
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;  // only gamma = 2 is supported
};

// ---- bipartite matching ----

// Minimum-cost assignment; result[i] is the column matched to row i.
// Ties resolve deterministically (lowest row index first).
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

// Eq.-style matching cost: entry (n, j) = -lambda_cls * p_n[c_j]
// + 1{c_j != no-primitive} * (lambda_box * d_box + lambda_param * d_c).
// Ground truth is padded with no-primitive columns to the query count,
// whose classification affinity is 0 (no explicit background logit).
Eigen::MatrixXd match_cost_matrix(const model::LayerOutput& preds,
                                  const std::vector<geom::Primitive>& gts,
                                  const LossWeights& w);

// ---- loss ----

struct LossParts {
    double cls = 0, box = 0, param = 0;
};

// Focal + box + param loss for one decoder layer, matched by hungarian.
// Normalized by max(1, #gt). Gradient-carrying scalar (1x1).
nn::Var layer_loss(nn::Graph& g, const model::LayerOutput& preds,
                   const std::vector<geom::Primitive>& gts, const LossWeights& w,
                   LossParts* parts = nullptr);

// Denoising branch loss: positives reconstruct their target, negatives are
// supervised as background. Assignment is fixed by the batch layout.
nn::Var denoise_loss(nn::Graph& g, const model::LayerOutput& preds, const model::DnBatch& dn,
                     const std::vector<geom::Primitive>& gts, const LossWeights& w,
                     LossParts* parts = nullptr);

struct LossBreakdown {
    double total = 0, cls = 0, box = 0, param = 0, dn = 0;
};

// Sum over decoder layers + encoder auxiliary output + denoising branch.
nn::Var total_loss(nn::Graph& g, const model::ModelOutput& out,
                   const std::vector<geom::Primitive>& gts, const LossWeights& w,
                   const model::DnBatch* dn = nullptr, LossBreakdown* breakdown = nullptr);

// ---- checkpointing ----

constexpr int kCheckpointSchema = 1;

void save_checkpoint(const std::string& path, const nn::ParamStore& store, const nn::AdamW& opt,
                     long epoch, long step, const std::string& config_json);

struct CheckpointMeta {
    long epoch = 0;
    long step = 0;
    std::string config_json;
};

// Loads into an existing store; shapes and names must match.
CheckpointMeta load_checkpoint(const std::string& path, nn::ParamStore& store, nn::AdamW& opt);

// Reads only the metadata/config echo.
CheckpointMeta peek_checkpoint(const std::string& path);

// ---- training loop ----

struct TrainSchedule {
    int epochs = 12;
    int steps_per_epoch = 2000;
    int batch = 4;
    int lr_drop_epoch = 11;  // 1-based epoch whose start divides lr by 10
    double lr = 1e-4;
    double lr_backbone = 1e-5;
};

// paper: 12x2000 steps, batch 4; desk: 4x500, batch 2; smoke: 2x20, batch 2
TrainSchedule schedule_preset(const std::string& name);

struct DenoiseSettings {
    double lambda_pos = 0.4;
    double lambda_neg = 0.8;
    double p_flip = 0.0;
    int query_budget = 100;  // total denoise queries per image
    bool enabled = true;
};

struct TrainConfig {
    synth::GenConfig gen;
    synth::AugmentConfig aug;
    model::ModelConfig model;
    LossWeights loss;
    DenoiseSettings denoise;
    TrainSchedule schedule;
    std::uint64_t seed = 0;
    std::string out_dir;       // checkpoints + metrics.ndjson; empty = no files
    std::string config_echo;   // JSON text embedded in checkpoints
};

struct StepRecord {
    long step = 0;
    LossBreakdown loss;
    double lr = 0;
    std::uint64_t batch_seed = 0;
};

class Trainer {
public:
    explicit Trainer(const TrainConfig& cfg);

    // Resume state from a checkpoint written by this trainer.
    void resume(const std::string& checkpoint_path);

    // One optimizer step over the next batch; throws TrainingDiverged on
    // a non-finite loss (message carries the batch seed).
    StepRecord step();

    void run(const std::function<void(const StepRecord&)>& on_step = nullptr);

    long current_step() const { return step_; }
    double current_lr() const;
    nn::ParamStore& params() { return store_; }
    const model::Model& net() const { return *model_; }
    const TrainConfig& config() const { return cfg_; }

    // Deterministic per-sample stream: sample index -> (image, gts).
    synth::SyntheticSample sample_at(long index) const;

private:
    TrainConfig cfg_;
    nn::ParamStore store_;
    std::unique_ptr<model::Model> model_;
    nn::AdamW opt_;
    long step_ = 0;
};

}  // namespace rastervec::train
