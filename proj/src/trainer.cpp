#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "rastervec/training.hpp"

namespace rastervec::train {

using nn::Graph;
using nn::Var;

TrainSchedule schedule_preset(const std::string& name) {
    TrainSchedule s;
    if (name == "paper") {
        // defaults: 12 epochs x 2000 steps, batch 4, drop at epoch 11
    } else if (name == "desk") {
        s.epochs = 4;
        s.steps_per_epoch = 500;
        s.batch = 2;
        s.lr_drop_epoch = 4;
    } else if (name == "smoke") {
        s.epochs = 2;
        s.steps_per_epoch = 20;
        s.batch = 2;
        s.lr_drop_epoch = 2;
    } else {
        throw std::runtime_error("unknown schedule preset: " + name);
    }
    return s;
}

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
    std::mt19937_64 rng(cfg.seed);
    model_ = std::make_unique<model::Model>(cfg.model, store_, rng);
    opt_.weight_decay = 1e-4;
}

void Trainer::resume(const std::string& checkpoint_path) {
    const CheckpointMeta meta = load_checkpoint(checkpoint_path, store_, opt_);
    step_ = meta.step;
}

double Trainer::current_lr() const {
    const int epoch = static_cast<int>(step_ / cfg_.schedule.steps_per_epoch) + 1;
    const double f = epoch >= cfg_.schedule.lr_drop_epoch ? 0.1 : 1.0;
    return cfg_.schedule.lr * f;
}

synth::SyntheticSample Trainer::sample_at(long index) const {
    const std::uint64_t seed = synth::sample_seed(cfg_.seed, static_cast<std::uint64_t>(index));
    synth::SyntheticSample s = synth::generate_sample(cfg_.gen, seed);
    std::mt19937_64 arng(synth::sample_seed(cfg_.seed ^ 0xA5A5A5A5A5A5A5A5ULL,
                                            static_cast<std::uint64_t>(index)));
    return synth::augment(s, cfg_.aug, arng);
}

StepRecord Trainer::step() {
    StepRecord rec;
    rec.step = step_;
    rec.lr = current_lr();
    store_.zero_grad();
    const int batch = cfg_.schedule.batch;
    for (int b = 0; b < batch; ++b) {
        const long index = step_ * batch + b;
        const synth::SyntheticSample s = sample_at(index);
        if (b == 0) rec.batch_seed = s.seed;

        model::DnBatch dn;
        if (cfg_.denoise.enabled && !s.primitives.empty()) {
            model::DnConfig dcfg;
            dcfg.lambda_pos = cfg_.denoise.lambda_pos;
            dcfg.lambda_neg = cfg_.denoise.lambda_neg;
            dcfg.p_flip = cfg_.denoise.p_flip;
            const int per_group = 2 * static_cast<int>(s.primitives.size());
            dcfg.groups = std::max(1, cfg_.denoise.query_budget / per_group);
            std::mt19937_64 drng(synth::sample_seed(cfg_.seed ^ 0xD00DD00DD00DD00DULL,
                                                    static_cast<std::uint64_t>(index)));
            dn = model::make_denoise_batch(s.primitives, dcfg, drng);
        }

        Graph g;
        const model::ModelOutput out =
            model_->forward(g, s.image, dn.total() > 0 ? &dn : nullptr);
        LossBreakdown bd;
        const Var loss =
            total_loss(g, out, s.primitives, cfg_.loss, dn.total() > 0 ? &dn : nullptr, &bd);
        if (!std::isfinite(bd.total))
            throw TrainingDiverged("non-finite loss at step " + std::to_string(step_) +
                                       ", batch seed " + std::to_string(s.seed),
                                   s.seed);
        g.backward(nn::scale(loss, 1.0 / batch));
        rec.loss.total += bd.total / batch;
        rec.loss.cls += bd.cls / batch;
        rec.loss.box += bd.box / batch;
        rec.loss.param += bd.param / batch;
        rec.loss.dn += bd.dn / batch;
    }
    store_.clip_grad_norm(0.1);
    opt_.update(store_, rec.lr, rec.lr * cfg_.schedule.lr_backbone / cfg_.schedule.lr);
    ++step_;
    return rec;
}

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
    const long total = static_cast<long>(cfg_.schedule.epochs) * cfg_.schedule.steps_per_epoch;
    std::ofstream log;
    if (!cfg_.out_dir.empty()) {
        std::filesystem::create_directories(cfg_.out_dir);
        log.open(cfg_.out_dir + "/metrics.ndjson", std::ios::app);
    }
    while (step_ < total) {
        const StepRecord rec = step();
        if (log.is_open()) {
            nlohmann::json j{{"step", rec.step},         {"total", rec.loss.total},
                             {"cls", rec.loss.cls},      {"box", rec.loss.box},
                             {"param", rec.loss.param},  {"dn", rec.loss.dn},
                             {"lr", rec.lr},             {"seed", rec.batch_seed}};
            log << j.dump() << "\n";
            log.flush();
        }
        if (on_step) on_step(rec);
        if (!cfg_.out_dir.empty() && step_ % cfg_.schedule.steps_per_epoch == 0) {
            const long epoch = step_ / cfg_.schedule.steps_per_epoch;
            save_checkpoint(cfg_.out_dir + "/epoch_" + std::to_string(epoch) + ".ckpt", store_,
                            opt_, epoch, step_, cfg_.config_echo);
            save_checkpoint(cfg_.out_dir + "/last.ckpt", store_, opt_, epoch, step_,
                            cfg_.config_echo);
        }
    }
}

}  // namespace rastervec::train
