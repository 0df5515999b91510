#pragma once

#include <string>

#include <json.hpp>

#include "rastervec/evaluation.hpp"
#include "rastervec/training.hpp"

namespace rastervec::cfg {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Everything a run needs, grouped by module. Round-trips losslessly
// through JSON; unknown keys are rejected with their path.
struct RunConfig {
    synth::GenConfig gen;
    synth::AugmentConfig aug;
    model::ModelConfig model;
    train::LossWeights loss;
    train::DenoiseSettings denoise;
    eval::EvalConfig eval;
    train::TrainSchedule schedule;
    std::uint64_t seed = 0;
    std::string out_dir = "runs/default";
};

nlohmann::json run_config_to_json(const RunConfig& rc);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& rc);

}  // namespace rastervec::cfg
