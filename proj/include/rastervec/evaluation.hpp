#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rastervec/geometry.hpp"

namespace rastervec::eval {

struct NoGroundTruth : std::runtime_error {
    explicit NoGroundTruth(const std::string& what) : std::runtime_error(what) {}
};

struct EvalConfig {
    double delta_max = 4.0;  // in 128x128 pixel units
    std::vector<double> sweep = {1.0, 2.0, 4.0, 8.0};
    double conf_floor = 0.0;
};

struct PredSet {
    std::vector<geom::Primitive> prims;
    std::vector<double> conf;
};

struct EvalRecord {
    int image_id = 0;
    geom::PrimitiveClass cls = geom::PrimitiveClass::NoPrimitive;
    double confidence = 0;
    int gt_id = -1;  // matched GT index within its image, -1 for FP
    double delta = 0;
    bool tp = false;
};

// Confidence-ranked greedy one-to-one matching of class-c predictions to
// the nearest unmatched GT by eval_distance; TP iff delta <= delta_max.
std::vector<EvalRecord> match_for_eval(const PredSet& preds,
                                       const std::vector<geom::Primitive>& gts,
                                       geom::PrimitiveClass c, double delta_max,
                                       int image_id = 0);

// All-points area under the confidence-ranked PR curve; total_gt is the
// recall denominator. Throws NoGroundTruth when total_gt == 0.
double average_precision(std::vector<EvalRecord> records, int total_gt);

struct Report {
    std::map<std::string, double> ap;   // per present class
    double map = 0;
    // sweep value -> {class -> AP, "mAP" -> mean}
    std::vector<std::pair<double, std::map<std::string, double>>> curve;
    std::map<std::string, int> gt_counts;
    double delta_max = 4.0;
};

Report evaluate_dataset(const std::vector<PredSet>& preds,
                        const std::vector<std::vector<geom::Primitive>>& gts,
                        const EvalConfig& cfg);

}  // namespace rastervec::eval
