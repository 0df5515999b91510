#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rastervec/evaluation.hpp"

namespace rastervec::eval {

using geom::Primitive;
using geom::PrimitiveClass;

std::vector<EvalRecord> match_for_eval(const PredSet& preds, const std::vector<Primitive>& gts,
                                       PrimitiveClass c, double delta_max, int image_id) {
    std::vector<int> pred_idx;
    for (size_t i = 0; i < preds.prims.size(); ++i)
        if (preds.prims[i].cls == c) pred_idx.push_back(static_cast<int>(i));
    // descending confidence; equal confidences keep list order
    std::stable_sort(pred_idx.begin(), pred_idx.end(),
                     [&](int a, int b) { return preds.conf[a] > preds.conf[b]; });

    std::vector<int> gt_idx;
    for (size_t j = 0; j < gts.size(); ++j)
        if (gts[j].cls == c) gt_idx.push_back(static_cast<int>(j));
    std::vector<char> taken(gt_idx.size(), 0);

    std::vector<EvalRecord> records;
    for (const int i : pred_idx) {
        EvalRecord r;
        r.image_id = image_id;
        r.cls = c;
        r.confidence = preds.conf[i];
        double best = std::numeric_limits<double>::infinity();
        int best_j = -1;
        for (size_t j = 0; j < gt_idx.size(); ++j) {
            if (taken[j]) continue;
            const double d = geom::eval_distance(preds.prims[i], gts[gt_idx[j]]);
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
            }
        }
        if (best_j >= 0 && best <= delta_max) {
            taken[best_j] = 1;
            r.gt_id = gt_idx[best_j];
            r.delta = best;
            r.tp = true;
        } else {
            r.delta = best;
            r.tp = false;
        }
        records.push_back(r);
    }
    return records;
}

double average_precision(std::vector<EvalRecord> records, int total_gt) {
    if (total_gt == 0) throw NoGroundTruth("average_precision: class has no ground truth");
    if (records.empty()) return 0.0;
    // rank by confidence; among ties, smaller delta first
    std::stable_sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.delta < b.delta;
    });
    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const auto& r : records) {
        (r.tp ? tp : fp) += 1;
        precision.push_back(static_cast<double>(tp) / (tp + fp));
        recall.push_back(static_cast<double>(tp) / total_gt);
    }
    // all-points interpolation: precision envelope from the right
    for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
        precision[i] = std::max(precision[i], precision[i + 1]);
    double ap = 0, prev_recall = 0;
    for (size_t i = 0; i < recall.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

namespace {

std::map<std::string, double> ap_at(const std::vector<PredSet>& preds,
                                    const std::vector<std::vector<Primitive>>& gts,
                                    double delta_max, double conf_floor,
                                    const std::map<std::string, int>& gt_counts) {
    std::map<std::string, double> out;
    double sum = 0;
    int present = 0;
    for (int ci = 0; ci < geom::kNumClasses; ++ci) {
        const auto c = static_cast<PrimitiveClass>(ci);
        const std::string name = geom::class_name(c);
        const int total_gt = gt_counts.count(name) ? gt_counts.at(name) : 0;
        if (total_gt == 0) continue;  // absent class: skipped in mAP
        std::vector<EvalRecord> records;
        for (size_t img = 0; img < preds.size(); ++img) {
            PredSet filtered;
            for (size_t i = 0; i < preds[img].prims.size(); ++i) {
                if (preds[img].conf[i] < conf_floor) continue;
                filtered.prims.push_back(preds[img].prims[i]);
                filtered.conf.push_back(preds[img].conf[i]);
            }
            auto recs =
                match_for_eval(filtered, gts[img], c, delta_max, static_cast<int>(img));
            records.insert(records.end(), recs.begin(), recs.end());
        }
        const double ap = average_precision(records, total_gt);
        out[name] = ap;
        sum += ap;
        ++present;
    }
    out["mAP"] = present > 0 ? sum / present : 0.0;
    return out;
}

}  // namespace

Report evaluate_dataset(const std::vector<PredSet>& preds,
                        const std::vector<std::vector<Primitive>>& gts, const EvalConfig& cfg) {
    Report rep;
    rep.delta_max = cfg.delta_max;
    for (const auto& img : gts)
        for (const auto& p : img) rep.gt_counts[geom::class_name(p.cls)] += 1;

    auto main = ap_at(preds, gts, cfg.delta_max, cfg.conf_floor, rep.gt_counts);
    rep.map = main["mAP"];
    main.erase("mAP");
    rep.ap = main;

    for (const double d : cfg.sweep)
        rep.curve.emplace_back(d, ap_at(preds, gts, d, cfg.conf_floor, rep.gt_counts));
    return rep;
}

}  // namespace rastervec::eval
