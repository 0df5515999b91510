#include <cmath>

#include "rastervec/training.hpp"

namespace rastervec::train {

using geom::Primitive;
using geom::PrimitiveClass;
using nn::Graph;
using nn::Mat;
using nn::Var;

namespace {

// sigmoid focal loss, gamma = 2: pos alpha (1-p)^2 (-log p),
// neg (1-alpha) p^2 (-log(1-p)); summed over masked entries
Var focal_sum(Graph& g, const Var& logits, const Mat& pos_mask, const LossWeights& w) {
    if (w.focal_gamma != 2.0)
        throw NonFinite("focal loss: only gamma = 2 is supported");
    const Mat ones = Mat::Ones(logits->v.rows(), logits->v.cols());
    const Var p = nn::sigmoid(logits);
    const Var one_minus_p = nn::add_const(nn::scale(p, -1.0), ones);
    const Var pos = nn::scale(
        nn::cmul(nn::square(one_minus_p), nn::scale(nn::logsig(logits), -1.0)), w.focal_alpha);
    const Var neg =
        nn::scale(nn::cmul(nn::square(p), nn::scale(nn::logsig(nn::scale(logits, -1.0)), -1.0)),
                  1.0 - w.focal_alpha);
    const Var masked =
        nn::add(nn::cmul(pos, g.constant(pos_mask)), nn::cmul(neg, g.constant(ones - pos_mask)));
    return nn::sum(masked);
}

// L1 reconstruction of matched boxes and params; targets pick the
// equivalent parametrization (endpoint order) closest to the prediction.
struct Regression {
    Var box;    // 1x1 or nullptr
    Var param;  // 1x1 or nullptr
};

Regression regression_terms(Graph& g, const model::LayerOutput& preds,
                            const std::vector<int>& pred_rows,
                            const std::vector<const Primitive*>& targets) {
    Regression r;
    if (pred_rows.empty()) return r;
    const int m = static_cast<int>(pred_rows.size());

    Mat box_target(m, 4);
    for (int i = 0; i < m; ++i) box_target.row(i) = model::bbox_to_s4(geom::bbox_of(*targets[i]));
    const Var matched_boxes = nn::gather_rows(preds.boxes, pred_rows);
    r.box = nn::sum(nn::abs_(nn::add_const(matched_boxes, -box_target)));

    std::vector<Var> param_terms;
    for (int i = 0; i < m; ++i) {
        const Primitive& gt = *targets[i];
        const int off = geom::param_offset(gt.cls);
        const int np = gt.n_params();
        const Var slice = nn::slice_cols(nn::gather_rows(preds.params, {pred_rows[i]}), off, np);
        // pick the endpoint order with the smaller L1 against the values
        double direct = 0, swapped = 0;
        Eigen::RowVectorXd tgt(np), tgt_swap(np);
        for (int k = 0; k < np; ++k) tgt(k) = gt.params[k];
        tgt_swap = tgt;
        if (gt.cls == PrimitiveClass::Line || gt.cls == PrimitiveClass::Arc) {
            tgt_swap(0) = tgt(2);
            tgt_swap(1) = tgt(3);
            tgt_swap(2) = tgt(0);
            tgt_swap(3) = tgt(1);
        }
        for (int k = 0; k < np; ++k) {
            direct += std::abs(slice->v(0, k) - tgt(k));
            swapped += std::abs(slice->v(0, k) - tgt_swap(k));
        }
        const Eigen::RowVectorXd& best = swapped < direct ? tgt_swap : tgt;
        param_terms.push_back(
            nn::scale(nn::sum(nn::abs_(nn::add_const(slice, -Mat(best)))), 1.0 / np));
    }
    r.param = param_terms.size() == 1 ? param_terms[0] : nn::add_n(param_terms);
    return r;
}

Var weighted_total(Graph& g, const Var& cls, const Var& box, const Var& param,
                   const LossWeights& w, double denom, LossParts* parts) {
    Var total = nn::scale(cls, w.lambda_cls / denom);
    if (box) total = nn::add(total, nn::scale(box, w.lambda_box / denom));
    if (param) total = nn::add(total, nn::scale(param, w.lambda_param / denom));
    if (parts) {
        parts->cls = cls->v(0, 0) / denom;
        parts->box = box ? box->v(0, 0) / denom : 0.0;
        parts->param = param ? param->v(0, 0) / denom : 0.0;
    }
    return total;
}

}  // namespace

Var layer_loss(Graph& g, const model::LayerOutput& preds, const std::vector<Primitive>& gts,
               const LossWeights& w, LossParts* parts) {
    const int n = static_cast<int>(preds.logits->v.rows());
    const int n_gt = static_cast<int>(gts.size());
    const double denom = std::max(1, n_gt);

    std::vector<int> pred_of_gt(n_gt, -1);
    if (n_gt > 0) {
        const auto assign = hungarian(match_cost_matrix(preds, gts, w));
        for (int i = 0; i < n; ++i)
            if (assign[i] < n_gt) pred_of_gt[assign[i]] = i;
    }

    Mat pos_mask = Mat::Zero(n, geom::kNumClasses);
    std::vector<int> rows;
    std::vector<const Primitive*> targets;
    for (int j = 0; j < n_gt; ++j) {
        pos_mask(pred_of_gt[j], static_cast<int>(gts[j].cls)) = 1.0;
        rows.push_back(pred_of_gt[j]);
        targets.push_back(&gts[j]);
    }

    const Var cls = focal_sum(g, preds.logits, pos_mask, w);
    const Regression reg = regression_terms(g, preds, rows, targets);
    return weighted_total(g, cls, reg.box, reg.param, w, denom, parts);
}

Var denoise_loss(Graph& g, const model::LayerOutput& preds, const model::DnBatch& dn,
                 const std::vector<Primitive>& gts, const LossWeights& w, LossParts* parts) {
    const int n = dn.total();
    Mat pos_mask = Mat::Zero(n, geom::kNumClasses);
    std::vector<int> rows;
    std::vector<const Primitive*> targets;
    for (int i = 0; i < n; ++i) {
        if (!dn.positive[i]) continue;  // negatives are pure background
        const Primitive& gt = gts[dn.gt_index[i]];
        pos_mask(i, static_cast<int>(gt.cls)) = 1.0;
        rows.push_back(i);
        targets.push_back(&gt);
    }
    const double denom = std::max<size_t>(1, rows.size());
    const Var cls = focal_sum(g, preds.logits, pos_mask, w);
    const Regression reg = regression_terms(g, preds, rows, targets);
    return weighted_total(g, cls, reg.box, reg.param, w, denom, parts);
}

Var total_loss(Graph& g, const model::ModelOutput& out, const std::vector<Primitive>& gts,
               const LossWeights& w, const model::DnBatch* dn, LossBreakdown* breakdown) {
    std::vector<Var> terms;
    LossBreakdown acc;
    for (const auto& layer : out.layers) {
        LossParts parts;
        terms.push_back(layer_loss(g, layer, gts, w, &parts));
        acc.cls += parts.cls;
        acc.box += parts.box;
        acc.param += parts.param;
    }
    const bool encoder_is_final =
        out.layers.size() == 1 && out.layers[0].logits == out.encoder.logits;
    if (out.encoder.logits && !encoder_is_final) {  // auxiliary selection-head loss
        LossParts parts;
        terms.push_back(layer_loss(g, out.encoder, gts, w, &parts));
        acc.cls += parts.cls;
        acc.box += parts.box;
        acc.param += parts.param;
    }
    if (dn && dn->total() > 0) {
        for (const auto& layer : out.dn_layers) {
            LossParts parts;
            const Var t = denoise_loss(g, layer, *dn, gts, w, &parts);
            acc.dn += t->v(0, 0);
            terms.push_back(t);
        }
    }
    const Var total = terms.size() == 1 ? terms[0] : nn::add_n(terms);
    if (breakdown) {
        acc.total = total->v(0, 0);
        *breakdown = acc;
    }
    return total;
}

}  // namespace rastervec::train
