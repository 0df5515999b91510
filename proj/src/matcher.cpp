#include <cmath>
#include <limits>

#include "rastervec/training.hpp"

namespace rastervec::train {

using geom::Primitive;
using geom::PrimitiveClass;

// Hungarian algorithm with row/column potentials, O(n^3). Rows are
// processed in order, so ties resolve toward the lowest row index.
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw NonFinite("hungarian: matrix must be square");
    if (!cost.allFinite()) throw NonFinite("hungarian: non-finite cost entry");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);  // 1-based
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> match(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) match[p[j] - 1] = j - 1;
    return match;
}

Eigen::MatrixXd match_cost_matrix(const model::LayerOutput& preds,
                                  const std::vector<Primitive>& gts, const LossWeights& w) {
    const auto& logits = preds.logits->v;
    const auto& boxes = preds.boxes->v;
    const auto& params = preds.params->v;
    const int n = static_cast<int>(logits.rows());
    const int n_gt = static_cast<int>(gts.size());
    if (n_gt > n)
        throw NonFinite("match_cost_matrix: more ground truth than predictions");

    // no-primitive columns carry zero cost (no background logit)
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n_gt; ++j) {
        const PrimitiveClass c = gts[j].cls;
        const int ci = static_cast<int>(c);
        const int off = geom::param_offset(c);
        const geom::BBox gt_box = geom::bbox_of(gts[j]);
        for (int i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-logits(i, ci)));
            const geom::BBox pb{boxes(i, 0), boxes(i, 1), boxes(i, 2), boxes(i, 3)};
            const double d_box = geom::box_distance(pb, gt_box);
            double pred_slice[6];
            for (int k = 0; k < gts[j].n_params(); ++k) pred_slice[k] = params(i, off + k);
            const double d_c = geom::class_distance(c, pred_slice, gts[j].params.data());
            cost(i, j) = -w.lambda_cls * p + w.lambda_box * d_box + w.lambda_param * d_c;
        }
    }
    return cost;
}

}  // namespace rastervec::train
