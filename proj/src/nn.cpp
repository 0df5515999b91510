#include "rastervec/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace rastervec::nn {

Mat& grad_of(Node* n) {
    if (n->g.size() == 0) n->g = Mat::Zero(n->v.rows(), n->v.cols());
    return n->g;
}

Var Graph::constant(Mat m) { return make(std::move(m), false, nullptr); }

Var Graph::leaf(Mat m) { return make(std::move(m), true, nullptr); }

Var Graph::make(Mat v, bool needs, std::function<void()> back) {
    auto n = std::make_shared<Node>();
    n->v = std::move(v);
    n->needs = needs;
    n->back = std::move(back);
    n->graph = this;
    order_.push_back(n);
    return n;
}

void Graph::backward(const Var& root) {
    if (root->v.size() != 1) throw std::runtime_error("backward root must be scalar");
    grad_of(root.get())(0, 0) = 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node* n = it->get();
        if (n->needs && n->back && n->g.size() != 0) n->back();
    }
}

namespace {

// Builds a result node on the graph of `a`.
Var make_op(const Var& a, Mat v, std::function<void()> back, bool needs) {
    return a->graph->make(std::move(v), needs, std::move(back));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    const bool needs = a->needs || b->needs;
    Mat v = a->v * b->v;
    Var r = make_op(a, std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, a, b]() {
            if (a->needs) grad_of(a.get()).noalias() += rn->g * b->v.transpose();
            if (b->needs) grad_of(b.get()).noalias() += a->v.transpose() * rn->g;
        };
    }
    return r;
}

Var matmul_nt(const Var& a, const Var& b) {
    const bool needs = a->needs || b->needs;
    Var r = make_op(a, a->v * b->v.transpose(), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, a, b]() {
            if (a->needs) grad_of(a.get()).noalias() += rn->g * b->v;
            if (b->needs) grad_of(b.get()).noalias() += rn->g.transpose() * a->v;
        };
    }
    return r;
}

Var add(const Var& a, const Var& b) {
    const bool needs = a->needs || b->needs;
    Var r = make_op(a, a->v + b->v, nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, a, b]() {
            if (a->needs) grad_of(a.get()) += rn->g;
            if (b->needs) grad_of(b.get()) += rn->g;
        };
    }
    return r;
}

Var sub(const Var& a, const Var& b) {
    const bool needs = a->needs || b->needs;
    Var r = make_op(a, a->v - b->v, nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, a, b]() {
            if (a->needs) grad_of(a.get()) += rn->g;
            if (b->needs) grad_of(b.get()) -= rn->g;
        };
    }
    return r;
}

Var cmul(const Var& a, const Var& b) {
    const bool needs = a->needs || b->needs;
    Var r = make_op(a, a->v.cwiseProduct(b->v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, a, b]() {
            if (a->needs) grad_of(a.get()) += rn->g.cwiseProduct(b->v);
            if (b->needs) grad_of(b.get()) += rn->g.cwiseProduct(a->v);
        };
    }
    return r;
}

Var add_n(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::runtime_error("add_n: empty");
    Mat v = xs[0]->v;
    bool needs = xs[0]->needs;
    for (size_t i = 1; i < xs.size(); ++i) {
        v += xs[i]->v;
        needs = needs || xs[i]->needs;
    }
    Var r = make_op(xs[0], std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        auto parents = xs;
        rn->back = [rn, parents]() {
            for (const auto& p : parents)
                if (p->needs) grad_of(p.get()) += rn->g;
        };
    }
    return r;
}

Var scale(const Var& a, double s) {
    Var r = make_op(a, a->v * s, nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a, s]() { grad_of(a.get()) += rn->g * s; };
    }
    return r;
}

Var add_const(const Var& a, const Mat& c) {
    Var r = make_op(a, a->v + c, nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a]() { grad_of(a.get()) += rn->g; };
    }
    return r;
}

Var add_rowvec(const Var& a, const Var& row) {
    const bool needs = a->needs || row->needs;
    Mat v = a->v;
    v.rowwise() += Eigen::RowVectorXd(row->v.row(0));
    Var r = make_op(a, std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, a, row]() {
            if (a->needs) grad_of(a.get()) += rn->g;
            if (row->needs) grad_of(row.get()).row(0) += rn->g.colwise().sum();
        };
    }
    return r;
}

Var mul_colvec(const Var& a, const Var& col) {
    const bool needs = a->needs || col->needs;
    Mat v = a->v.array().colwise() * col->v.col(0).array();
    Var r = make_op(a, std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, a, col]() {
            if (a->needs)
                grad_of(a.get()).array() += rn->g.array().colwise() * col->v.col(0).array();
            if (col->needs)
                grad_of(col.get()).col(0) += rn->g.cwiseProduct(a->v).rowwise().sum();
        };
    }
    return r;
}

Var relu(const Var& a) {
    Var r = make_op(a, a->v.cwiseMax(0.0), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a]() {
            grad_of(a.get()).array() += rn->g.array() * (a->v.array() > 0.0).cast<double>();
        };
    }
    return r;
}

Var sigmoid(const Var& a) {
    Mat y = (1.0 / (1.0 + (-a->v.array()).exp())).matrix();
    Var r = make_op(a, std::move(y), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a]() {
            grad_of(a.get()).array() += rn->g.array() * rn->v.array() * (1.0 - rn->v.array());
        };
    }
    return r;
}

Var logsig(const Var& a) {
    Mat y = a->v.unaryExpr([](double z) {
        return z > 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
    });
    Var r = make_op(a, std::move(y), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a]() {
            grad_of(a.get()).array() +=
                rn->g.array() * (1.0 - 1.0 / (1.0 + (-a->v.array()).exp()));
        };
    }
    return r;
}

Var square(const Var& a) {
    Var r = make_op(a, a->v.cwiseProduct(a->v), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a]() { grad_of(a.get()) += 2.0 * rn->g.cwiseProduct(a->v); };
    }
    return r;
}

Var abs_(const Var& a) {
    Var r = make_op(a, a->v.cwiseAbs(), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a]() {
            grad_of(a.get()).array() += rn->g.array() * a->v.array().sign();
        };
    }
    return r;
}

Var sum(const Var& a) {
    Mat v(1, 1);
    v(0, 0) = a->v.sum();
    Var r = make_op(a, std::move(v), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a]() { grad_of(a.get()).array() += rn->g(0, 0); };
    }
    return r;
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a->v.size())); }

Var concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::runtime_error("concat_cols: empty");
    int cols = 0;
    bool needs = false;
    for (const auto& x : xs) {
        cols += static_cast<int>(x->v.cols());
        needs = needs || x->needs;
    }
    Mat v(xs[0]->v.rows(), cols);
    int j = 0;
    for (const auto& x : xs) {
        v.middleCols(j, x->v.cols()) = x->v;
        j += static_cast<int>(x->v.cols());
    }
    Var r = make_op(xs[0], std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        auto parents = xs;
        rn->back = [rn, parents]() {
            int j = 0;
            for (const auto& p : parents) {
                if (p->needs) grad_of(p.get()) += rn->g.middleCols(j, p->v.cols());
                j += static_cast<int>(p->v.cols());
            }
        };
    }
    return r;
}

Var concat_rows(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::runtime_error("concat_rows: empty");
    int rows = 0;
    bool needs = false;
    for (const auto& x : xs) {
        rows += static_cast<int>(x->v.rows());
        needs = needs || x->needs;
    }
    Mat v(rows, xs[0]->v.cols());
    int i = 0;
    for (const auto& x : xs) {
        v.middleRows(i, x->v.rows()) = x->v;
        i += static_cast<int>(x->v.rows());
    }
    Var r = make_op(xs[0], std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        auto parents = xs;
        rn->back = [rn, parents]() {
            int i = 0;
            for (const auto& p : parents) {
                if (p->needs) grad_of(p.get()) += rn->g.middleRows(i, p->v.rows());
                i += static_cast<int>(p->v.rows());
            }
        };
    }
    return r;
}

Var slice_cols(const Var& a, int j0, int n) {
    Var r = make_op(a, a->v.middleCols(j0, n), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a, j0, n]() { grad_of(a.get()).middleCols(j0, n) += rn->g; };
    }
    return r;
}

Var slice_rows(const Var& a, int i0, int n) {
    Var r = make_op(a, a->v.middleRows(i0, n), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a, i0, n]() { grad_of(a.get()).middleRows(i0, n) += rn->g; };
    }
    return r;
}

Var gather_rows(const Var& a, std::vector<int> idx) {
    Mat v(static_cast<int>(idx.size()), a->v.cols());
    for (size_t i = 0; i < idx.size(); ++i) v.row(static_cast<int>(i)) = a->v.row(idx[i]);
    Var r = make_op(a, std::move(v), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a, idx = std::move(idx)]() {
            Mat& ga = grad_of(a.get());
            for (size_t i = 0; i < idx.size(); ++i)
                ga.row(idx[i]) += rn->g.row(static_cast<int>(i));
        };
    }
    return r;
}

Var softmax_rows(const Var& a) {
    Mat y = a->v;
    for (int i = 0; i < y.rows(); ++i) {
        Eigen::ArrayXd row = y.row(i).array();
        row -= row.maxCoeff();
        row = row.exp();
        y.row(i) = (row / row.sum()).matrix();
    }
    Var r = make_op(a, std::move(y), nullptr, a->needs);
    if (a->needs) {
        Node* rn = r.get();
        rn->back = [rn, a]() {
            Mat& ga = grad_of(a.get());
            for (int i = 0; i < rn->v.rows(); ++i) {
                const double dot = rn->g.row(i).dot(rn->v.row(i));
                ga.row(i).array() +=
                    rn->v.row(i).array() * (rn->g.row(i).array() - dot);
            }
        };
    }
    return r;
}

Var softmax_rows_masked(const Var& a, const Mat& additive_mask) {
    return softmax_rows(add_const(a, additive_mask));
}

Var layernorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const int cols = static_cast<int>(x->v.cols());
    Mat xhat(x->v.rows(), cols);
    Eigen::VectorXd inv_std(x->v.rows());
    for (int i = 0; i < x->v.rows(); ++i) {
        const double mu = x->v.row(i).mean();
        const double var = (x->v.row(i).array() - mu).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (x->v.row(i).array() - mu) * inv_std(i);
    }
    const Eigen::RowVectorXd grow = gamma->v.row(0);
    Mat v = (xhat.array().rowwise() * grow.array()).matrix();
    v.rowwise() += Eigen::RowVectorXd(beta->v.row(0));
    const bool needs = x->needs || gamma->needs || beta->needs;
    Var r = make_op(x, std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        auto xh = std::make_shared<Mat>(std::move(xhat));
        auto istd = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
        rn->back = [rn, x, gamma, beta, xh, istd, cols]() {
            if (beta->needs) grad_of(beta.get()).row(0) += rn->g.colwise().sum();
            if (gamma->needs)
                grad_of(gamma.get()).row(0) += rn->g.cwiseProduct(*xh).colwise().sum();
            if (x->needs) {
                Mat& gx = grad_of(x.get());
                for (int i = 0; i < rn->g.rows(); ++i) {
                    const Eigen::RowVectorXd gh =
                        rn->g.row(i).cwiseProduct(gamma->v.row(0));
                    const double m1 = gh.mean();
                    const double m2 = gh.cwiseProduct(xh->row(i)).mean();
                    gx.row(i) += (*istd)(i) * (gh.array() - m1 -
                                               xh->row(i).array() * m2)
                                                  .matrix();
                }
                (void)cols;
            }
        };
    }
    return r;
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_rowvec(matmul(x, w), b); }

Var conv2d(const Var& x, int h, int w, const Var& weight, const Var& bias, int k, int stride,
           int pad, int* ho_out, int* wo_out) {
    const int cin = static_cast<int>(x->v.cols());
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (w + 2 * pad - k) / stride + 1;
    if (ho <= 0 || wo <= 0) throw std::runtime_error("conv2d: output would be empty");
    *ho_out = ho;
    *wo_out = wo;

    auto cols = std::make_shared<Mat>(Mat::Zero(ho * wo, k * k * cin));
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const int row = oy * wo + ox;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    cols->block(row, (ky * k + kx) * cin, 1, cin) = x->v.row(iy * w + ix);
                }
            }
        }
    }
    Mat v = *cols * weight->v;
    v.rowwise() += Eigen::RowVectorXd(bias->v.row(0));
    const bool needs = x->needs || weight->needs || bias->needs;
    Var r = make_op(x, std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, x, weight, bias, cols, h, w, k, stride, pad, cin, ho, wo]() {
            if (bias->needs) grad_of(bias.get()).row(0) += rn->g.colwise().sum();
            if (weight->needs)
                grad_of(weight.get()).noalias() += cols->transpose() * rn->g;
            if (x->needs) {
                const Mat gcols = rn->g * weight->v.transpose();
                Mat& gx = grad_of(x.get());
                for (int oy = 0; oy < ho; ++oy) {
                    for (int ox = 0; ox < wo; ++ox) {
                        const int row = oy * wo + ox;
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= w) continue;
                                gx.row(iy * w + ix) +=
                                    gcols.block(row, (ky * k + kx) * cin, 1, cin);
                            }
                        }
                    }
                }
            }
        };
    }
    return r;
}

Var bilinear_sample(const Var& feat, int h, int w, const Var& xloc, const Var& yloc) {
    const int n = static_cast<int>(xloc->v.rows());
    const int c = static_cast<int>(feat->v.cols());
    Mat v = Mat::Zero(n, c);
    auto corner = [&](int xi, int yi) -> int {
        if (xi < 0 || xi >= w || yi < 0 || yi >= h) return -1;
        return yi * w + xi;
    };
    for (int i = 0; i < n; ++i) {
        const double u = xloc->v(i, 0) * w - 0.5;
        const double t = yloc->v(i, 0) * h - 0.5;
        const int x0 = static_cast<int>(std::floor(u));
        const int y0 = static_cast<int>(std::floor(t));
        const double fx = u - x0, fy = t - y0;
        const int i00 = corner(x0, y0), i10 = corner(x0 + 1, y0);
        const int i01 = corner(x0, y0 + 1), i11 = corner(x0 + 1, y0 + 1);
        if (i00 >= 0) v.row(i) += (1 - fx) * (1 - fy) * feat->v.row(i00);
        if (i10 >= 0) v.row(i) += fx * (1 - fy) * feat->v.row(i10);
        if (i01 >= 0) v.row(i) += (1 - fx) * fy * feat->v.row(i01);
        if (i11 >= 0) v.row(i) += fx * fy * feat->v.row(i11);
    }
    const bool needs = feat->needs || xloc->needs || yloc->needs;
    Var r = make_op(feat, std::move(v), nullptr, needs);
    if (needs) {
        Node* rn = r.get();
        rn->back = [rn, feat, xloc, yloc, h, w, c, n]() {
            auto corner = [&](int xi, int yi) -> int {
                if (xi < 0 || xi >= w || yi < 0 || yi >= h) return -1;
                return yi * w + xi;
            };
            Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(c);
            for (int i = 0; i < n; ++i) {
                const double u = xloc->v(i, 0) * w - 0.5;
                const double t = yloc->v(i, 0) * h - 0.5;
                const int x0 = static_cast<int>(std::floor(u));
                const int y0 = static_cast<int>(std::floor(t));
                const double fx = u - x0, fy = t - y0;
                const int i00 = corner(x0, y0), i10 = corner(x0 + 1, y0);
                const int i01 = corner(x0, y0 + 1), i11 = corner(x0 + 1, y0 + 1);
                const Eigen::RowVectorXd f00 = i00 >= 0 ? feat->v.row(i00) : zero;
                const Eigen::RowVectorXd f10 = i10 >= 0 ? feat->v.row(i10) : zero;
                const Eigen::RowVectorXd f01 = i01 >= 0 ? feat->v.row(i01) : zero;
                const Eigen::RowVectorXd f11 = i11 >= 0 ? feat->v.row(i11) : zero;
                const auto g = rn->g.row(i);
                if (feat->needs) {
                    Mat& gf = grad_of(feat.get());
                    if (i00 >= 0) gf.row(i00) += (1 - fx) * (1 - fy) * g;
                    if (i10 >= 0) gf.row(i10) += fx * (1 - fy) * g;
                    if (i01 >= 0) gf.row(i01) += (1 - fx) * fy * g;
                    if (i11 >= 0) gf.row(i11) += fx * fy * g;
                }
                if (xloc->needs) {
                    const Eigen::RowVectorXd du = (1 - fy) * (f10 - f00) + fy * (f11 - f01);
                    grad_of(xloc.get())(i, 0) += g.dot(du) * w;
                }
                if (yloc->needs) {
                    const Eigen::RowVectorXd dt = (1 - fx) * (f01 - f00) + fx * (f11 - f10);
                    grad_of(yloc.get())(i, 0) += g.dot(dt) * h;
                }
            }
        };
    }
    return r;
}

Param& ParamStore::create(const std::string& name, int rows, int cols, double std_dev,
                          std::mt19937_64& rng, bool backbone) {
    if (by_name_.count(name)) throw std::runtime_error("duplicate parameter: " + name);
    auto p = std::make_unique<Param>();
    p->name = name;
    p->backbone = backbone;
    p->v.resize(rows, cols);
    if (std_dev == 0.0) {
        p->v.setZero();
    } else {
        std::normal_distribution<double> dist(0.0, std_dev);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) p->v(i, j) = dist(rng);
    }
    p->g = Mat::Zero(rows, cols);
    p->m1 = Mat::Zero(rows, cols);
    p->m2 = Mat::Zero(rows, cols);
    Param* raw = p.get();
    params_.push_back(std::move(p));
    ptrs_.push_back(raw);
    by_name_[name] = raw;
    return *raw;
}

Param* ParamStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

void ParamStore::zero_grad() {
    for (Param* p : ptrs_) p->g.setZero();
}

double ParamStore::grad_norm() const {
    double total = 0;
    for (const Param* p : ptrs_) total += p->g.squaredNorm();
    return std::sqrt(total);
}

void ParamStore::clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0) {
        const double s = max_norm / norm;
        for (Param* p : ptrs_) p->g *= s;
    }
}

Var param_leaf(Graph& g, Param& p) {
    Var n = g.leaf(p.v);
    Node* raw = n.get();
    Param* pp = &p;
    n->back = [raw, pp]() { pp->g += raw->g; };
    return n;
}

void AdamW::update(ParamStore& store, double lr, double lr_backbone) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (Param* p : store.all()) {
        const double plr = p->backbone ? lr_backbone : lr;
        p->m1 = beta1 * p->m1 + (1 - beta1) * p->g;
        p->m2 = beta2 * p->m2 + (1 - beta2) * p->g.cwiseProduct(p->g);
        const Mat mhat = p->m1 / bc1;
        const Mat vhat = p->m2 / bc2;
        p->v -= plr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
        p->v -= plr * weight_decay * p->v;
    }
}

Mat sinusoid_embed(const Mat& scalars, int dim) {
    const int half = dim / 2;
    Mat out(scalars.rows(), scalars.cols() * dim);
    for (int i = 0; i < scalars.rows(); ++i) {
        for (int j = 0; j < scalars.cols(); ++j) {
            const double x = scalars(i, j) * 2.0 * 3.14159265358979323846;
            for (int f = 0; f < half; ++f) {
                const double freq = std::pow(10000.0, -2.0 * f / dim);
                out(i, j * dim + 2 * f) = std::sin(x * freq);
                out(i, j * dim + 2 * f + 1) = std::cos(x * freq);
            }
        }
    }
    return out;
}

}  // namespace rastervec::nn
