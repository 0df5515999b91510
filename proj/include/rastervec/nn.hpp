#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

// Minimal reverse-mode autodiff on Eigen matrices, double precision.
// A Graph owns the tape for one forward pass; ops build eagerly and
// register backward closures. Values are plain MatrixXd, rows = items,
// cols = channels.

namespace rastervec::nn {

using Mat = Eigen::MatrixXd;

class Graph;

struct Node {
    Mat v;
    Mat g;  // lazily allocated; empty means no gradient reached this node
    bool needs = false;
    std::function<void()> back;
    Graph* graph = nullptr;
};

using Var = std::shared_ptr<Node>;

class Graph {
public:
    Var constant(Mat m);
    Var leaf(Mat m);  // gradient-tracked input
    Var make(Mat v, bool needs, std::function<void()> back);
    void backward(const Var& root);  // root must be 1x1
    size_t size() const { return order_.size(); }

private:
    std::vector<Var> order_;
};

// Ensures the gradient buffer exists, zero-filled.
Mat& grad_of(Node* n);

// ---- elementwise / linear algebra ----
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var cmul(const Var& a, const Var& b);
Var add_n(const std::vector<Var>& xs);
Var scale(const Var& a, double s);
Var add_const(const Var& a, const Mat& c);
Var add_rowvec(const Var& a, const Var& row);   // row: 1 x C
Var mul_colvec(const Var& a, const Var& col);   // col: N x 1, scales rows
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var logsig(const Var& a);  // log(sigmoid(a)), numerically stable
Var square(const Var& a);
Var abs_(const Var& a);
Var sum(const Var& a);   // 1x1
Var mean(const Var& a);  // 1x1

// ---- shape ----
Var concat_cols(const std::vector<Var>& xs);
Var concat_rows(const std::vector<Var>& xs);
Var slice_cols(const Var& a, int j0, int n);
Var slice_rows(const Var& a, int i0, int n);
Var gather_rows(const Var& a, std::vector<int> idx);

// ---- nn building blocks ----
Var softmax_rows(const Var& a);
Var softmax_rows_masked(const Var& a, const Mat& additive_mask);
Var layernorm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var linear(const Var& x, const Var& w, const Var& b);

// 2D convolution on an (H*W) x Cin map (row index = y*W + x).
// Output size written to ho/wo; same formula as floor((H+2p-k)/s)+1.
Var conv2d(const Var& x, int h, int w, const Var& weight, const Var& bias, int k, int stride,
           int pad, int* ho, int* wo);

// Bilinear sampling with zero padding outside the map. Locations are
// normalized: pixel u = x*W - 0.5, v = y*H - 0.5; samples whose 2x2
// support lies fully outside read exactly zero. Gradients flow to the
// feature map and to both location columns.
Var bilinear_sample(const Var& feat, int h, int w, const Var& xloc, const Var& yloc);

// ---- parameters ----
struct Param {
    std::string name;
    Mat v, g;
    Mat m1, m2;  // AdamW moments
    bool backbone = false;
};

class ParamStore {
public:
    Param& create(const std::string& name, int rows, int cols, double std_dev,
                  std::mt19937_64& rng, bool backbone = false);
    Param* find(const std::string& name);
    std::vector<Param*>& all() { return ptrs_; }
    void zero_grad();
    double grad_norm() const;
    void clip_grad_norm(double max_norm);

private:
    std::vector<std::unique_ptr<Param>> params_;
    std::vector<Param*> ptrs_;
    std::unordered_map<std::string, Param*> by_name_;
};

Var param_leaf(Graph& g, Param& p);

struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 1e-4;
    long step = 0;
    void update(ParamStore& store, double lr, double lr_backbone);
};

// Sinusoidal embedding of scalars in [0,1]: dim/2 sin + dim/2 cos pairs
// with geometric frequencies (temperature 10000). One row per input row,
// scalar columns expand contiguously.
Mat sinusoid_embed(const Mat& scalars, int dim_per_scalar);

}  // namespace rastervec::nn
