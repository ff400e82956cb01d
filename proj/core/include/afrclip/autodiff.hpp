#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "afrclip/mat.hpp"

namespace afrclip::ad {

// Define-by-run reverse-mode autodiff over Mat. Each op creates a Node
// holding the forward value and a closure that scatters the node's gradient
// into its parents. Graphs are rebuilt every step; parameter nodes persist
// across steps and accumulate gradients until zero_grad().
//
// Forward kernels are shared with the plain inference path (core/mpfa), so
// graph and no-graph evaluation produce bit-identical values.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Mat value;
    Mat grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    Mat& ensure_grad() {
        if (grad.rows != value.rows || grad.cols != value.cols) grad = Mat(value.rows, value.cols);
        return grad;
    }
    void zero_grad() { grad = Mat(); }
};

// Graph recording toggle. With recording off (inference), ops still compute
// values but keep no parents or closures.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

Var constant(Mat v);
Var param(Mat v);  // leaf with requires_grad = true

// Runs reverse accumulation from a scalar [1x1] root.
void backward(const Var& root);

// --- elementwise / broadcast ---------------------------------------------
// Binary ops accept equal shapes, a [1x1] scalar on either side, or a
// [1xC] row vector broadcast over the rows of an [RxC] operand.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var gelu(const Var& a);  // tanh approximation
Var sigmoid(const Var& a);
Var logv(const Var& a);
Var square(const Var& a);
Var clampv(const Var& a, double lo, double hi);  // zero gradient outside [lo, hi]

// --- linear algebra --------------------------------------------------------
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
// x [N x in] * w [out x in]^T + b [1 x out]
Var linear(const Var& x, const Var& w, const Var& b);

// --- structure -------------------------------------------------------------
Var concat_rows(const Var& a, const Var& b);
Var concat_cols(const Var& a, const Var& b);
Var slice_rows(const Var& a, int r0, int r1);
Var slice_cols(const Var& a, int c0, int c1);
Var tile_rows(const Var& v, int n);  // v is [1xC]
Var reshape(const Var& a, int rows, int cols);

// --- reductions ------------------------------------------------------------
Var sum_all(const Var& a);
Var mean_all(const Var& a);

// --- fused pipeline kernels ------------------------------------------------
Var softmax_rows(const Var& a);
Var layernorm(const Var& x, const Var& gamma, const Var& beta, double eps);
// cosine of every row of a [NxD] against b [1xD] -> [Nx1]
Var cosine_rows(const Var& a, const Var& b);
Var bilinear_resize(const Var& a, int out_rows, int out_cols);
// stride-1 window mean over the token grid; defined in mpfa.cpp
Var window_mean(const Var& tokens, int m);

}  // namespace afrclip::ad
