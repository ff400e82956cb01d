#include "afrclip/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "afrclip/core.hpp"

namespace afrclip::ad {

namespace {

thread_local bool g_grad_enabled = true;

bool any_requires_grad(const std::vector<Var>& parents) {
    for (const auto& p : parents)
        if (p->requires_grad) return true;
    return false;
}

Var make_node(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (g_grad_enabled && any_requires_grad(parents)) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

enum class Bcast { Same, ScalarB, RowB };

Bcast binary_mode(const Node& a, const Node& b, const char* what) {
    if (a.value.same_shape(b.value)) return Bcast::Same;
    if (b.value.rows == 1 && b.value.cols == 1) return Bcast::ScalarB;
    if (b.value.rows == 1 && b.value.cols == a.value.cols) return Bcast::RowB;
    throw ShapeError(std::string(what) + ": incompatible shapes " + a.value.shape_str() + " vs " +
                     b.value.shape_str());
}

// accumulate g into b's grad respecting the broadcast that produced the op
void scatter_b(Node& b, const Mat& g, Bcast mode) {
    Mat& bg = b.ensure_grad();
    switch (mode) {
        case Bcast::Same:
            for (size_t i = 0; i < g.size(); ++i) bg.data[i] += g.data[i];
            break;
        case Bcast::ScalarB: {
            double s = 0.0;
            for (double v : g.data) s += v;
            bg.data[0] += s;
            break;
        }
        case Bcast::RowB:
            for (int r = 0; r < g.rows; ++r) {
                const double* grow = g.row(r);
                for (int c = 0; c < g.cols; ++c) bg.data[c] += grow[c];
            }
            break;
    }
}

inline double bval(const Mat& b, Bcast mode, int r, int c) {
    switch (mode) {
        case Bcast::Same: return b.at(r, c);
        case Bcast::ScalarB: return b.data[0];
        default: return b.at(0, c);
    }
}

Var unary(const Var& a, Mat value, std::function<void(Node&, Node&)> fn) {
    Var av = a;
    return make_node(std::move(value), {a}, [av, fn = std::move(fn)](Node& n) mutable {
        if (av->requires_grad) fn(n, *av);
    });
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Var constant(Mat v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    return n;
}

Var param(Mat v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    return n;
}

void backward(const Var& root) {
    if (root->value.rows != 1 || root->value.cols != 1)
        throw ShapeError("backward: root must be scalar, got " + root->value.shape_str());
    if (!root->requires_grad) return;

    // iterative post-order DFS; reverse creation order is not guaranteed
    // because parameter nodes persist across graphs
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad().data[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

// --- elementwise -------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    Bcast mode = binary_mode(*a, *b, "ad::add");
    Mat out = a->value;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) += bval(b->value, mode, r, c);
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv, mode](Node& n) {
        if (av->requires_grad) {
            Mat& ag = av->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) ag.data[i] += n.grad.data[i];
        }
        if (bv->requires_grad) scatter_b(*bv, n.grad, mode);
    });
}

Var sub(const Var& a, const Var& b) {
    Bcast mode = binary_mode(*a, *b, "ad::sub");
    Mat out = a->value;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) -= bval(b->value, mode, r, c);
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv, mode](Node& n) {
        if (av->requires_grad) {
            Mat& ag = av->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) ag.data[i] += n.grad.data[i];
        }
        if (bv->requires_grad) {
            Mat neg = n.grad * -1.0;
            scatter_b(*bv, neg, mode);
        }
    });
}

Var mul(const Var& a, const Var& b) {
    Bcast mode = binary_mode(*a, *b, "ad::mul");
    Mat out = a->value;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) *= bval(b->value, mode, r, c);
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv, mode](Node& n) {
        if (av->requires_grad) {
            Mat& ag = av->ensure_grad();
            for (int r = 0; r < n.grad.rows; ++r)
                for (int c = 0; c < n.grad.cols; ++c)
                    ag.at(r, c) += n.grad.at(r, c) * bval(bv->value, mode, r, c);
        }
        if (bv->requires_grad) {
            Mat g(n.grad.rows, n.grad.cols);
            for (int r = 0; r < n.grad.rows; ++r)
                for (int c = 0; c < n.grad.cols; ++c) g.at(r, c) = n.grad.at(r, c) * av->value.at(r, c);
            scatter_b(*bv, g, mode);
        }
    });
}

Var divide(const Var& a, const Var& b) {
    Bcast mode = binary_mode(*a, *b, "ad::divide");
    Mat out = a->value;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) /= bval(b->value, mode, r, c);
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv, mode](Node& n) {
        if (av->requires_grad) {
            Mat& ag = av->ensure_grad();
            for (int r = 0; r < n.grad.rows; ++r)
                for (int c = 0; c < n.grad.cols; ++c)
                    ag.at(r, c) += n.grad.at(r, c) / bval(bv->value, mode, r, c);
        }
        if (bv->requires_grad) {
            Mat g(n.grad.rows, n.grad.cols);
            for (int r = 0; r < n.grad.rows; ++r)
                for (int c = 0; c < n.grad.cols; ++c) {
                    double bvv = bval(bv->value, mode, r, c);
                    g.at(r, c) = -n.grad.at(r, c) * av->value.at(r, c) / (bvv * bvv);
                }
            scatter_b(*bv, g, mode);
        }
    });
}

Var scale(const Var& a, double s) {
    Mat out = a->value * s;
    return unary(a, std::move(out), [s](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) ag.data[i] += n.grad.data[i] * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Mat out = a->value;
    for (double& v : out.data) v += s;
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) ag.data[i] += n.grad.data[i];
    });
}

Var relu(const Var& a) {
    Mat out = a->value;
    for (double& v : out.data)
        if (v < 0.0) v = 0.0;
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (pa.value.data[i] > 0.0) ag.data[i] += n.grad.data[i];
    });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}

Var gelu(const Var& a) {
    Mat out = a->value;
    for (double& v : out.data) {
        double t = std::tanh(kGeluC * (v + 0.044715 * v * v * v));
        v = 0.5 * v * (1.0 + t);
    }
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            double x = pa.value.data[i];
            double u = kGeluC * (x + 0.044715 * x * x * x);
            double t = std::tanh(u);
            double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
            double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
            ag.data[i] += n.grad.data[i] * d;
        }
    });
}

Var sigmoid(const Var& a) {
    Mat out = a->value;
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            double y = n.value.data[i];
            ag.data[i] += n.grad.data[i] * y * (1.0 - y);
        }
    });
}

Var logv(const Var& a) {
    Mat out = a->value;
    for (double& v : out.data) v = std::log(v);
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) ag.data[i] += n.grad.data[i] / pa.value.data[i];
    });
}

Var square(const Var& a) {
    Mat out = a->value;
    for (double& v : out.data) v *= v;
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) ag.data[i] += n.grad.data[i] * 2.0 * pa.value.data[i];
    });
}

Var clampv(const Var& a, double lo, double hi) {
    Mat out = a->value;
    for (double& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
    return unary(a, std::move(out), [lo, hi](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            double x = pa.value.data[i];
            if (x >= lo && x <= hi) ag.data[i] += n.grad.data[i];
        }
    });
}

// --- linear algebra ----------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    Mat out = afrclip::matmul(a->value, b->value);
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv](Node& n) {
        if (av->requires_grad) {
            Mat da = afrclip::matmul_nt(n.grad, bv->value);  // dC * B^T
            Mat& ag = av->ensure_grad();
            for (size_t i = 0; i < da.size(); ++i) ag.data[i] += da.data[i];
        }
        if (bv->requires_grad) {
            Mat db = afrclip::matmul_tn(av->value, n.grad);  // A^T * dC
            Mat& bg = bv->ensure_grad();
            for (size_t i = 0; i < db.size(); ++i) bg.data[i] += db.data[i];
        }
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    Mat out = afrclip::matmul_nt(a->value, b->value);
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv](Node& n) {
        if (av->requires_grad) {
            Mat da = afrclip::matmul(n.grad, bv->value);  // dC * B
            Mat& ag = av->ensure_grad();
            for (size_t i = 0; i < da.size(); ++i) ag.data[i] += da.data[i];
        }
        if (bv->requires_grad) {
            Mat db = afrclip::matmul_tn(n.grad, av->value);  // dC^T * A
            Mat& bg = bv->ensure_grad();
            for (size_t i = 0; i < db.size(); ++i) bg.data[i] += db.data[i];
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    if (b->value.rows != 1 || b->value.cols != w->value.rows)
        throw ShapeError("ad::linear: bias " + b->value.shape_str() + " vs weight " + w->value.shape_str());
    Mat out = afrclip::matmul_nt(x->value, w->value);
    for (int r = 0; r < out.rows; ++r) {
        double* row = out.row(r);
        for (int c = 0; c < out.cols; ++c) row[c] += b->value.data[c];
    }
    Var xv = x, wv = w, bvv = b;
    return make_node(std::move(out), {x, w, b}, [xv, wv, bvv](Node& n) {
        if (xv->requires_grad) {
            Mat dx = afrclip::matmul(n.grad, wv->value);
            Mat& xg = xv->ensure_grad();
            for (size_t i = 0; i < dx.size(); ++i) xg.data[i] += dx.data[i];
        }
        if (wv->requires_grad) {
            Mat dw = afrclip::matmul_tn(n.grad, xv->value);  // [out x in]
            Mat& wg = wv->ensure_grad();
            for (size_t i = 0; i < dw.size(); ++i) wg.data[i] += dw.data[i];
        }
        if (bvv->requires_grad) {
            Mat& bg = bvv->ensure_grad();
            for (int r = 0; r < n.grad.rows; ++r) {
                const double* grow = n.grad.row(r);
                for (int c = 0; c < n.grad.cols; ++c) bg.data[c] += grow[c];
            }
        }
    });
}

// --- structure ----------------------------------------------------------------

Var concat_rows(const Var& a, const Var& b) {
    if (a->value.cols != b->value.cols)
        throw ShapeError("ad::concat_rows: " + a->value.shape_str() + " vs " + b->value.shape_str());
    Mat out(a->value.rows + b->value.rows, a->value.cols);
    std::copy(a->value.data.begin(), a->value.data.end(), out.data.begin());
    std::copy(b->value.data.begin(), b->value.data.end(), out.data.begin() + a->value.size());
    int ar = a->value.rows;
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv, ar](Node& n) {
        if (av->requires_grad) {
            Mat& ag = av->ensure_grad();
            for (size_t i = 0; i < ag.size(); ++i) ag.data[i] += n.grad.data[i];
        }
        if (bv->requires_grad) {
            Mat& bg = bv->ensure_grad();
            size_t off = static_cast<size_t>(ar) * n.grad.cols;
            for (size_t i = 0; i < bg.size(); ++i) bg.data[i] += n.grad.data[off + i];
        }
    });
}

Var concat_cols(const Var& a, const Var& b) {
    if (a->value.rows != b->value.rows)
        throw ShapeError("ad::concat_cols: " + a->value.shape_str() + " vs " + b->value.shape_str());
    Mat out(a->value.rows, a->value.cols + b->value.cols);
    for (int r = 0; r < out.rows; ++r) {
        std::copy(a->value.row(r), a->value.row(r) + a->value.cols, out.row(r));
        std::copy(b->value.row(r), b->value.row(r) + b->value.cols, out.row(r) + a->value.cols);
    }
    int ac = a->value.cols;
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv, ac](Node& n) {
        if (av->requires_grad) {
            Mat& ag = av->ensure_grad();
            for (int r = 0; r < ag.rows; ++r)
                for (int c = 0; c < ac; ++c) ag.at(r, c) += n.grad.at(r, c);
        }
        if (bv->requires_grad) {
            Mat& bg = bv->ensure_grad();
            for (int r = 0; r < bg.rows; ++r)
                for (int c = 0; c < bg.cols; ++c) bg.at(r, c) += n.grad.at(r, ac + c);
        }
    });
}

Var slice_rows(const Var& a, int r0, int r1) {
    if (r0 < 0 || r1 > a->value.rows || r0 >= r1)
        throw ShapeError("ad::slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " +
                         a->value.shape_str());
    Mat out(r1 - r0, a->value.cols);
    std::copy(a->value.row(r0), a->value.row(r0) + out.size(), out.data.begin());
    return unary(a, std::move(out), [r0](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        size_t off = static_cast<size_t>(r0) * ag.cols;
        for (size_t i = 0; i < n.grad.size(); ++i) ag.data[off + i] += n.grad.data[i];
    });
}

Var slice_cols(const Var& a, int c0, int c1) {
    if (c0 < 0 || c1 > a->value.cols || c0 >= c1)
        throw ShapeError("ad::slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " +
                         a->value.shape_str());
    Mat out(a->value.rows, c1 - c0);
    for (int r = 0; r < out.rows; ++r)
        std::copy(a->value.row(r) + c0, a->value.row(r) + c1, out.row(r));
    return unary(a, std::move(out), [c0](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (int r = 0; r < n.grad.rows; ++r)
            for (int c = 0; c < n.grad.cols; ++c) ag.at(r, c0 + c) += n.grad.at(r, c);
    });
}

Var tile_rows(const Var& v, int n_rows) {
    if (v->value.rows != 1) throw ShapeError("ad::tile_rows: expected row vector, got " + v->value.shape_str());
    Mat out(n_rows, v->value.cols);
    for (int r = 0; r < n_rows; ++r)
        std::copy(v->value.data.begin(), v->value.data.end(), out.row(r));
    return unary(v, std::move(out), [](Node& n, Node& pa) {
        Mat& vg = pa.ensure_grad();
        for (int r = 0; r < n.grad.rows; ++r) {
            const double* grow = n.grad.row(r);
            for (int c = 0; c < n.grad.cols; ++c) vg.data[c] += grow[c];
        }
    });
}

Var reshape(const Var& a, int rows, int cols) {
    if (static_cast<size_t>(rows) * cols != a->value.size())
        throw ShapeError("ad::reshape: cannot view " + a->value.shape_str() + " as " + std::to_string(rows) +
                         "x" + std::to_string(cols));
    Mat out = Mat::from_rows(rows, cols, a->value.data);
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) ag.data[i] += n.grad.data[i];
    });
}

// --- reductions -----------------------------------------------------------------

Var sum_all(const Var& a) {
    double s = 0.0;
    for (double v : a->value.data) s += v;
    Mat out(1, 1);
    out.data[0] = s;
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        double g = n.grad.data[0];
        for (double& v : ag.data) v += g;
    });
}

Var mean_all(const Var& a) {
    double inv = 1.0 / static_cast<double>(a->value.size());
    return scale(sum_all(a), inv);
}

// --- fused kernels ----------------------------------------------------------------

Var softmax_rows(const Var& a) {
    Mat out = a->value;
    for (int r = 0; r < out.rows; ++r) {
        double* row = out.row(r);
        double m = row[0];
        for (int c = 1; c < out.cols; ++c) m = std::max(m, row[c]);
        double s = 0.0;
        for (int c = 0; c < out.cols; ++c) {
            row[c] = std::exp(row[c] - m);
            s += row[c];
        }
        for (int c = 0; c < out.cols; ++c) row[c] /= s;
    }
    return unary(a, std::move(out), [](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        for (int r = 0; r < n.value.rows; ++r) {
            const double* y = n.value.row(r);
            const double* dy = n.grad.row(r);
            double dotv = 0.0;
            for (int c = 0; c < n.value.cols; ++c) dotv += y[c] * dy[c];
            double* g = ag.row(r);
            for (int c = 0; c < n.value.cols; ++c) g[c] += y[c] * (dy[c] - dotv);
        }
    });
}

Var layernorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    int D = x->value.cols;
    if (gamma->value.rows != 1 || gamma->value.cols != D || beta->value.rows != 1 || beta->value.cols != D)
        throw ShapeError("ad::layernorm: affine params must be [1x" + std::to_string(D) + "]");
    Mat out(x->value.rows, D);
    Mat xhat(x->value.rows, D);
    std::vector<double> inv_std(x->value.rows);
    for (int r = 0; r < x->value.rows; ++r) {
        const double* xr = x->value.row(r);
        double mu = 0.0;
        for (int c = 0; c < D; ++c) mu += xr[c];
        mu /= D;
        double var = 0.0;
        for (int c = 0; c < D; ++c) {
            double d = xr[c] - mu;
            var += d * d;
        }
        var /= D;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        double* hr = xhat.row(r);
        double* orow = out.row(r);
        for (int c = 0; c < D; ++c) {
            hr[c] = (xr[c] - mu) * is;
            orow[c] = gamma->value.data[c] * hr[c] + beta->value.data[c];
        }
    }
    Var xv = x, gv = gamma, bv = beta;
    return make_node(std::move(out), {x, gamma, beta},
                     [xv, gv, bv, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
        int D = n.value.cols;
        if (gv->requires_grad || bv->requires_grad) {
            Mat& gg = gv->ensure_grad();
            Mat& bg = bv->ensure_grad();
            for (int r = 0; r < n.value.rows; ++r) {
                const double* dy = n.grad.row(r);
                const double* h = xhat.row(r);
                for (int c = 0; c < D; ++c) {
                    if (gv->requires_grad) gg.data[c] += dy[c] * h[c];
                    if (bv->requires_grad) bg.data[c] += dy[c];
                }
            }
        }
        if (xv->requires_grad) {
            Mat& xg = xv->ensure_grad();
            for (int r = 0; r < n.value.rows; ++r) {
                const double* dy = n.grad.row(r);
                const double* h = xhat.row(r);
                double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat*xhat)
                for (int c = 0; c < D; ++c) {
                    double dh = dy[c] * gv->value.data[c];
                    m1 += dh;
                    m2 += dh * h[c];
                }
                m1 /= D;
                m2 /= D;
                double* g = xg.row(r);
                for (int c = 0; c < D; ++c) {
                    double dh = dy[c] * gv->value.data[c];
                    g[c] += (dh - m1 - h[c] * m2) * inv_std[r];
                }
            }
        }
    });
}

Var cosine_rows(const Var& a, const Var& b) {
    if (b->value.rows != 1 || b->value.cols != a->value.cols)
        throw ShapeError("ad::cosine_rows: " + a->value.shape_str() + " vs " + b->value.shape_str());
    int N = a->value.rows, D = a->value.cols;
    Mat out(N, 1);
    for (int r = 0; r < N; ++r)
        out.at(r, 0) = cosine_similarity(std::span(a->value.row(r), static_cast<size_t>(D)),
                                         std::span(b->value.data.data(), static_cast<size_t>(D)));
    Var av = a, bv = b;
    return make_node(std::move(out), {a, b}, [av, bv](Node& n) {
        int N = av->value.rows, D = av->value.cols;
        const double* bd = bv->value.data.data();
        double nb = norm2(bd, D);
        for (int r = 0; r < N; ++r) {
            double g = n.grad.at(r, 0);
            if (g == 0.0) continue;
            const double* ar = av->value.row(r);
            double na = norm2(ar, D);
            double c = n.value.at(r, 0);
            if (av->requires_grad) {
                double* ag = av->ensure_grad().row(r);
                for (int d = 0; d < D; ++d)
                    ag[d] += g * (bd[d] / (na * nb) - c * ar[d] / (na * na));
            }
            if (bv->requires_grad) {
                double* bg = bv->ensure_grad().data.data();
                for (int d = 0; d < D; ++d)
                    bg[d] += g * (ar[d] / (na * nb) - c * bd[d] / (nb * nb));
            }
        }
    });
}

Var bilinear_resize(const Var& a, int out_rows, int out_cols) {
    Mat out = afrclip::bilinear_resize(a->value, out_rows, out_cols);
    int in_rows = a->value.rows, in_cols = a->value.cols;
    return unary(a, std::move(out), [in_rows, in_cols](Node& n, Node& pa) {
        Mat& ag = pa.ensure_grad();
        int H = n.value.rows, W = n.value.cols;
        if (H == in_rows && W == in_cols) {
            for (size_t i = 0; i < n.grad.size(); ++i) ag.data[i] += n.grad.data[i];
            return;
        }
        auto coord = [](int i, int n_in, int n_out) {
            if (n_out <= 1 || n_in <= 1) return 0.0;
            return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
        };
        for (int i = 0; i < H; ++i) {
            double r = coord(i, in_rows, H);
            int r0 = static_cast<int>(r);
            int r1 = r0 + 1 < in_rows ? r0 + 1 : r0;
            double fr = r - r0;
            for (int j = 0; j < W; ++j) {
                double g = n.grad.at(i, j);
                if (g == 0.0) continue;
                double c = coord(j, in_cols, W);
                int c0 = static_cast<int>(c);
                int c1 = c0 + 1 < in_cols ? c0 + 1 : c0;
                double fc = c - c0;
                ag.at(r0, c0) += g * (1.0 - fr) * (1.0 - fc);
                ag.at(r0, c1) += g * (1.0 - fr) * fc;
                ag.at(r1, c0) += g * fr * (1.0 - fc);
                ag.at(r1, c1) += g * fr * fc;
            }
        }
    });
}

}  // namespace afrclip::ad
