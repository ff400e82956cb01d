#include "afrclip/mpfa.hpp"

#include "afrclip/autodiff.hpp"
#include "afrclip/core.hpp"

namespace afrclip::mpfa {

Mat aggregate(const Mat& patch_tokens, int m) {
    int side = 0;
    if (!perfect_square(patch_tokens.rows, &side))
        throw ShapeError("mpfa::aggregate: token count " + std::to_string(patch_tokens.rows) +
                         " is not a perfect square");
    if (m < 1 || m % 2 == 0)
        throw ShapeError("mpfa::aggregate: window m must be odd and >= 1, got " + std::to_string(m));
    if (m > side)
        throw ShapeError("mpfa::aggregate: window m=" + std::to_string(m) + " exceeds grid side " +
                         std::to_string(side));
    if (m == 1) return patch_tokens;

    int half = m / 2;
    int D = patch_tokens.cols;
    Mat out(patch_tokens.rows, D);
    for (int r = 0; r < side; ++r) {
        int r0 = std::max(0, r - half), r1 = std::min(side - 1, r + half);
        for (int c = 0; c < side; ++c) {
            int c0 = std::max(0, c - half), c1 = std::min(side - 1, c + half);
            double* orow = out.row(r * side + c);
            int count = (r1 - r0 + 1) * (c1 - c0 + 1);
            for (int rr = r0; rr <= r1; ++rr)
                for (int cc = c0; cc <= c1; ++cc) {
                    const double* irow = patch_tokens.row(rr * side + cc);
                    for (int d = 0; d < D; ++d) orow[d] += irow[d];
                }
            double inv = 1.0 / count;
            for (int d = 0; d < D; ++d) orow[d] *= inv;
        }
    }
    return out;
}

}  // namespace afrclip::mpfa

namespace afrclip::ad {

Var window_mean(const Var& tokens, int m) {
    Mat out = mpfa::aggregate(tokens->value, m);
    int side = 0;
    perfect_square(tokens->value.rows, &side);
    auto tv = tokens;
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    if (grad_enabled() && tv->requires_grad) {
        n->requires_grad = true;
        n->parents = {tokens};
        n->backward_fn = [tv, side, m](Node& nd) {
            // (window mean)^T: each output cell feeds 1/count back to its window
            Mat& ag = tv->ensure_grad();
            int D = nd.value.cols;
            if (m == 1) {
                for (size_t i = 0; i < nd.grad.size(); ++i) ag.data[i] += nd.grad.data[i];
                return;
            }
            int half = m / 2;
            for (int r = 0; r < side; ++r) {
                int r0 = std::max(0, r - half), r1 = std::min(side - 1, r + half);
                for (int c = 0; c < side; ++c) {
                    int c0 = std::max(0, c - half), c1 = std::min(side - 1, c + half);
                    double inv = 1.0 / ((r1 - r0 + 1) * (c1 - c0 + 1));
                    const double* grow = nd.grad.row(r * side + c);
                    for (int rr = r0; rr <= r1; ++rr)
                        for (int cc = c0; cc <= c1; ++cc) {
                            double* arow = ag.row(rr * side + cc);
                            for (int d = 0; d < D; ++d) arow[d] += grow[d] * inv;
                        }
                }
            }
        };
    }
    return n;
}

}  // namespace afrclip::ad
