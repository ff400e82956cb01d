#pragma once

#include "afrclip/autodiff.hpp"

namespace afrclip::cmfr {

// Cross-modal feature rectification. For every token i the block computes
//   f_i    = concat(f_v_i, f_ts)                          [1 x 2D]
//   gates  = linear3(sigmoid(conv2(relu(conv1(f_i)))))    [1 x 2D]
//   m_v_i, m_t_i = split(gates)                           [1 x D] each
//   out_i  = f_ts + f_v_i * m_v_i                         (elementwise)
// applied with one shared set of weights across all tokens. Both "conv"
// layers are pointwise channel mixers (the input is a single position), so
// they are dense maps over channels. m_t is produced by the split but feeds
// nothing downstream. With bounded_gate the sigmoid moves after the linear
// map, bounding the gates to (0,1).
struct Weights {
    ad::Var conv1_w, conv1_b;    // [hidden x 2D], hidden = max(1, D/2)
    ad::Var conv2_w, conv2_b;    // [2D x hidden]
    ad::Var linear_w, linear_b;  // [2D x 2D]
};

struct RectifiedField {
    ad::Var rows;  // [N x D] rectified stateless embeddings, row i = f_ts_i
    ad::Var m_v;   // [N x D]
    ad::Var m_t;   // [N x D], computed and dropped downstream
};

int hidden_dim(int d);

// f_v: [N x D] adapted visual tokens (class token as row 0); f_ts: [1 x D].
RectifiedField rectify(const ad::Var& f_v, const ad::Var& f_ts, const Weights& w,
                       bool bounded_gate = false);

// Single-row convenience used for the image-level score path; identical to
// rectify on a one-row input.
ad::Var rectify_class_token(const ad::Var& f_v_class, const ad::Var& f_ts, const Weights& w,
                            bool bounded_gate = false);

}  // namespace afrclip::cmfr
