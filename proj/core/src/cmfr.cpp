#include "afrclip/cmfr.hpp"

namespace afrclip::cmfr {

int hidden_dim(int d) { return std::max(1, d / 2); }

RectifiedField rectify(const ad::Var& f_v, const ad::Var& f_ts, const Weights& w, bool bounded_gate) {
    int n = f_v->value.rows;
    int d = f_v->value.cols;
    if (f_ts->value.rows != 1 || f_ts->value.cols != d)
        throw ShapeError("cmfr::rectify: stateless embedding " + f_ts->value.shape_str() +
                         " does not match visual width " + std::to_string(d));
    if (w.linear_w->value.rows != 2 * d)
        throw ShapeError("cmfr::rectify: weights built for width " +
                         std::to_string(w.linear_w->value.rows / 2) + ", tokens have width " +
                         std::to_string(d));

    ad::Var stacked = ad::concat_cols(f_v, ad::tile_rows(f_ts, n));  // [N x 2D]
    ad::Var h = ad::relu(ad::linear(stacked, w.conv1_w, w.conv1_b));
    ad::Var gates;
    if (bounded_gate)
        gates = ad::sigmoid(ad::linear(ad::linear(h, w.conv2_w, w.conv2_b), w.linear_w, w.linear_b));
    else
        gates = ad::linear(ad::sigmoid(ad::linear(h, w.conv2_w, w.conv2_b)), w.linear_w, w.linear_b);

    RectifiedField out;
    out.m_v = ad::slice_cols(gates, 0, d);
    out.m_t = ad::slice_cols(gates, d, 2 * d);
    out.rows = ad::add(ad::tile_rows(f_ts, n), ad::mul(f_v, out.m_v));
    return out;
}

ad::Var rectify_class_token(const ad::Var& f_v_class, const ad::Var& f_ts, const Weights& w,
                            bool bounded_gate) {
    if (f_v_class->value.rows != 1)
        throw ShapeError("cmfr::rectify_class_token: expected a single row, got " +
                         f_v_class->value.shape_str());
    return rectify(f_v_class, f_ts, w, bounded_gate).rows;
}

}  // namespace afrclip::cmfr
