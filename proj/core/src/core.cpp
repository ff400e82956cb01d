#include "afrclip/core.hpp"

#include <cmath>

namespace afrclip {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw ShapeError("cosine_similarity: length mismatch " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
    if (u.empty()) throw ShapeError("cosine_similarity: empty vectors");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw NumericError("cosine_similarity: zero-norm input");
    double c = uv / (std::sqrt(uu) * std::sqrt(vv));
    // clamp rounding spill outside [-1, 1]
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

double softmax_pair(double s_a, double s_n) {
    double m = s_a > s_n ? s_a : s_n;
    double ea = std::exp(s_a - m);
    double en = std::exp(s_n - m);
    return ea / (ea + en);
}

namespace {

// align-corners source coordinate for output index i of size n_out
inline double src_coord(int i, int n_in, int n_out) {
    if (n_out <= 1 || n_in <= 1) return 0.0;
    return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
}

}  // namespace

Mat bilinear_resize(const Mat& src, int out_rows, int out_cols) {
    if (src.rows < 1 || src.cols < 1) throw ShapeError("bilinear_resize: empty source");
    if (out_rows < 1 || out_cols < 1) throw ShapeError("bilinear_resize: non-positive target size");
    if (out_rows == src.rows && out_cols == src.cols) return src;

    Mat dst(out_rows, out_cols);
    for (int i = 0; i < out_rows; ++i) {
        double r = src_coord(i, src.rows, out_rows);
        int r0 = static_cast<int>(r);
        int r1 = r0 + 1 < src.rows ? r0 + 1 : r0;
        double fr = r - r0;
        for (int j = 0; j < out_cols; ++j) {
            double c = src_coord(j, src.cols, out_cols);
            int c0 = static_cast<int>(c);
            int c1 = c0 + 1 < src.cols ? c0 + 1 : c0;
            double fc = c - c0;
            double top = src.at(r0, c0) * (1.0 - fc) + src.at(r0, c1) * fc;
            double bot = src.at(r1, c0) * (1.0 - fc) + src.at(r1, c1) * fc;
            dst.at(i, j) = top * (1.0 - fr) + bot * fr;
        }
    }
    return dst;
}

Mat nearest_resize(const Mat& src, int out_rows, int out_cols) {
    if (src.rows < 1 || src.cols < 1) throw ShapeError("nearest_resize: empty source");
    if (out_rows < 1 || out_cols < 1) throw ShapeError("nearest_resize: non-positive target size");
    Mat dst(out_rows, out_cols);
    for (int i = 0; i < out_rows; ++i) {
        int r = static_cast<int>(std::llround(src_coord(i, src.rows, out_rows)));
        for (int j = 0; j < out_cols; ++j) {
            int c = static_cast<int>(std::llround(src_coord(j, src.cols, out_cols)));
            dst.at(i, j) = src.at(r, c);
        }
    }
    return dst;
}

bool perfect_square(int n, int* side) {
    if (n < 1) return false;
    int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    if (s * s != n) return false;
    if (side) *side = s;
    return true;
}

TokenGrid grid_from_tokens(const Mat& tokens) {
    int side = 0;
    if (!perfect_square(tokens.rows, &side))
        throw ShapeError("grid_from_tokens: token count " + std::to_string(tokens.rows) +
                         " is not a perfect square");
    return TokenGrid{side, tokens.cols, tokens};
}

Mat tokens_from_grid(const TokenGrid& grid) {
    require_shape(grid.tokens, grid.side * grid.side, grid.channels, "tokens_from_grid");
    return grid.tokens;
}

void require_probability_map(const Mat& m, const char* what) {
    for (double v : m.data)
        if (!(v >= 0.0 && v <= 1.0))
            throw NumericError(std::string(what) + ": value " + std::to_string(v) + " outside [0,1]");
}

}  // namespace afrclip
