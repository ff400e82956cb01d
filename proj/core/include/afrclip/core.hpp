#pragma once

#include <span>

#include "afrclip/mat.hpp"

namespace afrclip {

// Shared numeric primitives used by the scoring pipeline.

// cos(u, v) = <u,v> / (|u||v|). Zero-norm inputs are treated as a bug
// upstream and rejected rather than silently producing NaN.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// exp(sa) / (exp(sa) + exp(sn)), computed in the shifted form. Identical
// to sigmoid(sa - sn).
double softmax_pair(double s_a, double s_n);

// Bilinear interpolation with the align-corners convention: grid corners map
// to image corners, so resizing to the same shape is an exact identity.
Mat bilinear_resize(const Mat& src, int out_rows, int out_cols);

// Nearest-neighbor resize under the same corner alignment; used for binary
// masks where interpolated values would break binarity.
Mat nearest_resize(const Mat& src, int out_rows, int out_cols);

// Token matrix <-> spatial grid views. Tokens are row-major over the grid:
// token r*side + c sits at cell (r, c). The class token must be removed
// before calling.
struct TokenGrid {
    int side = 0;
    int channels = 0;
    Mat tokens;  // [side*side x channels], row-major patch order

    const double* cell(int r, int c) const { return tokens.row(r * side + c); }
    double* cell(int r, int c) { return tokens.row(r * side + c); }
};

TokenGrid grid_from_tokens(const Mat& tokens);
Mat tokens_from_grid(const TokenGrid& grid);

// True iff n is a perfect square; side returned through out parameter.
bool perfect_square(int n, int* side);

// Asserts all entries lie in [0,1]; used to validate probability maps.
void require_probability_map(const Mat& m, const char* what);

}  // namespace afrclip
