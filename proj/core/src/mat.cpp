#include "afrclip/mat.hpp"

#include <algorithm>

namespace afrclip {

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: " + a.shape_str() + " * " + b.shape_str());
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols != b.cols)
        throw ShapeError("matmul_nt: " + a.shape_str() + " * " + b.shape_str() + "^T");
    Mat c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) crow[j] = dot(arow, b.row(j), a.cols);
    }
    return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows != b.rows)
        throw ShapeError("matmul_tn: " + a.shape_str() + "^T * " + b.shape_str());
    Mat c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row(i);
            for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Mat operator+(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "Mat::operator+");
    Mat c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Mat operator-(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "Mat::operator-");
    Mat c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Mat hadamard(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "hadamard");
    Mat c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Mat operator*(const Mat& a, double s) {
    Mat c = a;
    for (double& v : c.data) v *= s;
    return c;
}

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double norm2(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

double max_abs_diff(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace afrclip
