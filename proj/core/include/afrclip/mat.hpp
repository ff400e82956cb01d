#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "afrclip/errors.hpp"

namespace afrclip {

// Dense row-major double matrix. All pipeline math runs in double; the
// checkpoint wire format narrows to float32 on save.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw ShapeError("Mat: negative dimensions");
    }
    static Mat from_rows(int r, int c, std::vector<double> v) {
        if (static_cast<size_t>(r) * c != v.size()) throw ShapeError("Mat::from_rows: size mismatch");
        Mat m;
        m.rows = r;
        m.cols = c;
        m.data = std::move(v);
        return m;
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return data.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_shape(const Mat& m, int r, int c, const char* what) {
    if (m.rows != r || m.cols != c)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(r) + "x" + std::to_string(c) +
                         ", got " + m.shape_str());
}

inline void require_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// c = a * b
Mat matmul(const Mat& a, const Mat& b);
// c = a * b^T  (inner products of contiguous rows)
Mat matmul_nt(const Mat& a, const Mat& b);
// c = a^T * b
Mat matmul_tn(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat hadamard(const Mat& a, const Mat& b);
Mat operator*(const Mat& a, double s);

double dot(const double* a, const double* b, int n);
double norm2(const double* a, int n);

double max_abs_diff(const Mat& a, const Mat& b);

}  // namespace afrclip
