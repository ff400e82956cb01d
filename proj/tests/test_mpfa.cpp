#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "afrclip/mpfa.hpp"
#include "test_util.hpp"

using namespace afrclip;

namespace {

// brute-force in-bounds window average, the oracle for aggregate()
Mat window_mean_oracle(const Mat& tokens, int m) {
    int side = static_cast<int>(std::lround(std::sqrt(double(tokens.rows))));
    int half = m / 2;
    Mat out(tokens.rows, tokens.cols);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            for (int d = 0; d < tokens.cols; ++d) {
                double sum = 0.0;
                int count = 0;
                for (int rr = r - half; rr <= r + half; ++rr)
                    for (int cc = c - half; cc <= c + half; ++cc) {
                        if (rr < 0 || rr >= side || cc < 0 || cc >= side) continue;
                        sum += tokens.at(rr * side + cc, d);
                        ++count;
                    }
                out.at(r * side + c, d) = sum / count;
            }
    return out;
}

}  // namespace

TEST_CASE("m=1 is the identity") {
    Rng rng(1);
    Mat tokens = testutil::random_mat(rng, 16, 5);
    CHECK(max_abs_diff(mpfa::aggregate(tokens, 1), tokens) == 0.0);
}

TEST_CASE("constant grids are reproduced exactly for any window") {
    for (int m : {1, 3, 5}) {
        Mat tokens(25, 3, 0.731);
        Mat out = mpfa::aggregate(tokens, m);
        for (double v : out.data) CHECK(v == doctest::Approx(0.731).epsilon(1e-15));
    }
}

TEST_CASE("3x3 grid, values 1..9, m=3 hand values") {
    Mat tokens(9, 1);
    for (int i = 0; i < 9; ++i) tokens.at(i, 0) = i + 1;
    Mat out = mpfa::aggregate(tokens, 3);
    CHECK(out.at(4, 0) == doctest::Approx(5.0));          // center: mean of all nine
    CHECK(out.at(0, 0) == doctest::Approx(3.0));          // corner: mean(1,2,4,5)
    CHECK(out.at(1, 0) == doctest::Approx(3.5));          // edge: mean(1,2,3,4,5,6)
}

TEST_CASE("oracle equivalence for grids up to 8x8, D up to 16, m in {1,3,5}") {
    Rng rng(2);
    for (int side = 1; side <= 8; ++side)
        for (int m : {1, 3, 5}) {
            if (m > side) continue;
            for (int d : {1, 3, 16}) {
                Mat tokens = testutil::random_mat(rng, side * side, d);
                Mat fast = mpfa::aggregate(tokens, m);
                Mat slow = window_mean_oracle(tokens, m);
                CHECK(max_abs_diff(fast, slow) < 1e-12);
            }
        }
}

TEST_CASE("linearity") {
    Rng rng(3);
    Mat x = testutil::random_mat(rng, 36, 4), y = testutil::random_mat(rng, 36, 4);
    double a = 1.7, b = -0.4;
    Mat combo = x * a + y * b;
    Mat lhs = mpfa::aggregate(combo, 3);
    Mat rhs = mpfa::aggregate(x, 3) * a + mpfa::aggregate(y, 3) * b;
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("transpose symmetry") {
    Rng rng(4);
    int side = 6, d = 3;
    Mat tokens = testutil::random_mat(rng, side * side, d);
    Mat transposed(side * side, d);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            for (int k = 0; k < d; ++k) transposed.at(c * side + r, k) = tokens.at(r * side + c, k);
    Mat agg_t = mpfa::aggregate(transposed, 5);
    Mat t_agg = mpfa::aggregate(tokens, 5);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            for (int k = 0; k < d; ++k)
                CHECK(agg_t.at(c * side + r, k) == doctest::Approx(t_agg.at(r * side + c, k)).epsilon(1e-12));
}

TEST_CASE("channel independence") {
    Rng rng(5);
    Mat tokens = testutil::random_mat(rng, 25, 6);
    Mat base = mpfa::aggregate(tokens, 3);
    Mat perturbed = tokens;
    for (int i = 0; i < 25; ++i) perturbed.at(i, 2) += 10.0;  // channel 2 only
    Mat out = mpfa::aggregate(perturbed, 3);
    for (int i = 0; i < 25; ++i)
        for (int d = 0; d < 6; ++d) {
            if (d == 2) continue;
            CHECK(out.at(i, d) == base.at(i, d));
        }
}

TEST_CASE("parameter validation") {
    Mat tokens(16, 2, 1.0);
    CHECK_THROWS_AS(mpfa::aggregate(tokens, 2), ShapeError);   // even
    CHECK_THROWS_AS(mpfa::aggregate(tokens, 0), ShapeError);
    CHECK_THROWS_AS(mpfa::aggregate(tokens, 5), ShapeError);   // m > side(4)
    CHECK_THROWS_AS(mpfa::aggregate(Mat(5, 2, 1.0), 1), ShapeError);  // non-square
}
