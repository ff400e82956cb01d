#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "afrclip/autodiff.hpp"
#include "afrclip/rng.hpp"
#include "test_util.hpp"

using namespace afrclip;
using testutil::check_gradients;
using testutil::random_mat;

namespace {

// wraps a scalar-producing graph builder over named params
void expect_grad_ok(const std::map<std::string, ad::Var>& params,
                    const std::function<ad::Var()>& build, double tol = 1e-6) {
    auto result = check_gradients(params, build);
    INFO("worst: ", result.worst_param, " rel err ", result.max_rel_err);
    CHECK(result.max_rel_err < tol);
    CHECK(result.checked > 0);
}

}  // namespace

TEST_CASE("gradcheck elementwise ops") {
    Rng rng(1);
    ad::Var a = ad::param(random_mat(rng, 3, 4));
    ad::Var b = ad::param(random_mat(rng, 3, 4));
    ad::Var row = ad::param(random_mat(rng, 1, 4));
    ad::Var scalar = ad::param(random_mat(rng, 1, 1));
    std::map<std::string, ad::Var> params{{"a", a}, {"b", b}, {"row", row}, {"s", scalar}};

    expect_grad_ok(params, [&] {
        ad::Var x = ad::mul(ad::add(a, b), ad::sub(a, row));
        x = ad::add(x, ad::divide(b, ad::add_scalar(ad::square(scalar), 2.0)));
        x = ad::mul(x, ad::sigmoid(ad::scale(a, 0.5)));
        return ad::mean_all(x);
    });
}

TEST_CASE("gradcheck nonlinearities") {
    Rng rng(2);
    ad::Var a = ad::param(random_mat(rng, 4, 5));
    std::map<std::string, ad::Var> params{{"a", a}};
    expect_grad_ok(params, [&] {
        ad::Var x = ad::gelu(a);
        x = ad::add(x, ad::relu(ad::add_scalar(a, 0.3)));
        x = ad::add(x, ad::logv(ad::add_scalar(ad::sigmoid(a), 0.5)));
        return ad::sum_all(ad::square(x));
    });
}

TEST_CASE("gradcheck matmul family") {
    Rng rng(3);
    ad::Var a = ad::param(random_mat(rng, 3, 4));
    ad::Var b = ad::param(random_mat(rng, 4, 2));
    ad::Var w = ad::param(random_mat(rng, 5, 4));
    ad::Var bias = ad::param(random_mat(rng, 1, 5));
    std::map<std::string, ad::Var> params{{"a", a}, {"b", b}, {"w", w}, {"bias", bias}};
    expect_grad_ok(params, [&] {
        ad::Var m1 = ad::matmul(a, b);        // 3x2
        ad::Var m2 = ad::linear(a, w, bias);  // 3x5
        ad::Var m3 = ad::matmul(m2, w);       // 3x4
        return ad::add(ad::mean_all(ad::square(m1)), ad::mean_all(ad::mul(m3, a)));
    });
}

TEST_CASE("gradcheck structure ops") {
    Rng rng(4);
    ad::Var a = ad::param(random_mat(rng, 4, 3));
    ad::Var b = ad::param(random_mat(rng, 2, 3));
    ad::Var v = ad::param(random_mat(rng, 1, 6));
    std::map<std::string, ad::Var> params{{"a", a}, {"b", b}, {"v", v}};
    expect_grad_ok(params, [&] {
        ad::Var cat = ad::concat_rows(a, b);                        // 6x3
        ad::Var wide = ad::concat_cols(cat, ad::scale(cat, -1.0));  // 6x6
        ad::Var tiled = ad::tile_rows(v, 6);
        ad::Var mixed = ad::mul(wide, tiled);
        ad::Var sl = ad::slice_cols(ad::slice_rows(mixed, 1, 5), 2, 6);
        return ad::sum_all(ad::square(ad::reshape(sl, 2, 8)));
    });
}

TEST_CASE("gradcheck softmax and layernorm") {
    Rng rng(5);
    ad::Var x = ad::param(random_mat(rng, 4, 6));
    ad::Var g = ad::param(random_mat(rng, 1, 6, 0.3));
    ad::Var beta = ad::param(random_mat(rng, 1, 6, 0.3));
    std::map<std::string, ad::Var> params{{"x", x}, {"g", g}, {"beta", beta}};
    expect_grad_ok(params, [&] {
        ad::Var ln = ad::layernorm(x, g, beta, 1e-5);
        ad::Var sm = ad::softmax_rows(ad::scale(ln, 1.7));
        return ad::mean_all(ad::mul(sm, ln));
    });
}

TEST_CASE("gradcheck cosine_rows both sides") {
    Rng rng(6);
    ad::Var a = ad::param(random_mat(rng, 5, 4));
    ad::Var b = ad::param(random_mat(rng, 1, 4));
    std::map<std::string, ad::Var> params{{"a", a}, {"b", b}};
    expect_grad_ok(params, [&] { return ad::mean_all(ad::square(ad::cosine_rows(a, b))); });
}

TEST_CASE("gradcheck bilinear_resize and window_mean") {
    Rng rng(7);
    ad::Var grid = ad::param(random_mat(rng, 4, 4));
    ad::Var tokens = ad::param(random_mat(rng, 16, 3));
    std::map<std::string, ad::Var> params{{"grid", grid}, {"tokens", tokens}};
    expect_grad_ok(params, [&] {
        ad::Var up = ad::bilinear_resize(grid, 9, 7);
        ad::Var down = ad::bilinear_resize(grid, 2, 3);
        ad::Var agg = ad::window_mean(tokens, 3);
        return ad::add(ad::mean_all(ad::square(up)),
                       ad::add(ad::mean_all(ad::square(down)), ad::mean_all(ad::square(agg))));
    });
}

TEST_CASE("backward accumulates into shared parameters") {
    ad::Var p = ad::param(Mat(1, 1, 2.0));
    ad::Var loss = ad::add(ad::square(p), ad::scale(p, 3.0));  // d/dp = 2p + 3 = 7
    ad::backward(loss);
    CHECK(p->grad.data[0] == doctest::Approx(7.0));

    // param reused across two graphs without zeroing: grads accumulate
    ad::Var loss2 = ad::scale(p, 2.0);
    ad::backward(loss2);
    CHECK(p->grad.data[0] == doctest::Approx(9.0));

    p->zero_grad();
    ad::backward(ad::scale(p, 5.0));
    CHECK(p->grad.data[0] == doctest::Approx(5.0));
}

TEST_CASE("no-grad mode records nothing") {
    ad::Var p = ad::param(Mat(2, 2, 1.0));
    ad::NoGradGuard guard;
    ad::Var y = ad::square(ad::scale(p, 3.0));
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
    CHECK(y->value.data[0] == doctest::Approx(9.0));
}

TEST_CASE("graph and no-grad forward produce identical values") {
    Rng rng(8);
    Mat base = random_mat(rng, 6, 5);
    ad::Var p = ad::param(base);
    auto build = [&] {
        ad::Var x = ad::gelu(ad::matmul_nt(p, p));
        x = ad::softmax_rows(x);
        return ad::layernorm(x, ad::constant(Mat(1, 6, 1.0)), ad::constant(Mat(1, 6)), 1e-5);
    };
    ad::Var with_grad = build();
    Mat recorded = with_grad->value;
    {
        ad::NoGradGuard guard;
        CHECK(max_abs_diff(build()->value, recorded) == 0.0);
    }
}

TEST_CASE("backward requires scalar root") {
    ad::Var p = ad::param(Mat(2, 2, 1.0));
    ad::Var y = ad::scale(p, 2.0);
    CHECK_THROWS_AS(ad::backward(y), ShapeError);
}
