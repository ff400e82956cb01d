#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "afrclip/model.hpp"
#include "afrclip/scoring.hpp"
#include "afrclip/sp.hpp"
#include "test_util.hpp"

using namespace afrclip;

namespace {

sp::Bank random_bank(Rng& rng, int k, int d_cnn, int d_v, bool zero_bias = false) {
    sp::Bank bank;
    for (int i = 0; i < k; ++i) {
        bank.adapter_w.push_back(ad::param(testutil::random_mat(rng, d_v, d_cnn, 0.4)));
        bank.adapter_b.push_back(
            zero_bias ? ad::param(Mat(1, d_v)) : ad::param(testutil::random_mat(rng, 1, d_v, 0.1)));
    }
    bank.p_l = ad::param(testutil::random_mat(rng, k, d_v, 0.02));
    return bank;
}

}  // namespace

TEST_CASE("make_visual_prompts: rows are independent affine maps of one input") {
    Rng rng(1);
    sp::Bank bank = random_bank(rng, 3, 5, 4);
    Mat f_cnn = testutil::random_mat(rng, 1, 5);
    ad::Var pv = sp::make_visual_prompts(ad::constant(f_cnn), bank);
    CHECK(pv->value.rows == 3);
    CHECK(pv->value.cols == 4);
    for (int i = 0; i < 3; ++i) {
        ad::Var row = ad::linear(ad::constant(f_cnn), bank.adapter_w[i], bank.adapter_b[i]);
        for (int j = 0; j < 4; ++j) CHECK(pv->value.at(i, j) == row->value.at(0, j));
    }
}

TEST_CASE("zero cnn feature with zero biases gives the zero matrix") {
    Rng rng(2);
    sp::Bank bank = random_bank(rng, 2, 5, 4, /*zero_bias=*/true);
    ad::Var pv = sp::make_visual_prompts(ad::constant(Mat(1, 5)), bank);
    for (double v : pv->value.data) CHECK(v == 0.0);
}

TEST_CASE("K=1 bank yields that adapter's output") {
    Rng rng(3);
    sp::Bank bank = random_bank(rng, 1, 4, 6);
    Mat f_cnn = testutil::random_mat(rng, 1, 4);
    ad::Var pv = sp::make_visual_prompts(ad::constant(f_cnn), bank);
    ad::Var expect = ad::linear(ad::constant(f_cnn), bank.adapter_w[0], bank.adapter_b[0]);
    CHECK(max_abs_diff(pv->value, expect->value) == 0.0);
}

TEST_CASE("combine_prompts is the elementwise sum") {
    Rng rng(4);
    Mat a = testutil::random_mat(rng, 3, 4), b = testutil::random_mat(rng, 3, 4);
    ad::Var sum = sp::combine_prompts(ad::constant(a), ad::constant(b));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(sum->value.at(i, j) == a.at(i, j) + b.at(i, j));

    CHECK(max_abs_diff(sp::combine_prompts(ad::constant(a), ad::constant(Mat(3, 4)))->value, a) == 0.0);
    CHECK(max_abs_diff(sp::combine_prompts(ad::constant(Mat(3, 4)), ad::constant(b))->value, b) == 0.0);
    CHECK_THROWS_AS(sp::combine_prompts(ad::constant(a), ad::constant(Mat(2, 4))), ShapeError);
}

TEST_CASE("injection hook replaces exactly the last K rows") {
    Rng rng(5);
    Mat prompts = testutil::random_mat(rng, 2, 3);
    auto hook = sp::make_injection_hook(ad::constant(prompts), {1}, 2);  // stage 1 = layers 1..2

    Mat tokens = testutil::random_mat(rng, 8, 3);
    ad::Var out = hook(2, ad::constant(tokens));
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 3; ++j) CHECK(out->value.at(i, j) == tokens.at(i, j));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) CHECK(out->value.at(6 + i, j) == prompts.at(i, j));
}

TEST_CASE("hook is a fixed point when prompts equal the replaced tail") {
    Rng rng(6);
    Mat tokens = testutil::random_mat(rng, 6, 3);
    Mat tail(2, 3);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) tail.at(i, j) = tokens.at(4 + i, j);
    auto hook = sp::make_injection_hook(ad::constant(tail), {1}, 2);
    ad::Var out = hook(2, ad::constant(tokens));
    CHECK(max_abs_diff(out->value, tokens) == 0.0);
}

TEST_CASE("class token row is never touched") {
    Rng rng(7);
    Mat tokens = testutil::random_mat(rng, 9, 4);
    for (int k = 1; k <= 8; ++k) {
        auto hook = sp::make_injection_hook(ad::constant(testutil::random_mat(rng, k, 4)), {1}, 2);
        ad::Var out = hook(2, ad::constant(tokens));
        for (int j = 0; j < 4; ++j) CHECK(out->value.at(0, j) == tokens.at(0, j));
    }
}

TEST_CASE("hook only fires on enabled stages") {
    Rng rng(8);
    Mat prompts = testutil::random_mat(rng, 2, 3);
    Mat tokens = testutil::random_mat(rng, 8, 3);
    auto stage1_only = sp::make_injection_hook(ad::constant(prompts), {1}, 2);
    // layer 3 belongs to stage 2 with 2 layers per stage
    CHECK(max_abs_diff(stage1_only(3, ad::constant(tokens))->value, tokens) == 0.0);
    auto stage2 = sp::make_injection_hook(ad::constant(prompts), {1, 2}, 2);
    CHECK(max_abs_diff(stage2(3, ad::constant(tokens))->value, tokens) > 0.0);
}

TEST_CASE("hook rejects token matrices smaller than K+1") {
    Rng rng(9);
    auto hook = sp::make_injection_hook(ad::constant(testutil::random_mat(rng, 4, 3)), {1}, 2);
    CHECK_THROWS_AS(hook(2, ad::constant(testutil::random_mat(rng, 4, 3))), ShapeError);
    CHECK_THROWS_AS(hook(2, ad::constant(testutil::random_mat(rng, 5, 2))), ShapeError);
}

TEST_CASE("sp disabled equals hook absent bit-for-bit through the model") {
    RunConfig cfg = testutil::tiny_config();
    cfg.sp_enabled = false;
    Model without_sp = Model::create(cfg);
    Rng rng(10);
    Image img = testutil::random_image(rng, cfg.image_size);
    auto r1 = scoring::infer(without_sp, img, "screw");

    auto plain = without_sp.backbone.encode_image(img, nullptr);
    TokenInjectionHook none;
    auto with_null = without_sp.backbone.encode_image(img, &none);
    for (int s = 0; s < 4; ++s)
        CHECK(max_abs_diff(plain.stages[s]->value, with_null.stages[s]->value) == 0.0);
    CHECK(r1.image_score > 0.0);
}

TEST_CASE("seeded default-config prompt matrix regression anchor") {
    RunConfig cfg;  // 64px surrogate, K = 5
    cfg.train_seed = 4242;
    Model model = Model::create(cfg);
    Rng rng(2718);
    Image img(64, 64);
    for (double& v : img.chan) v = rng.uniform();
    ad::NoGradGuard guard;
    Mat f_cnn = model.backbone.extract_cnn_features(img);
    ad::Var pv = sp::make_visual_prompts(ad::constant(f_cnn), model.sp_bank);
    CHECK(pv->value.rows == 5);
    CHECK(pv->value.cols == 32);
    // frozen from the first oracle-verified build
    CHECK(pv->value.at(0, 0) == doctest::Approx(0.154555782600).epsilon(1e-10));
    CHECK(pv->value.at(4, 31) == doctest::Approx(0.143131398578).epsilon(1e-10));
    double sum = 0;
    for (double v : pv->value.data) sum += v;
    CHECK(sum == doctest::Approx(1.856877876517).epsilon(1e-10));
}

TEST_CASE("gradient check: adapters and p_l through injection and encoder") {
    RunConfig cfg = testutil::tiny_config();
    Backbone backbone = Backbone::surrogate(cfg, 42);
    Rng rng(11);
    sp::Bank bank = random_bank(rng, 2, cfg.cnn_dim, cfg.embed_dim);
    Image img = testutil::random_image(rng, cfg.image_size);
    Mat f_cnn = backbone.extract_cnn_features(img);

    std::map<std::string, ad::Var> params{{"a0.w", bank.adapter_w[0]}, {"a0.b", bank.adapter_b[0]},
                                          {"a1.w", bank.adapter_w[1]}, {"a1.b", bank.adapter_b[1]},
                                          {"p_l", bank.p_l}};
    auto result = testutil::check_gradients(params, [&] {
        ad::Var pv = sp::make_visual_prompts(ad::constant(f_cnn), bank);
        ad::Var combined = sp::combine_prompts(pv, bank.p_l);
        auto hook = sp::make_injection_hook(combined, {1}, cfg.layers_per_stage());
        auto feats = backbone.encode_image(img, &hook);
        return ad::mean_all(ad::square(feats.stages[3]));
    });
    INFO("worst ", result.worst_param, " err ", result.max_rel_err);
    CHECK(result.max_rel_err < 1e-4);
}
