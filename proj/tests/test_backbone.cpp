#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "afrclip/backbone.hpp"
#include "afrclip/core.hpp"
#include "test_util.hpp"

using namespace afrclip;

namespace {

const RunConfig& tiny() {
    static RunConfig cfg = testutil::tiny_config();
    return cfg;
}

Image test_image(uint64_t seed, int size) {
    Rng rng(seed);
    return testutil::random_image(rng, size);
}

}  // namespace

TEST_CASE("encode_image tap shapes") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    auto feats = b.encode_image(test_image(1, 32));
    CHECK(feats.grid_side == 4);
    CHECK(feats.n_tokens == 17);
    for (int s = 0; s < 4; ++s) {
        CHECK(feats.stages[s]->value.rows == 17);
        CHECK(feats.stages[s]->value.cols == 16);
        CHECK(feats.stages[s]->value.all_finite());
    }
}

TEST_CASE("default-scale config token arithmetic") {
    // 518/14 -> 37x37 patches + class token
    RunConfig cfg;
    cfg.image_size = 518;
    cfg.patch_size = 14;
    cfg.layers = 24;
    cfg.heads = 16;
    cfg.embed_dim = 64;  // slimmer than the real model; token count is what matters
    cfg.validate();
    CHECK(cfg.n_tokens() == 1370);
    CHECK(cfg.grid_side() == 37);
}

TEST_CASE("encode_image deterministic and seed-sensitive") {
    Backbone b1 = Backbone::surrogate(tiny(), 42);
    Backbone b2 = Backbone::surrogate(tiny(), 42);
    Backbone b3 = Backbone::surrogate(tiny(), 43);
    Image img = test_image(2, 32);
    Mat t1 = b1.encode_image(img).stages[3]->value;
    Mat t2 = b2.encode_image(img).stages[3]->value;
    Mat t3 = b3.encode_image(img).stages[3]->value;
    CHECK(max_abs_diff(t1, t2) == 0.0);
    CHECK(max_abs_diff(t1, t3) > 0.0);
}

TEST_CASE("encode_image rejects wrong image size") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    CHECK_THROWS_AS(b.encode_image(test_image(3, 64)), ShapeError);
}

TEST_CASE("identity hook output is bit-identical to no hook") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    Image img = test_image(4, 32);
    TokenInjectionHook identity = [](int, const ad::Var& tokens) { return tokens; };
    auto plain = b.encode_image(img);
    auto hooked = b.encode_image(img, &identity);
    for (int s = 0; s < 4; ++s)
        CHECK(max_abs_diff(plain.stages[s]->value, hooked.stages[s]->value) == 0.0);
}

TEST_CASE("hook is never invoked at layer 1 and sees every later layer") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    std::vector<int> seen;
    TokenInjectionHook probe = [&](int layer, const ad::Var& tokens) {
        seen.push_back(layer);
        return tokens;
    };
    b.encode_image(test_image(5, 32), &probe);
    CHECK(seen == std::vector<int>{2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("shape-violating hooks are rejected") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    TokenInjectionHook bad = [](int, const ad::Var& tokens) {
        return ad::slice_rows(tokens, 0, tokens->value.rows - 1);
    };
    CHECK_THROWS_AS(b.encode_image(test_image(6, 32), &bad), ShapeError);
}

TEST_CASE("stage taps equal layer-by-layer recomputation") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    Image img = test_image(7, 32);
    auto feats = b.encode_image(img);
    ad::Var tokens = ad::constant(b.embed_patches(img));
    for (int l = 1; l <= 8; ++l) {
        tokens = b.apply_layer(l, tokens);
        if (l % 2 == 0) CHECK(max_abs_diff(tokens->value, feats.stages[l / 2 - 1]->value) == 0.0);
    }
}

TEST_CASE("encode_text determinism, injectivity, errors") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    Mat a1 = b.encode_text("a photo of a screw");
    Mat a2 = b.encode_text("a photo of a screw");
    Mat bottle = b.encode_text("a photo of a bottle");
    CHECK(max_abs_diff(a1, a2) == 0.0);
    CHECK(max_abs_diff(a1, bottle) > 0.0);
    CHECK_THROWS_AS(b.encode_text(""), ConfigError);
    CHECK_THROWS_AS(b.encode_text("   "), ConfigError);

    std::string long_prompt;
    for (int i = 0; i < 80; ++i) long_prompt += "word" + std::to_string(i) + " ";
    CHECK_THROWS_AS(b.encode_text(long_prompt), ConfigError);
}

TEST_CASE("state-word offset is identical across class names") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    Mat delta_screw = b.encode_text("a photo of a defective screw") - b.encode_text("a photo of a normal screw");
    Mat delta_bottle = b.encode_text("a photo of a defective bottle") - b.encode_text("a photo of a normal bottle");
    CHECK(max_abs_diff(delta_screw, delta_bottle) < 1e-12);
}

TEST_CASE("cnn features: determinism, shape, sensitivity") {
    Backbone b = Backbone::surrogate(tiny(), 42);
    Image zero(32, 32);
    Mat f1 = b.extract_cnn_features(zero);
    Mat f2 = b.extract_cnn_features(zero);
    CHECK(f1.rows == 1);
    CHECK(f1.cols == 8);
    CHECK(max_abs_diff(f1, f2) == 0.0);

    // a one-patch change on a live image must reach the pooled feature
    Image base = test_image(30, 32);
    Image perturbed = base;
    for (int c = 0; c < 3; ++c)
        for (int y = 8; y < 16; ++y)
            for (int x = 8; x < 16; ++x) perturbed.at(c, y, x) = 1.0 - perturbed.at(c, y, x);
    Mat f3 = b.extract_cnn_features(base);
    Mat f4 = b.extract_cnn_features(perturbed);
    CHECK(max_abs_diff(f3, f4) > 0.0);
}

TEST_CASE("tensor round trip through the store preserves the encoder") {
    namespace fs = std::filesystem;
    Backbone b = Backbone::surrogate(tiny(), 42);
    TensorStore store;
    b.save_tensors(store);
    std::string dir = (fs::temp_directory_path() / "afrclip_bb_roundtrip").string();
    store.save(dir);

    Backbone loaded = Backbone::from_store(tiny(), TensorStore::load(dir), "test");
    Image img = test_image(8, 32);
    // f32 serialization rounds the weights; outputs agree to float precision
    Mat a = b.encode_image(img).stages[3]->value;
    Mat c = loaded.encode_image(img).stages[3]->value;
    CHECK(max_abs_diff(a, c) < 1e-4);
    fs::remove_all(dir);
}

TEST_CASE("from_store rejects mismatched shapes listing tensors") {
    namespace fs = std::filesystem;
    Backbone b = Backbone::surrogate(tiny(), 42);
    TensorStore store;
    b.save_tensors(store);
    RunConfig wider = tiny();
    wider.embed_dim = 24;
    try {
        Backbone::from_store(wider, store, "test");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        CHECK(msg.find("vit.patch_embed.weight") != std::string::npos);
        CHECK(msg.find("expected") != std::string::npos);
    }
}

TEST_CASE("surrogate weights differ by seed, repeat by seed") {
    TensorStore s0a, s0b, s1;
    Backbone::surrogate(tiny(), 0).save_tensors(s0a);
    Backbone::surrogate(tiny(), 0).save_tensors(s0b);
    Backbone::surrogate(tiny(), 1).save_tensors(s1);
    const Mat a = s0a.get("vit.layer1.attn.q.weight").as_mat();
    const Mat b = s0b.get("vit.layer1.attn.q.weight").as_mat();
    const Mat c = s1.get("vit.layer1.attn.q.weight").as_mat();
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK(max_abs_diff(a, c) > 0.0);
}
