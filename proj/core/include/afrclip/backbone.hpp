#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "afrclip/autodiff.hpp"
#include "afrclip/config.hpp"
#include "afrclip/image.hpp"
#include "afrclip/tensor_store.hpp"

namespace afrclip {

// Called before transformer layer `layer_index` (1-based, global; never 1)
// with that layer's input tokens. Returns the tokens to feed the layer; the
// backbone rejects hooks that change the token count or width.
using TokenInjectionHook = std::function<ad::Var(int layer_index, const ad::Var& tokens)>;

// Raw per-stage taps, before the trainable linear adapters. Row 0 of every
// stage is the class token, rows 1..N_p the patches in row-major grid order.
struct PatchFeatureSet {
    std::array<ad::Var, 4> stages;
    int grid_side = 0;
    int n_tokens = 0;
};

// Frozen vision/text encoder pair with the stage structure the pipeline
// needs: a ViT partitioned into 4 equal stages with a tap after the last
// layer of each, a token-injection point before every layer but the first,
// a bag-of-words text encoder, and a small CNN stem for global features.
//
// Surrogate weights are derived from a seed: each tensor is drawn from
// Rng(mix_seed(seed, fnv1a64(tensor_name))), gaussian with 1/sqrt(fan_in)
// scale (layernorm affine starts at identity). File mode loads the same
// tensor set from a TensorStore directory.
class Backbone {
public:
    Backbone() = default;  // empty; populate via surrogate()/from_store()/load()

    static Backbone surrogate(const RunConfig& cfg, uint64_t seed);
    static Backbone from_store(const RunConfig& cfg, const TensorStore& store, std::string source_id);
    // dispatches on cfg.backbone_mode ("surrogate" or "file:<dir>")
    static Backbone load(const RunConfig& cfg);

    // Per-stage raw token taps. The image must match the configured
    // resolution and is normalized internally with the config statistics.
    PatchFeatureSet encode_image(const Image& img, const TokenInjectionHook* hook = nullptr) const;

    // Deterministic sentence embedding: L2-normalized sum of per-token
    // hash-seeded gaussian vectors. Whitespace tokenization, 77-token limit.
    Mat encode_text(const std::string& prompt) const;

    // 3 stride-2 convs + ReLU, then global average pooling -> [1 x cnn_dim].
    Mat extract_cnn_features(const Image& img) const;

    // One pre-LN transformer block (1-based index); exposed for layer-by-layer
    // verification in tests.
    ad::Var apply_layer(int layer_index, const ad::Var& tokens) const;

    // Patch embedding + class token + positional embedding -> [N x D_v].
    Mat embed_patches(const Image& img) const;

    void save_tensors(TensorStore& store) const;
    const std::string& id() const { return id_; }

    int n_tokens() const { return n_tokens_; }
    int grid_side() const { return grid_side_; }
    int layers_total() const { return static_cast<int>(layers_.size()); }
    int cnn_stem_c1() const;
    int cnn_stem_c2() const;

private:
    struct Layer {
        ad::Var ln1_g, ln1_b;
        ad::Var wq, bq, wk, bk, wv, bv, wo, bo;
        ad::Var ln2_g, ln2_b;
        ad::Var w1, b1, w2, b2;
    };

    void check_image(const Image& img, const char* what) const;

    // config slice the backbone depends on
    int image_size_ = 0, patch_size_ = 0, heads_ = 0;
    int embed_dim_ = 0, text_dim_ = 0, cnn_dim_ = 0;
    int grid_side_ = 0, n_tokens_ = 0;
    std::array<double, 3> norm_mean_{}, norm_std_{};

    Mat patch_w_, patch_b_;  // [D_v x 3*p*p], [1 x D_v]
    Mat class_token_;        // [1 x D_v]
    Mat pos_embed_;          // [N x D_v]
    std::vector<Layer> layers_;
    std::array<Mat, 3> conv_w_;  // [C_out x C_in*9], 3x3 kernels row-major
    std::array<Mat, 3> conv_b_;  // [1 x C_out]
    uint64_t text_seed_ = 0;
    std::string id_;
};

}  // namespace afrclip
