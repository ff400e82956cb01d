#include "afrclip/backbone.hpp"

#include <cmath>
#include <sstream>

#include "afrclip/core.hpp"
#include "afrclip/rng.hpp"

namespace afrclip {

namespace {

constexpr double kLnEps = 1e-5;
constexpr int kMaxTextTokens = 77;

Mat gaussian_mat(uint64_t seed, const std::string& name, int rows, int cols, double stddev) {
    Rng rng(mix_seed(seed, fnv1a64(name)));
    Mat m(rows, cols);
    for (double& v : m.data) v = rng.gaussian(0.0, stddev);
    return m;
}

std::vector<std::string> tokenize(const std::string& prompt) {
    std::vector<std::string> tokens;
    std::stringstream ss(prompt);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

}  // namespace

Image resize_image(const Image& img, int out_h, int out_w) {
    if (img.h == out_h && img.w == out_w) return img;
    Image out(out_h, out_w);
    for (int c = 0; c < 3; ++c) out.set_channel(c, bilinear_resize(img.channel(c), out_h, out_w));
    return out;
}

int Backbone::cnn_stem_c1() const { return std::max(4, cnn_dim_ / 4); }
int Backbone::cnn_stem_c2() const { return std::max(4, cnn_dim_ / 2); }

Backbone Backbone::surrogate(const RunConfig& cfg, uint64_t seed) {
    cfg.validate();
    Backbone b;
    b.image_size_ = cfg.image_size;
    b.patch_size_ = cfg.patch_size;
    b.heads_ = cfg.heads;
    b.embed_dim_ = cfg.embed_dim;
    b.text_dim_ = cfg.text_dim;
    b.cnn_dim_ = cfg.cnn_dim;
    b.grid_side_ = cfg.grid_side();
    b.n_tokens_ = cfg.n_tokens();
    b.norm_mean_ = cfg.norm_mean;
    b.norm_std_ = cfg.norm_std;
    b.text_seed_ = mix_seed(seed, fnv1a64("text.vocab"));
    b.id_ = "surrogate-" + std::to_string(seed);

    int dv = cfg.embed_dim;
    int pdim = 3 * cfg.patch_size * cfg.patch_size;
    b.patch_w_ = gaussian_mat(seed, "vit.patch_embed.weight", dv, pdim, 1.0 / std::sqrt(pdim));
    b.patch_b_ = Mat(1, dv);
    b.class_token_ = gaussian_mat(seed, "vit.class_token", 1, dv, 0.02);
    b.pos_embed_ = gaussian_mat(seed, "vit.pos_embed", b.n_tokens_, dv, 0.02);

    double attn_std = 1.0 / std::sqrt(dv);
    for (int l = 1; l <= cfg.layers; ++l) {
        std::string p = "vit.layer" + std::to_string(l) + ".";
        Layer L;
        Mat ones(1, dv, 1.0);
        L.ln1_g = ad::constant(ones);
        L.ln1_b = ad::constant(Mat(1, dv));
        L.wq = ad::constant(gaussian_mat(seed, p + "attn.q.weight", dv, dv, attn_std));
        L.bq = ad::constant(Mat(1, dv));
        L.wk = ad::constant(gaussian_mat(seed, p + "attn.k.weight", dv, dv, attn_std));
        L.bk = ad::constant(Mat(1, dv));
        L.wv = ad::constant(gaussian_mat(seed, p + "attn.v.weight", dv, dv, attn_std));
        L.bv = ad::constant(Mat(1, dv));
        L.wo = ad::constant(gaussian_mat(seed, p + "attn.out.weight", dv, dv, attn_std));
        L.bo = ad::constant(Mat(1, dv));
        L.ln2_g = ad::constant(ones);
        L.ln2_b = ad::constant(Mat(1, dv));
        L.w1 = ad::constant(gaussian_mat(seed, p + "mlp.fc1.weight", 4 * dv, dv, attn_std));
        L.b1 = ad::constant(Mat(1, 4 * dv));
        L.w2 = ad::constant(gaussian_mat(seed, p + "mlp.fc2.weight", dv, 4 * dv, 1.0 / std::sqrt(4.0 * dv)));
        L.b2 = ad::constant(Mat(1, dv));
        b.layers_.push_back(std::move(L));
    }

    int c1 = b.cnn_stem_c1(), c2 = b.cnn_stem_c2();
    int ins[3] = {3, c1, c2};
    int outs[3] = {c1, c2, b.cnn_dim_};
    for (int i = 0; i < 3; ++i) {
        std::string name = "cnn.conv" + std::to_string(i + 1);
        b.conv_w_[i] = gaussian_mat(seed, name + ".weight", outs[i], ins[i] * 9, 1.0 / std::sqrt(ins[i] * 9.0));
        b.conv_b_[i] = Mat(1, outs[i]);
    }
    return b;
}

Backbone Backbone::from_store(const RunConfig& cfg, const TensorStore& store, std::string source_id) {
    cfg.validate();
    // Build the surrogate skeleton for dims, then overwrite every tensor.
    Backbone b = surrogate(cfg, cfg.backbone_seed);
    b.id_ = std::move(source_id);

    std::vector<std::string> problems;
    auto fetch = [&](const std::string& name, int rows, int cols) -> Mat {
        if (!store.contains(name)) {
            problems.push_back(name + ": missing");
            return Mat(rows, cols);
        }
        const Tensor& t = store.get(name);
        if (t.shape.size() != 2 || t.shape[0] != rows || t.shape[1] != cols) {
            std::string got;
            for (size_t i = 0; i < t.shape.size(); ++i) got += (i ? "x" : "") + std::to_string(t.shape[i]);
            problems.push_back(name + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                               ", got " + got);
            return Mat(rows, cols);
        }
        return t.as_mat();
    };

    int dv = cfg.embed_dim;
    b.patch_w_ = fetch("vit.patch_embed.weight", dv, 3 * cfg.patch_size * cfg.patch_size);
    b.patch_b_ = fetch("vit.patch_embed.bias", 1, dv);
    b.class_token_ = fetch("vit.class_token", 1, dv);
    b.pos_embed_ = fetch("vit.pos_embed", b.n_tokens_, dv);
    for (int l = 1; l <= cfg.layers; ++l) {
        std::string p = "vit.layer" + std::to_string(l) + ".";
        Layer& L = b.layers_[l - 1];
        L.ln1_g = ad::constant(fetch(p + "ln1.gamma", 1, dv));
        L.ln1_b = ad::constant(fetch(p + "ln1.beta", 1, dv));
        L.wq = ad::constant(fetch(p + "attn.q.weight", dv, dv));
        L.bq = ad::constant(fetch(p + "attn.q.bias", 1, dv));
        L.wk = ad::constant(fetch(p + "attn.k.weight", dv, dv));
        L.bk = ad::constant(fetch(p + "attn.k.bias", 1, dv));
        L.wv = ad::constant(fetch(p + "attn.v.weight", dv, dv));
        L.bv = ad::constant(fetch(p + "attn.v.bias", 1, dv));
        L.wo = ad::constant(fetch(p + "attn.out.weight", dv, dv));
        L.bo = ad::constant(fetch(p + "attn.out.bias", 1, dv));
        L.ln2_g = ad::constant(fetch(p + "ln2.gamma", 1, dv));
        L.ln2_b = ad::constant(fetch(p + "ln2.beta", 1, dv));
        L.w1 = ad::constant(fetch(p + "mlp.fc1.weight", 4 * dv, dv));
        L.b1 = ad::constant(fetch(p + "mlp.fc1.bias", 1, 4 * dv));
        L.w2 = ad::constant(fetch(p + "mlp.fc2.weight", dv, 4 * dv));
        L.b2 = ad::constant(fetch(p + "mlp.fc2.bias", 1, dv));
    }
    int c1 = b.cnn_stem_c1(), c2 = b.cnn_stem_c2();
    int ins[3] = {3, c1, c2};
    int outs[3] = {c1, c2, b.cnn_dim_};
    for (int i = 0; i < 3; ++i) {
        std::string name = "cnn.conv" + std::to_string(i + 1);
        b.conv_w_[i] = fetch(name + ".weight", outs[i], ins[i] * 9);
        b.conv_b_[i] = fetch(name + ".bias", 1, outs[i]);
    }
    auto it = store.meta().find("text_seed");
    if (it != store.meta().end()) b.text_seed_ = std::stoull(it->second);

    if (!problems.empty()) {
        std::string msg = "backbone: checkpoint does not match config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return b;
}

Backbone Backbone::load(const RunConfig& cfg) {
    if (cfg.backbone_mode == "surrogate") return surrogate(cfg, cfg.backbone_seed);
    if (cfg.backbone_mode.rfind("file:", 0) == 0) {
        std::string dir = cfg.backbone_mode.substr(5);
        return from_store(cfg, TensorStore::load(dir), "file-" + dir);
    }
    throw ConfigError("backbone.mode must be 'surrogate' or 'file:<dir>', got '" + cfg.backbone_mode + "'");
}

void Backbone::save_tensors(TensorStore& store) const {
    store.put("vit.patch_embed.weight", patch_w_);
    store.put("vit.patch_embed.bias", patch_b_);
    store.put("vit.class_token", class_token_);
    store.put("vit.pos_embed", pos_embed_);
    for (size_t l = 0; l < layers_.size(); ++l) {
        std::string p = "vit.layer" + std::to_string(l + 1) + ".";
        const Layer& L = layers_[l];
        store.put(p + "ln1.gamma", L.ln1_g->value);
        store.put(p + "ln1.beta", L.ln1_b->value);
        store.put(p + "attn.q.weight", L.wq->value);
        store.put(p + "attn.q.bias", L.bq->value);
        store.put(p + "attn.k.weight", L.wk->value);
        store.put(p + "attn.k.bias", L.bk->value);
        store.put(p + "attn.v.weight", L.wv->value);
        store.put(p + "attn.v.bias", L.bv->value);
        store.put(p + "attn.out.weight", L.wo->value);
        store.put(p + "attn.out.bias", L.bo->value);
        store.put(p + "ln2.gamma", L.ln2_g->value);
        store.put(p + "ln2.beta", L.ln2_b->value);
        store.put(p + "mlp.fc1.weight", L.w1->value);
        store.put(p + "mlp.fc1.bias", L.b1->value);
        store.put(p + "mlp.fc2.weight", L.w2->value);
        store.put(p + "mlp.fc2.bias", L.b2->value);
    }
    for (int i = 0; i < 3; ++i) {
        std::string name = "cnn.conv" + std::to_string(i + 1);
        store.put(name + ".weight", conv_w_[i]);
        store.put(name + ".bias", conv_b_[i]);
    }
    store.meta()["text_seed"] = std::to_string(text_seed_);
}

void Backbone::check_image(const Image& img, const char* what) const {
    if (img.h != image_size_ || img.w != image_size_)
        throw ShapeError(std::string(what) + ": image " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                         " does not match configured size " + std::to_string(image_size_));
}

Mat Backbone::embed_patches(const Image& img) const {
    check_image(img, "backbone::embed_patches");
    int p = patch_size_;
    int pdim = 3 * p * p;
    Mat patches(grid_side_ * grid_side_, pdim);
    for (int pr = 0; pr < grid_side_; ++pr)
        for (int pc = 0; pc < grid_side_; ++pc) {
            double* row = patches.row(pr * grid_side_ + pc);
            int k = 0;
            for (int c = 0; c < 3; ++c)
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx)
                        row[k++] = (img.at(c, pr * p + dy, pc * p + dx) - norm_mean_[c]) / norm_std_[c];
        }
    Mat emb = matmul_nt(patches, patch_w_);
    Mat tokens(n_tokens_, embed_dim_);
    for (int d = 0; d < embed_dim_; ++d) tokens.at(0, d) = class_token_.at(0, d);
    for (int i = 0; i < emb.rows; ++i)
        for (int d = 0; d < embed_dim_; ++d) tokens.at(i + 1, d) = emb.at(i, d) + patch_b_.at(0, d);
    return tokens + pos_embed_;
}

ad::Var Backbone::apply_layer(int layer_index, const ad::Var& tokens) const {
    if (layer_index < 1 || layer_index > static_cast<int>(layers_.size()))
        throw ShapeError("backbone::apply_layer: layer index " + std::to_string(layer_index) + " out of range");
    const Layer& L = layers_[layer_index - 1];
    int dh = embed_dim_ / heads_;
    double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    ad::Var h = ad::layernorm(tokens, L.ln1_g, L.ln1_b, kLnEps);
    ad::Var q = ad::linear(h, L.wq, L.bq);
    ad::Var k = ad::linear(h, L.wk, L.bk);
    ad::Var v = ad::linear(h, L.wv, L.bv);
    ad::Var merged;
    for (int hi = 0; hi < heads_; ++hi) {
        ad::Var qh = ad::slice_cols(q, hi * dh, (hi + 1) * dh);
        ad::Var kh = ad::slice_cols(k, hi * dh, (hi + 1) * dh);
        ad::Var vh = ad::slice_cols(v, hi * dh, (hi + 1) * dh);
        ad::Var att = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), sc));
        ad::Var oh = ad::matmul(att, vh);
        merged = hi == 0 ? oh : ad::concat_cols(merged, oh);
    }
    ad::Var x = ad::add(tokens, ad::linear(merged, L.wo, L.bo));
    ad::Var h2 = ad::layernorm(x, L.ln2_g, L.ln2_b, kLnEps);
    ad::Var mlp = ad::linear(ad::gelu(ad::linear(h2, L.w1, L.b1)), L.w2, L.b2);
    return ad::add(x, mlp);
}

PatchFeatureSet Backbone::encode_image(const Image& img, const TokenInjectionHook* hook) const {
    check_image(img, "backbone::encode_image");
    PatchFeatureSet out;
    out.grid_side = grid_side_;
    out.n_tokens = n_tokens_;

    ad::Var tokens = ad::constant(embed_patches(img));
    int per_stage = static_cast<int>(layers_.size()) / 4;
    for (int l = 1; l <= static_cast<int>(layers_.size()); ++l) {
        if (hook && *hook && l >= 2) {  // the first layer is never modified
            ad::Var replaced = (*hook)(l, tokens);
            if (!replaced) throw ShapeError("backbone: token injection hook returned null");
            if (!replaced->value.same_shape(tokens->value))
                throw ShapeError("backbone: token injection hook changed token shape from " +
                                 tokens->value.shape_str() + " to " + replaced->value.shape_str());
            tokens = replaced;
        }
        tokens = apply_layer(l, tokens);
        if (l % per_stage == 0 && l / per_stage <= 4) out.stages[l / per_stage - 1] = tokens;
    }
    return out;
}

Mat Backbone::encode_text(const std::string& prompt) const {
    auto tokens = tokenize(prompt);
    if (tokens.empty()) throw ConfigError("encode_text: empty prompt");
    if (tokens.size() > kMaxTextTokens)
        throw ConfigError("encode_text: prompt has " + std::to_string(tokens.size()) + " tokens, limit " +
                          std::to_string(kMaxTextTokens));
    // Unnormalized bag-of-words sum. Prompts that differ only in a state
    // word then differ by exactly that word's vector, so the normal/abnormal
    // offset is identical for every class name: the structure text-on-text
    // scoring needs to transfer to classes never seen in training.
    Mat emb(1, text_dim_);
    double inv = 1.0 / std::sqrt(static_cast<double>(text_dim_));
    for (const auto& tok : tokens) {
        Rng rng(mix_seed(text_seed_, fnv1a64(tok)));
        for (int d = 0; d < text_dim_; ++d) emb.data[d] += rng.gaussian() * inv;
    }
    if (norm2(emb.data.data(), text_dim_) == 0.0)
        throw NumericError("encode_text: degenerate zero embedding");
    return emb;
}

Mat Backbone::extract_cnn_features(const Image& img) const {
    check_image(img, "backbone::extract_cnn_features");
    // normalized planar input
    int size = image_size_;
    std::vector<Mat> act(3);
    for (int c = 0; c < 3; ++c) {
        act[c] = img.channel(c);
        for (double& v : act[c].data) v = (v - norm_mean_[c]) / norm_std_[c];
    }
    for (int stage = 0; stage < 3; ++stage) {
        int c_in = static_cast<int>(act.size());
        int c_out = conv_w_[stage].rows;
        int out_size = (size + 1) / 2;
        std::vector<Mat> next(c_out, Mat(out_size, out_size));
        for (int co = 0; co < c_out; ++co) {
            const double* wrow = conv_w_[stage].row(co);
            double bias = conv_b_[stage].at(0, co);
            for (int y = 0; y < out_size; ++y)
                for (int x = 0; x < out_size; ++x) {
                    double s = bias;
                    for (int ci = 0; ci < c_in; ++ci)
                        for (int ky = 0; ky < 3; ++ky) {
                            int iy = 2 * y + ky - 1;
                            if (iy < 0 || iy >= size) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int ix = 2 * x + kx - 1;
                                if (ix < 0 || ix >= size) continue;
                                s += wrow[(ci * 3 + ky) * 3 + kx] * act[ci].at(iy, ix);
                            }
                        }
                    next[co].at(y, x) = s > 0.0 ? s : 0.0;  // ReLU
                }
        }
        act = std::move(next);
        size = out_size;
    }
    Mat feat(1, cnn_dim_);
    double inv = 1.0 / (static_cast<double>(size) * size);
    for (int c = 0; c < cnn_dim_; ++c) {
        double s = 0.0;
        for (double v : act[c].data) s += v;
        feat.data[c] = s * inv;
    }
    return feat;
}

}  // namespace afrclip
