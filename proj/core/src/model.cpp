#include "afrclip/model.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "afrclip/rng.hpp"

namespace fs = std::filesystem;

namespace afrclip {

namespace {

ad::Var gaussian_param(uint64_t seed, const std::string& name, int rows, int cols, double stddev) {
    Rng rng(mix_seed(seed, fnv1a64(name)));
    Mat m(rows, cols);
    if (stddev > 0.0)
        for (double& v : m.data) v = rng.gaussian(0.0, stddev);
    return ad::param(std::move(m));
}

std::string cache_file_for(const Backbone& backbone, const prompts::PromptTriplet& t) {
    const char* dir = std::getenv("AFR_CACHE");
    if (!dir || !*dir) return {};
    uint64_t key = fnv1a64(backbone.id());
    key = mix_seed(key, fnv1a64(t.normal));
    key = mix_seed(key, fnv1a64(t.abnormal));
    key = mix_seed(key, fnv1a64(t.stateless));
    return (fs::path(dir) / ("prompt-" + std::to_string(key))).string();
}

}  // namespace

Model Model::create(const RunConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.backbone = Backbone::load(cfg);

    uint64_t seed = cfg.train_seed;
    int d = cfg.shared_dim, dv = cfg.embed_dim;
    for (int s = 0; s < 4; ++s) {
        std::string p = "adapter.stage" + std::to_string(s + 1) + ".";
        m.vis_adapter_w[s] = gaussian_param(seed, p + "weight", d, dv, 1.0 / std::sqrt(dv));
        m.vis_adapter_b[s] = gaussian_param(seed, p + "bias", 1, d, 0.0);
    }
    m.text_adapter_w = gaussian_param(seed, "adapter.text.weight", d, cfg.text_dim,
                                      1.0 / std::sqrt(cfg.text_dim));
    m.text_adapter_b = gaussian_param(seed, "adapter.text.bias", 1, d, 0.0);

    int hidden = cmfr::hidden_dim(d);
    for (int s = 0; s < 4; ++s) {
        std::string p = "cmfr.stage" + std::to_string(s + 1) + ".";
        cmfr::Weights w;
        w.conv1_w = gaussian_param(seed, p + "conv1.weight", hidden, 2 * d, 1.0 / std::sqrt(2.0 * d));
        w.conv1_b = gaussian_param(seed, p + "conv1.bias", 1, hidden, 0.0);
        w.conv2_w = gaussian_param(seed, p + "conv2.weight", 2 * d, hidden, 1.0 / std::sqrt(hidden));
        w.conv2_b = gaussian_param(seed, p + "conv2.bias", 1, 2 * d, 0.0);
        // zero output projection: rectification starts as the identity
        w.linear_w = gaussian_param(seed, p + "linear.weight", 2 * d, 2 * d, 0.0);
        w.linear_b = gaussian_param(seed, p + "linear.bias", 1, 2 * d, 0.0);
        m.cmfr_w[s] = std::move(w);
    }

    for (int i = 0; i < cfg.sp_k; ++i) {
        std::string p = "sp.adapter" + std::to_string(i + 1) + ".";
        m.sp_bank.adapter_w.push_back(
            gaussian_param(seed, p + "weight", dv, cfg.cnn_dim, 1.0 / std::sqrt(cfg.cnn_dim)));
        m.sp_bank.adapter_b.push_back(gaussian_param(seed, p + "bias", 1, dv, 0.0));
    }
    m.sp_bank.p_l = gaussian_param(seed, "sp.p_l", cfg.sp_k, dv, 0.02);
    return m;
}

ParameterRegistry Model::registry() const {
    ParameterRegistry reg;
    for (int s = 0; s < 4; ++s) {
        std::string p = "adapter.stage" + std::to_string(s + 1) + ".";
        reg[p + "weight"] = vis_adapter_w[s];
        reg[p + "bias"] = vis_adapter_b[s];
    }
    reg["adapter.text.weight"] = text_adapter_w;
    reg["adapter.text.bias"] = text_adapter_b;
    for (int s = 0; s < 4; ++s) {
        std::string p = "cmfr.stage" + std::to_string(s + 1) + ".";
        reg[p + "conv1.weight"] = cmfr_w[s].conv1_w;
        reg[p + "conv1.bias"] = cmfr_w[s].conv1_b;
        reg[p + "conv2.weight"] = cmfr_w[s].conv2_w;
        reg[p + "conv2.bias"] = cmfr_w[s].conv2_b;
        reg[p + "linear.weight"] = cmfr_w[s].linear_w;
        reg[p + "linear.bias"] = cmfr_w[s].linear_b;
    }
    for (int i = 0; i < sp_bank.k(); ++i) {
        std::string p = "sp.adapter" + std::to_string(i + 1) + ".";
        reg[p + "weight"] = sp_bank.adapter_w[i];
        reg[p + "bias"] = sp_bank.adapter_b[i];
    }
    reg["sp.p_l"] = sp_bank.p_l;
    return reg;
}

const prompts::RawTriplet& Model::raw_prompts(const std::string& class_name) const {
    std::lock_guard<std::mutex> lock(prompt_cache_->mutex);
    auto it = prompt_cache_->raw.find(class_name);
    if (it != prompt_cache_->raw.end()) return it->second;

    prompts::Templates tpl{cfg.normal_template, cfg.abnormal_template, cfg.stateless_template};
    auto triplet = prompts::build_prompt_triplet(class_name, tpl);

    std::string cache_path = cache_file_for(backbone, triplet);
    if (!cache_path.empty() && fs::exists(cache_path)) {
        TensorStore store = TensorStore::load(cache_path);
        prompts::RawTriplet raw{store.get("normal").as_mat(), store.get("abnormal").as_mat(),
                                store.get("stateless").as_mat()};
        return prompt_cache_->raw.emplace(class_name, std::move(raw)).first->second;
    }

    prompts::RawTriplet raw = prompts::encode_triplet(triplet, backbone);
    if (!cache_path.empty()) {
        TensorStore store;
        store.put("normal", raw.normal);
        store.put("abnormal", raw.abnormal);
        store.put("stateless", raw.stateless);
        store.save(cache_path, /*as_f64=*/true);  // cache must round-trip bit-exactly
    }
    return prompt_cache_->raw.emplace(class_name, std::move(raw)).first->second;
}

prompts::TextEmbeddings Model::text_embeddings(const std::string& class_name) const {
    return prompts::adapt_triplet(raw_prompts(class_name), text_adapter_w, text_adapter_b);
}

void Model::save_checkpoint(const std::string& dir,
                            const std::map<std::string, std::string>& extra_meta) const {
    TensorStore store;
    for (const auto& [name, var] : registry()) store.put(name, var->value);
    store.meta() = checkpoint_meta;
    for (const auto& [k, v] : extra_meta) store.meta()[k] = v;
    store.meta()["config"] = "inline";
    // embed the resolved config so checkpoints are self-describing
    std::string cfg_text = cfg.to_string();
    fs::create_directories(dir);
    std::ofstream cfg_out(fs::path(dir) / "config.txt");
    cfg_out << cfg_text;
    store.save(dir);
}

Model Model::load_checkpoint(const std::string& dir) {
    fs::path cfg_path = fs::path(dir) / "config.txt";
    if (!fs::exists(cfg_path)) throw IoError("checkpoint: missing " + cfg_path.string());
    RunConfig cfg = RunConfig::from_file(cfg_path.string());
    Model m = create(cfg);
    TensorStore store = TensorStore::load(dir);
    for (auto& [name, var] : m.registry()) {
        const Tensor& t = store.get(name);
        Mat loaded = t.as_mat();
        require_same_shape(loaded, var->value, ("checkpoint tensor " + name).c_str());
        var->value = loaded;
    }
    m.checkpoint_meta = store.meta();
    return m;
}

}  // namespace afrclip
