#include "afrclip/scoring.hpp"

#include "afrclip/core.hpp"
#include "afrclip/mpfa.hpp"

namespace afrclip::scoring {

double image_score(std::span<const double> f_t1_s, std::span<const double> f_a,
                   std::span<const double> f_n) {
    return softmax_pair(cosine_similarity(f_t1_s, f_a), cosine_similarity(f_t1_s, f_n));
}

Mat pixel_map(const Mat& rect_rows, const Mat& f_a, const Mat& f_n, int grid_side, int out_h, int out_w,
              double temperature) {
    int n_p = grid_side * grid_side;
    if (rect_rows.rows != n_p + 1)
        throw ShapeError("scoring::pixel_map: expected " + std::to_string(n_p + 1) + " rows (class + patches), got " +
                         std::to_string(rect_rows.rows));
    Mat grid(grid_side, grid_side);
    auto fa = std::span(f_a.data.data(), f_a.size());
    auto fn = std::span(f_n.data.data(), f_n.size());
    for (int i = 0; i < n_p; ++i) {
        auto row = std::span(rect_rows.row(i + 1), static_cast<size_t>(rect_rows.cols));
        double sa = cosine_similarity(row, fa);
        double sn = cosine_similarity(row, fn);
        grid.data[i] = softmax_pair(sa / temperature, sn / temperature);
    }
    return bilinear_resize(grid, out_h, out_w);
}

Mat fuse_stages(const std::array<Mat, 4>& maps) {
    for (int s = 1; s < 4; ++s) require_same_shape(maps[0], maps[s], "scoring::fuse_stages");
    Mat out(maps[0].rows, maps[0].cols);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = (maps[0].data[i] + maps[1].data[i] + maps[2].data[i] + maps[3].data[i]) * 0.25;
    return out;
}

PipelineOutputs run_pipeline(const Model& model, const Image& image, const std::string& class_name) {
    const RunConfig& cfg = model.cfg;
    auto text = model.text_embeddings(class_name);

    TokenInjectionHook hook;
    const TokenInjectionHook* hook_ptr = nullptr;
    if (cfg.sp_enabled && (cfg.sp_use_pv || cfg.sp_use_pl)) {
        ad::Var combined;
        if (cfg.sp_use_pv) {
            ad::Var f_cnn = ad::constant(model.backbone.extract_cnn_features(image));
            ad::Var p_v = sp::make_visual_prompts(f_cnn, model.sp_bank);
            combined = cfg.sp_use_pl ? sp::combine_prompts(p_v, model.sp_bank.p_l) : p_v;
        } else {
            combined = model.sp_bank.p_l;
        }
        hook = sp::make_injection_hook(combined, cfg.sp_stages, cfg.layers_per_stage());
        hook_ptr = &hook;
    }

    PatchFeatureSet feats = model.backbone.encode_image(image, hook_ptr);
    int n = feats.n_tokens;
    int g = feats.grid_side;

    PipelineOutputs out;
    std::array<ad::Var, 4> stage_probs;
    for (int s = 0; s < 4; ++s) {
        ad::Var adapted = ad::linear(feats.stages[s], model.vis_adapter_w[s], model.vis_adapter_b[s]);
        ad::Var cls = ad::slice_rows(adapted, 0, 1);
        ad::Var patches = ad::slice_rows(adapted, 1, n);
        if (cfg.mpfa_enabled && cfg.mpfa_m > 1) patches = ad::window_mean(patches, cfg.mpfa_m);
        ad::Var tokens = ad::concat_rows(cls, patches);

        ad::Var rect = cfg.cmfr_enabled
                           ? cmfr::rectify(tokens, text.f_s, model.cmfr_w[s], cfg.cmfr_bounded_gate).rows
                           : ad::tile_rows(text.f_s, n);

        ad::Var s_a = ad::cosine_rows(rect, text.f_a);
        ad::Var s_n = ad::cosine_rows(rect, text.f_n);
        ad::Var probs = ad::sigmoid(ad::scale(ad::sub(s_a, s_n), 1.0 / cfg.score_temperature));

        stage_probs[s] = ad::slice_rows(probs, 0, 1);
        ad::Var grid = ad::reshape(ad::slice_rows(probs, 1, n), g, g);
        out.stage_maps[s] = ad::bilinear_resize(grid, image.h, image.w);
    }

    if (cfg.score_average_image_stages) {
        ad::Var sum = ad::add(ad::add(stage_probs[0], stage_probs[1]), ad::add(stage_probs[2], stage_probs[3]));
        out.image_prob = ad::scale(sum, 0.25);
    } else {
        out.image_prob = stage_probs[3];
    }
    ad::Var fused = ad::add(ad::add(out.stage_maps[0], out.stage_maps[1]),
                            ad::add(out.stage_maps[2], out.stage_maps[3]));
    out.heatmap = ad::scale(fused, 0.25);
    return out;
}

AnomalyResult infer(const Model& model, const Image& image, const std::string& class_name) {
    ad::NoGradGuard guard;
    PipelineOutputs out = run_pipeline(model, image, class_name);
    AnomalyResult result;
    result.image_score = out.image_prob->value.data[0];
    result.heatmap = out.heatmap->value;
    for (int s = 0; s < 4; ++s) result.per_stage_maps[s] = out.stage_maps[s]->value;
    require_probability_map(result.heatmap, "scoring::infer heatmap");
    return result;
}

}  // namespace afrclip::scoring
