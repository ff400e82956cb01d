#pragma once

#include <array>
#include <span>
#include <string>

#include "afrclip/cmfr.hpp"
#include "afrclip/image.hpp"
#include "afrclip/model.hpp"

namespace afrclip::scoring {

// Text-on-text anomaly scoring: the rectified stateless embedding is
// compared against the normal/abnormal prototypes and the score gap is
// squashed into a probability.

struct AnomalyResult {
    double image_score = 0.0;           // in (0,1)
    Mat heatmap;                        // [H x W], entries in (0,1)
    std::array<Mat, 4> per_stage_maps;  // diagnostic, [H x W] each
};

// P_a = softmax_pair(cos(f, f_a), cos(f, f_n)).
double image_score(std::span<const double> f_t1_s, std::span<const double> f_a,
                   std::span<const double> f_n);

// Per-patch probabilities reshaped to the grid and upsampled to (H, W).
// `rect_rows` must contain the class token as row 0; only rows 1..N_p are
// scored.
Mat pixel_map(const Mat& rect_rows, const Mat& f_a, const Mat& f_n, int grid_side, int out_h, int out_w,
              double temperature = 1.0);

// Elementwise mean of the four per-stage maps.
Mat fuse_stages(const std::array<Mat, 4>& maps);

// Differentiable pipeline outputs, used by both inference and training.
struct PipelineOutputs {
    ad::Var image_prob;                 // [1 x 1]
    ad::Var heatmap;                    // [H x W]
    std::array<ad::Var, 4> stage_maps;  // [H x W]
};

// encode (with SP hook when enabled) -> per-stage adapter -> MPFA -> CMFR ->
// per-stage pixel map -> stage fusion. The image-level probability comes
// from the final-stage class token unless score.average_image_stages is set.
PipelineOutputs run_pipeline(const Model& model, const Image& image, const std::string& class_name);

// Convenience wrapper: runs the pipeline without recording gradients.
AnomalyResult infer(const Model& model, const Image& image, const std::string& class_name);

}  // namespace afrclip::scoring
