#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "afrclip/mat.hpp"

namespace afrclip::metrics {

// AUROC via the rank-based Mann-Whitney statistic; ties count 0.5.
// Requires both classes present. O(n log n).
double auroc(std::span<const double> scores, std::span<const uint8_t> labels);

// Maximum F1 over thresholds tau in unique(scores), predicting score >= tau.
double max_f1(std::span<const double> scores, std::span<const uint8_t> labels);

struct LevelMetrics {
    double auroc = 0.0;
    double max_f1 = 0.0;
};

// Flattens every pixel of every (heatmap, mask) pair into one global
// score/label vector. With per_image = true, metrics are instead computed
// per image (images missing a class are skipped) and averaged.
LevelMetrics pixel_metrics(const std::vector<Mat>& heatmaps, const std::vector<Mat>& masks,
                           bool per_image = false);

// Unweighted mean across datasets.
LevelMetrics domain_average(const std::map<std::string, LevelMetrics>& per_dataset);

}  // namespace afrclip::metrics
