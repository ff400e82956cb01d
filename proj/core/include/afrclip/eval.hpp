#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "afrclip/dataio.hpp"
#include "afrclip/metrics.hpp"
#include "afrclip/model.hpp"
#include "afrclip/scoring.hpp"

namespace afrclip::eval {

// Produces a result for one loaded sample; the default scorer runs
// scoring::infer with the supplied model, tests may stub it.
using Scorer = std::function<scoring::AnomalyResult(const dataio::LabeledSample&)>;

struct Report {
    std::string dataset_id;
    std::optional<metrics::LevelMetrics> image;  // absent when single-class
    std::optional<metrics::LevelMetrics> pixel;  // absent when no masks
    std::vector<double> image_scores;            // per sample, manifest order
    std::vector<int> image_labels;
    std::vector<std::string> warnings;
};

// Runs the scorer over every sample (worker pool, deterministic order) and
// computes image- and pixel-level metrics where the ground truth permits.
Report evaluate(const std::vector<dataio::LabeledSample>& samples, const std::string& dataset_id,
                const Scorer& scorer, int workers, bool pixel_per_image = false);

std::string metrics_csv(const std::vector<Report>& reports);
std::string metrics_table(const std::vector<Report>& reports);

// Loads cfg.data_split samples of a dataset root at the model resolution.
std::vector<dataio::LabeledSample> load_split(const std::string& root, const std::string& dataset_id,
                                              const std::string& split, int image_size);

}  // namespace afrclip::eval
