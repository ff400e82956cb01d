#include "afrclip/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "afrclip/errors.hpp"

namespace afrclip::metrics {

namespace {

void check_inputs(std::span<const double> scores, std::span<const uint8_t> labels, const char* what) {
    if (scores.size() != labels.size())
        throw ShapeError(std::string(what) + ": score/label count mismatch");
    if (scores.size() < 2) throw ShapeError(std::string(what) + ": need at least 2 samples");
    size_t pos = 0;
    for (uint8_t l : labels) pos += l ? 1 : 0;
    if (pos == 0 || pos == labels.size())
        throw NumericError(std::string(what) + ": both classes must be present");
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const uint8_t> labels) {
    check_inputs(scores, labels, "metrics::auroc");
    size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups, 1-based
    double rank_sum_pos = 0.0;
    size_t n_pos = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k)
            if (labels[idx[k]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        i = j + 1;
    }
    size_t n_neg = n - n_pos;
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double max_f1(std::span<const double> scores, std::span<const uint8_t> labels) {
    check_inputs(scores, labels, "metrics::max_f1");
    size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    size_t total_pos = 0;
    for (uint8_t l : labels) total_pos += l ? 1 : 0;

    // sweep descending; each unique value acts as threshold tau with
    // predictions (score >= tau)
    double best = 0.0;
    size_t tp = 0, predicted = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        for (size_t k = i; k <= j; ++k) {
            ++predicted;
            if (labels[idx[k]]) ++tp;
        }
        double precision = static_cast<double>(tp) / static_cast<double>(predicted);
        double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        if (precision + recall > 0.0) best = std::max(best, 2.0 * precision * recall / (precision + recall));
        i = j + 1;
    }
    return best;
}

LevelMetrics pixel_metrics(const std::vector<Mat>& heatmaps, const std::vector<Mat>& masks,
                           bool per_image) {
    if (heatmaps.size() != masks.size() || heatmaps.empty())
        throw ShapeError("metrics::pixel_metrics: need matching non-empty heatmap/mask lists");
    for (size_t i = 0; i < heatmaps.size(); ++i)
        require_same_shape(heatmaps[i], masks[i], "metrics::pixel_metrics");

    if (!per_image) {
        std::vector<double> scores;
        std::vector<uint8_t> labels;
        for (size_t i = 0; i < heatmaps.size(); ++i) {
            scores.insert(scores.end(), heatmaps[i].data.begin(), heatmaps[i].data.end());
            for (double v : masks[i].data) labels.push_back(v > 0.5 ? 1 : 0);
        }
        return LevelMetrics{auroc(scores, labels), max_f1(scores, labels)};
    }

    LevelMetrics sum;
    int used = 0;
    for (size_t i = 0; i < heatmaps.size(); ++i) {
        std::vector<uint8_t> labels;
        labels.reserve(masks[i].size());
        size_t pos = 0;
        for (double v : masks[i].data) {
            uint8_t l = v > 0.5 ? 1 : 0;
            pos += l;
            labels.push_back(l);
        }
        if (pos == 0 || pos == labels.size()) continue;  // single-class image
        sum.auroc += auroc(heatmaps[i].data, labels);
        sum.max_f1 += max_f1(heatmaps[i].data, labels);
        ++used;
    }
    if (used == 0) throw NumericError("metrics::pixel_metrics: no image has both pixel classes");
    return LevelMetrics{sum.auroc / used, sum.max_f1 / used};
}

LevelMetrics domain_average(const std::map<std::string, LevelMetrics>& per_dataset) {
    if (per_dataset.empty()) throw ShapeError("metrics::domain_average: empty input");
    LevelMetrics sum;
    for (const auto& [name, m] : per_dataset) {
        sum.auroc += m.auroc;
        sum.max_f1 += m.max_f1;
    }
    double n = static_cast<double>(per_dataset.size());
    return LevelMetrics{sum.auroc / n, sum.max_f1 / n};
}

}  // namespace afrclip::metrics
