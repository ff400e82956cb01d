#include "afrclip/eval.hpp"

#include <atomic>
#include <cstdio>
#include <sstream>
#include <thread>

namespace afrclip::eval {

std::vector<dataio::LabeledSample> load_split(const std::string& root, const std::string& dataset_id,
                                              const std::string& split, int image_size) {
    dataio::DatasetManifest manifest = dataio::load_dataset(root, dataset_id);
    std::vector<dataio::LabeledSample> samples;
    for (const auto& rec : manifest.split_samples(split))
        samples.push_back(dataio::load_sample(rec, manifest.dataset_id, image_size));
    return samples;
}

Report evaluate(const std::vector<dataio::LabeledSample>& samples, const std::string& dataset_id,
                const Scorer& scorer, int workers, bool pixel_per_image) {
    if (samples.empty()) throw ConfigError("evaluate: no samples");
    Report report;
    report.dataset_id = dataset_id;

    std::vector<scoring::AnomalyResult> results(samples.size());
    int n_workers = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    n_workers = std::max(1, std::min<int>(n_workers, static_cast<int>(samples.size())));

    if (n_workers == 1) {
        for (size_t i = 0; i < samples.size(); ++i) results[i] = scorer(samples[i]);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        std::atomic<bool> failed{false};
        std::string error_message;
        std::mutex error_mutex;
        for (int w = 0; w < n_workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    size_t i = next.fetch_add(1);
                    if (i >= samples.size() || failed.load()) return;
                    try {
                        results[i] = scorer(samples[i]);
                    } catch (const std::exception& e) {
                        std::lock_guard<std::mutex> lk(error_mutex);
                        error_message = e.what();
                        failed.store(true);
                        return;
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (failed.load()) throw Error("evaluate: worker failed: " + error_message);
    }

    report.image_scores.reserve(samples.size());
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < samples.size(); ++i) {
        report.image_scores.push_back(results[i].image_score);
        report.image_labels.push_back(samples[i].label);
        (samples[i].label ? has_pos : has_neg) = true;
    }

    if (has_pos && has_neg) {
        std::vector<uint8_t> labels(samples.size());
        for (size_t i = 0; i < samples.size(); ++i) labels[i] = static_cast<uint8_t>(samples[i].label);
        report.image = metrics::LevelMetrics{metrics::auroc(report.image_scores, labels),
                                             metrics::max_f1(report.image_scores, labels)};
    } else {
        report.warnings.push_back("dataset '" + dataset_id + "' has a single image-level class; image metrics skipped");
    }

    bool any_positive_pixel = false;
    for (const auto& s : samples)
        for (double v : s.mask.data)
            if (v > 0.5) {
                any_positive_pixel = true;
                break;
            }
    if (any_positive_pixel) {
        std::vector<Mat> heatmaps, masks;
        for (size_t i = 0; i < samples.size(); ++i) {
            heatmaps.push_back(results[i].heatmap);
            masks.push_back(samples[i].mask);
        }
        report.pixel = metrics::pixel_metrics(heatmaps, masks, pixel_per_image);
    } else {
        report.warnings.push_back("dataset '" + dataset_id + "' has no ground-truth masks; pixel metrics skipped");
    }
    return report;
}

namespace {

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string metrics_csv(const std::vector<Report>& reports) {
    std::ostringstream os;
    os << "dataset,level,auroc,max_f1\n";
    for (const auto& r : reports) {
        if (r.image) os << r.dataset_id << ",image," << fmt6(r.image->auroc) << ',' << fmt6(r.image->max_f1) << '\n';
        if (r.pixel) os << r.dataset_id << ",pixel," << fmt6(r.pixel->auroc) << ',' << fmt6(r.pixel->max_f1) << '\n';
    }
    return os.str();
}

std::string metrics_table(const std::vector<Report>& reports) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-20s %-8s %10s %10s\n", "Dataset", "Level", "AUROC", "max-F1");
    os << line;
    os << std::string(50, '-') << '\n';
    for (const auto& r : reports) {
        if (r.image) {
            std::snprintf(line, sizeof(line), "%-20s %-8s %10.4f %10.4f\n", r.dataset_id.c_str(), "image",
                          r.image->auroc, r.image->max_f1);
            os << line;
        }
        if (r.pixel) {
            std::snprintf(line, sizeof(line), "%-20s %-8s %10.4f %10.4f\n", r.dataset_id.c_str(), "pixel",
                          r.pixel->auroc, r.pixel->max_f1);
            os << line;
        }
    }
    return os.str();
}

}  // namespace afrclip::eval
