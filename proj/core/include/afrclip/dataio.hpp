#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "afrclip/image.hpp"

namespace afrclip::dataio {

// One record of a dataset manifest. Labels are inferred from the directory
// name: "good" -> 0, anything else -> 1 with a required ground-truth mask.
struct SampleRecord {
    std::string id;          // unique within the dataset
    std::string class_name;
    std::string split;       // "train" or "test"
    int label = 0;
    std::string image_path;
    std::string mask_path;   // empty for normal samples
    bool mask_binarized = false;  // mask had anti-aliased pixels, thresholded at 127.5
};

struct DatasetManifest {
    std::string dataset_id;
    std::vector<std::string> classes;
    std::vector<SampleRecord> samples;

    std::vector<SampleRecord> split_samples(const std::string& split) const;

    // line-delimited persistence: one tab-separated record per line
    void save(const std::string& path) const;
    static DatasetManifest load_file(const std::string& path);
};

// Fully loaded sample at model resolution: image resized bilinearly, mask
// nearest-neighbor (keeps binarity), label 1 iff the mask has support.
struct LabeledSample {
    Image image;
    Mat mask;  // {0,1}, same dims as image
    int label = 0;
    std::string class_name;
    std::string dataset_id;
    std::string id;
};

// Scans an MVTec-style tree:
//   <root>/<class>/<split>/<good|defect_type>/*.png
//   <root>/<class>/ground_truth/<defect_type>/<stem>_mask.png
// Defect images without a mask are an error. dataset_id defaults to the
// root directory basename.
DatasetManifest load_dataset(const std::string& root, const std::string& dataset_id = "");

LabeledSample load_sample(const SampleRecord& rec, const std::string& dataset_id, int image_size);

// Procedural desk-scale dataset: per-class textures with rectangle/scratch
// defects whose masks are exact by construction. Writes an MVTec-style tree
// (everything under split "test") and returns its manifest. Deterministic
// per seed.
DatasetManifest make_synthetic_dataset(const std::string& root, uint64_t seed,
                                       const std::vector<std::string>& class_names, int n_per_class,
                                       int image_size, const std::string& dataset_id);

// Cross-dataset protocol: training and evaluation datasets must differ.
bool check_protocol(const std::string& train_id, const std::string& test_id);
// The documented default pairing: visa evaluates models trained on mvtec,
// everything else evaluates models trained on visa.
std::string default_train_dataset(const std::string& test_id);

}  // namespace afrclip::dataio
