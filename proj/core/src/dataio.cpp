#include "afrclip/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "afrclip/core.hpp"
#include "afrclip/errors.hpp"
#include "afrclip/png_io.hpp"
#include "afrclip/rng.hpp"

namespace fs = std::filesystem;

namespace afrclip::dataio {

std::vector<SampleRecord> DatasetManifest::split_samples(const std::string& split) const {
    std::vector<SampleRecord> out;
    for (const auto& s : samples)
        if (s.split == split) out.push_back(s);
    return out;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("manifest: cannot write " + path);
    out << "dataset\t" << dataset_id << '\n';
    for (const auto& c : classes) out << "class\t" << c << '\n';
    for (const auto& s : samples)
        out << "sample\t" << s.id << '\t' << s.class_name << '\t' << s.split << '\t' << s.label << '\t'
            << s.image_path << '\t' << (s.mask_path.empty() ? "-" : s.mask_path) << '\t'
            << (s.mask_binarized ? 1 : 0) << '\n';
}

DatasetManifest DatasetManifest::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("manifest: cannot open " + path);
    DatasetManifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string kind;
        std::getline(ss, kind, '\t');
        if (kind == "dataset") {
            std::getline(ss, m.dataset_id, '\t');
        } else if (kind == "class") {
            std::string c;
            std::getline(ss, c, '\t');
            m.classes.push_back(c);
        } else if (kind == "sample") {
            SampleRecord r;
            std::string label, mask, binarized;
            std::getline(ss, r.id, '\t');
            std::getline(ss, r.class_name, '\t');
            std::getline(ss, r.split, '\t');
            std::getline(ss, label, '\t');
            std::getline(ss, r.image_path, '\t');
            std::getline(ss, mask, '\t');
            std::getline(ss, binarized, '\t');
            r.label = std::stoi(label);
            r.mask_path = mask == "-" ? "" : mask;
            r.mask_binarized = binarized == "1";
            m.samples.push_back(std::move(r));
        } else {
            throw IoError("manifest: unknown record kind '" + kind + "' in " + path);
        }
    }
    return m;
}

namespace {

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

std::vector<std::string> sorted_pngs(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace

DatasetManifest load_dataset(const std::string& root, const std::string& dataset_id) {
    fs::path rootp(root);
    if (!fs::is_directory(rootp)) throw IoError("load_dataset: not a directory: " + root);

    DatasetManifest m;
    m.dataset_id = dataset_id.empty() ? rootp.filename().string() : dataset_id;
    if (m.dataset_id.empty()) m.dataset_id = rootp.parent_path().filename().string();

    for (const auto& class_name : sorted_subdirs(rootp)) {
        fs::path class_dir = rootp / class_name;
        bool has_samples = false;
        for (const char* split : {"train", "test"}) {
            fs::path split_dir = class_dir / split;
            if (!fs::is_directory(split_dir)) continue;
            for (const auto& type_name : sorted_subdirs(split_dir)) {
                for (const auto& png : sorted_pngs(split_dir / type_name)) {
                    SampleRecord r;
                    r.class_name = class_name;
                    r.split = split;
                    r.label = type_name == "good" ? 0 : 1;
                    r.image_path = (split_dir / type_name / png).string();
                    std::string stem = fs::path(png).stem().string();
                    r.id = class_name + "/" + split + "/" + type_name + "/" + stem;
                    if (r.label == 1) {
                        fs::path mask = class_dir / "ground_truth" / type_name / (stem + "_mask.png");
                        if (!fs::exists(mask))
                            throw IoError("load_dataset: defect image " + r.image_path +
                                          " has no ground-truth mask (expected " + mask.string() + ")");
                        r.mask_path = mask.string();
                    }
                    m.samples.push_back(std::move(r));
                    has_samples = true;
                }
            }
        }
        if (has_samples) m.classes.push_back(class_name);
    }
    if (m.samples.empty()) throw IoError("load_dataset: no samples found under " + root);
    return m;
}

LabeledSample load_sample(const SampleRecord& rec, const std::string& dataset_id, int image_size) {
    LabeledSample s;
    s.id = rec.id;
    s.class_name = rec.class_name;
    s.dataset_id = dataset_id;
    s.label = rec.label;

    Image raw = png_io::read_image(rec.image_path);
    if (rec.label == 1) {
        bool binarized = false;
        Mat mask = png_io::read_mask(rec.mask_path, &binarized);
        if (binarized)
            std::cerr << "warning: mask " << rec.mask_path << " has anti-aliased pixels, binarized at 127.5\n";
        if (mask.rows != raw.h || mask.cols != raw.w)
            throw ShapeError("load_sample: mask " + rec.mask_path + " is " + mask.shape_str() +
                             " but image is " + std::to_string(raw.h) + "x" + std::to_string(raw.w));
        s.mask = nearest_resize(mask, image_size, image_size);
        bool any = false;
        for (double v : s.mask.data)
            if (v > 0.5) {
                any = true;
                break;
            }
        if (!any)
            throw NumericError("load_sample: defect mask " + rec.mask_path +
                               " lost all positive pixels at resolution " + std::to_string(image_size));
    } else {
        s.mask = Mat(image_size, image_size);
    }
    s.image = resize_image(raw, image_size, image_size);
    return s;
}

namespace {

// texture families; unknown class names hash onto one of these
enum class Family { Stripes, Grid, Dots, Waves };

Family family_for(const std::string& class_name) {
    if (class_name == "stripes") return Family::Stripes;
    if (class_name == "grid") return Family::Grid;
    if (class_name == "dots") return Family::Dots;
    if (class_name == "waves") return Family::Waves;
    return static_cast<Family>(fnv1a64(class_name) % 4);
}

Image render_texture(Family family, uint64_t class_key, Rng& rng, int size) {
    Image img(size, size);
    double phase_x = rng.uniform(0.0, 1.0);
    double phase_y = rng.uniform(0.0, 1.0);
    // Frequency and orientation are drawn per image: the family structure
    // stays recognizable, but no single texture is stable enough to
    // memorize, so "locally inconsistent with the surrounding pattern" is
    // the only cue that works on every sample.
    double freq = 2.5 + rng.uniform(0.0, 4.0) + static_cast<double>(class_key % 3) * 0.5;
    double rot = rng.uniform(0.0, M_PI);
    double cr = std::cos(rot), sr = std::sin(rot);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double u0 = static_cast<double>(x) / size, v0 = static_cast<double>(y) / size;
            double u = cr * u0 - sr * v0, v = sr * u0 + cr * v0;
            double t = 0.0;
            switch (family) {
                case Family::Stripes: t = std::sin(2.0 * M_PI * (freq * v + phase_y)); break;
                case Family::Grid:
                    t = std::sin(2.0 * M_PI * (freq * u + phase_x)) * std::sin(2.0 * M_PI * (freq * v + phase_y));
                    break;
                case Family::Dots: {
                    double cu = std::cos(2.0 * M_PI * (freq * u + phase_x));
                    double cv = std::cos(2.0 * M_PI * (freq * v + phase_y));
                    t = 2.0 * cu * cu * cv * cv - 1.0;
                    break;
                }
                case Family::Waves:
                    t = std::sin(2.0 * M_PI * (freq * v + phase_y) + 1.2 * std::sin(2.0 * M_PI * (1.5 * u + phase_x)));
                    break;
            }
            for (int c = 0; c < 3; ++c) {
                double chroma = 1.0 - 0.12 * c;
                double val = 0.5 + 0.2 * t * chroma + rng.gaussian(0.0, 0.02);
                img.at(c, y, x) = std::clamp(val, 0.0, 1.0);
            }
        }
    return img;
}

void inject_defects(Image& img, Mat& mask, Rng& rng) {
    int size = img.h;
    int n_defects = 1 + static_cast<int>(rng.below(3));
    for (int d = 0; d < n_defects; ++d) {
        double shift = rng.uniform(0.28, 0.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        if (rng.uniform() < 0.6) {
            // rectangle
            int rw = size / 6 + static_cast<int>(rng.below(size / 4));
            int rh = size / 6 + static_cast<int>(rng.below(size / 4));
            int x0 = static_cast<int>(rng.below(std::max(1, size - rw)));
            int y0 = static_cast<int>(rng.below(std::max(1, size - rh)));
            for (int y = y0; y < y0 + rh; ++y)
                for (int x = x0; x < x0 + rw; ++x) {
                    double noise = rng.gaussian(0.0, 0.08);
                    for (int c = 0; c < 3; ++c)
                        img.at(c, y, x) = std::clamp(img.at(c, y, x) + shift + noise, 0.0, 1.0);
                    mask.at(y, x) = 1.0;
                }
        } else {
            // thick diagonal scratch
            double cx = rng.uniform(0.2, 0.8) * size;
            double cy = rng.uniform(0.2, 0.8) * size;
            double angle = rng.uniform(0.0, M_PI);
            double len = rng.uniform(0.35, 0.65) * size;
            int thickness = 3 + static_cast<int>(rng.below(2));
            double dx = std::cos(angle), dy = std::sin(angle);
            for (double t = -len / 2; t <= len / 2; t += 0.5) {
                int px = static_cast<int>(std::lround(cx + t * dx));
                int py = static_cast<int>(std::lround(cy + t * dy));
                for (int oy = -thickness / 2; oy <= thickness / 2; ++oy)
                    for (int ox = -thickness / 2; ox <= thickness / 2; ++ox) {
                        int x = px + ox, y = py + oy;
                        if (x < 0 || x >= size || y < 0 || y >= size) continue;
                        for (int c = 0; c < 3; ++c)
                            img.at(c, y, x) = std::clamp(img.at(c, y, x) + shift, 0.0, 1.0);
                        mask.at(y, x) = 1.0;
                    }
            }
        }
    }
}

std::string zero_pad(int n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", n);
    return buf;
}

}  // namespace

DatasetManifest make_synthetic_dataset(const std::string& root, uint64_t seed,
                                       const std::vector<std::string>& class_names, int n_per_class,
                                       int image_size, const std::string& dataset_id) {
    if (class_names.empty() || n_per_class < 1 || image_size < 16)
        throw ConfigError("make_synthetic_dataset: need classes, n_per_class >= 1, image_size >= 16");

    DatasetManifest m;
    m.dataset_id = dataset_id;
    m.classes = class_names;

    for (const auto& class_name : class_names) {
        Family family = family_for(class_name);
        uint64_t class_key = fnv1a64(class_name);
        fs::path good_dir = fs::path(root) / class_name / "test" / "good";
        fs::path defect_dir = fs::path(root) / class_name / "test" / "defect";
        fs::path mask_dir = fs::path(root) / class_name / "ground_truth" / "defect";
        fs::create_directories(good_dir);
        fs::create_directories(defect_dir);
        fs::create_directories(mask_dir);

        for (int i = 0; i < n_per_class; ++i) {
            Rng rng(mix_seed(seed, mix_seed(class_key, static_cast<uint64_t>(i))));
            Image img = render_texture(family, class_key, rng, image_size);
            bool defect = i >= n_per_class / 2;

            SampleRecord r;
            r.class_name = class_name;
            r.split = "test";
            std::string stem = zero_pad(i);
            if (defect) {
                Mat mask(image_size, image_size);
                inject_defects(img, mask, rng);
                r.label = 1;
                r.image_path = (defect_dir / (stem + ".png")).string();
                r.mask_path = (mask_dir / (stem + "_mask.png")).string();
                r.id = class_name + "/test/defect/" + stem;
                png_io::write_mask_png(r.mask_path, mask);
            } else {
                r.label = 0;
                r.image_path = (good_dir / (stem + ".png")).string();
                r.id = class_name + "/test/good/" + stem;
            }
            png_io::write_image(r.image_path, img);
            m.samples.push_back(std::move(r));
        }
    }
    m.save((fs::path(root) / "manifest.tsv").string());
    return m;
}

bool check_protocol(const std::string& train_id, const std::string& test_id) {
    if (train_id.empty() || test_id.empty())
        throw ConfigError("check_protocol: dataset ids must be non-empty");
    return train_id != test_id;
}

std::string default_train_dataset(const std::string& test_id) {
    std::string lowered = test_id;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lowered == "visa") return "mvtec";
    return "visa";
}

}  // namespace afrclip::dataio
