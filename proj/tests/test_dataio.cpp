#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "afrclip/dataio.hpp"
#include "afrclip/png_io.hpp"
#include "test_util.hpp"

using namespace afrclip;
using namespace afrclip::dataio;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("synthetic dataset: counts, labels, determinism") {
    fs::path root1 = temp_dir("afrclip_synth1");
    fs::path root2 = temp_dir("afrclip_synth2");
    auto m1 = make_synthetic_dataset(root1.string(), 5, {"stripes", "dots"}, 6, 32, "s1");
    auto m2 = make_synthetic_dataset(root2.string(), 5, {"stripes", "dots"}, 6, 32, "s1");

    CHECK(m1.samples.size() == 12);
    CHECK(m1.classes == std::vector<std::string>{"stripes", "dots"});
    int positives = 0;
    for (const auto& s : m1.samples) positives += s.label;
    CHECK(positives == 6);  // half defective per class

    // identical pixel bytes for identical seeds
    for (size_t i = 0; i < m1.samples.size(); ++i) {
        std::ifstream a(m1.samples[i].image_path, std::ios::binary);
        std::ifstream b(m2.samples[i].image_path, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), {});
        std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
        CHECK_FALSE(sa.empty());
    }

    fs::path root3 = temp_dir("afrclip_synth3");
    auto m3 = make_synthetic_dataset(root3.string(), 6, {"stripes", "dots"}, 6, 32, "s2");
    std::ifstream a(m1.samples[0].image_path, std::ios::binary);
    std::ifstream b(m3.samples[0].image_path, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa != sb);  // different seed, different data

    fs::remove_all(root1);
    fs::remove_all(root2);
    fs::remove_all(root3);
}

TEST_CASE("every defective sample has a non-empty exact mask") {
    fs::path root = temp_dir("afrclip_synth_masks");
    auto m = make_synthetic_dataset(root.string(), 9, {"grid"}, 8, 32, "s");
    for (const auto& rec : m.samples) {
        if (rec.label == 0) {
            CHECK(rec.mask_path.empty());
            continue;
        }
        Mat mask = png_io::read_mask(rec.mask_path);
        double area = 0;
        for (double v : mask.data) area += v;
        CHECK(area > 0);

        // defect support and mask support coincide: compare against the
        // matching good render (same per-sample rng stream prefix)
        LabeledSample s = load_sample(rec, "s", 32);
        CHECK(s.label == 1);
    }
    fs::remove_all(root);
}

TEST_CASE("load_dataset walks the tree and infers labels") {
    fs::path root = temp_dir("afrclip_tree");
    auto manifest = make_synthetic_dataset(root.string(), 3, {"stripes", "waves"}, 10, 32, "tree");
    auto loaded = load_dataset(root.string(), "tree");
    CHECK(loaded.dataset_id == "tree");
    CHECK(loaded.classes.size() == 2);
    CHECK(loaded.samples.size() == 20);
    int positives = 0;
    for (const auto& s : loaded.samples) {
        positives += s.label;
        CHECK(fs::exists(s.image_path));
        if (s.label) CHECK(fs::exists(s.mask_path));
    }
    CHECK(positives == 10);
    fs::remove_all(root);
}

TEST_CASE("defect image without mask is an error naming the path") {
    fs::path root = temp_dir("afrclip_nomask");
    make_synthetic_dataset(root.string(), 3, {"stripes"}, 4, 32, "x");
    // break it: drop one mask
    fs::path gt = root / "stripes" / "ground_truth" / "defect";
    fs::path victim;
    for (const auto& e : fs::directory_iterator(gt)) victim = e.path();
    fs::remove(victim);
    try {
        load_dataset(root.string(), "x");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("no ground-truth mask") != std::string::npos);
    }
    fs::remove_all(root);
}

TEST_CASE("anti-aliased masks are binarized at 127.5") {
    fs::path root = temp_dir("afrclip_aa");
    std::vector<uint8_t> gray{0, 100, 128, 200, 255, 90, 130, 10, 254};
    png_io::write_gray8((root / "m.png").string(), gray, 3, 3);
    bool binarized = false;
    Mat mask = png_io::read_mask((root / "m.png").string(), &binarized);
    CHECK(binarized);
    std::vector<double> expect{0, 0, 1, 1, 1, 0, 1, 0, 1};
    for (int i = 0; i < 9; ++i) CHECK(mask.data[i] == expect[i]);

    std::vector<uint8_t> clean{0, 255, 0, 255};
    png_io::write_gray8((root / "c.png").string(), clean, 2, 2);
    png_io::read_mask((root / "c.png").string(), &binarized);
    CHECK_FALSE(binarized);
    fs::remove_all(root);
}

TEST_CASE("manifest round trip") {
    fs::path root = temp_dir("afrclip_manifest");
    auto m = make_synthetic_dataset(root.string(), 4, {"dots"}, 4, 32, "rt");
    fs::path file = root / "manifest_copy.tsv";
    m.save(file.string());
    auto loaded = DatasetManifest::load_file(file.string());
    CHECK(loaded.dataset_id == m.dataset_id);
    CHECK(loaded.classes == m.classes);
    REQUIRE(loaded.samples.size() == m.samples.size());
    for (size_t i = 0; i < m.samples.size(); ++i) {
        CHECK(loaded.samples[i].id == m.samples[i].id);
        CHECK(loaded.samples[i].class_name == m.samples[i].class_name);
        CHECK(loaded.samples[i].split == m.samples[i].split);
        CHECK(loaded.samples[i].label == m.samples[i].label);
        CHECK(loaded.samples[i].image_path == m.samples[i].image_path);
        CHECK(loaded.samples[i].mask_path == m.samples[i].mask_path);
    }
    fs::remove_all(root);
}

TEST_CASE("sample loading registers mask and image under resize") {
    fs::path root = temp_dir("afrclip_resize");
    auto m = make_synthetic_dataset(root.string(), 11, {"grid"}, 4, 64, "rz");
    for (const auto& rec : m.samples) {
        if (!rec.label) continue;
        // downscale 64 -> 32: axis-aligned defects keep support
        LabeledSample s = load_sample(rec, "rz", 32);
        CHECK(s.image.h == 32);
        CHECK(s.mask.rows == 32);
        double area = 0;
        for (double v : s.mask.data) {
            CHECK((v == 0.0 || v == 1.0));
            area += v;
        }
        CHECK(area > 0);
    }
    fs::remove_all(root);
}

TEST_CASE("cross-dataset protocol") {
    CHECK(check_protocol("visa", "mvtec"));
    CHECK(check_protocol("mvtec", "visa"));
    CHECK_FALSE(check_protocol("visa", "visa"));
    CHECK_THROWS_AS(check_protocol("", "visa"), ConfigError);

    CHECK(default_train_dataset("visa") == "mvtec");
    CHECK(default_train_dataset("VisA") == "mvtec");
    CHECK(default_train_dataset("mvtec") == "visa");
    CHECK(default_train_dataset("btad") == "visa");
}

TEST_CASE("png round trip RGB and gray") {
    fs::path root = temp_dir("afrclip_png");
    Rng rng(1);
    Image img = testutil::random_image(rng, 16);
    png_io::write_image((root / "img.png").string(), img);
    Image back = png_io::read_image((root / "img.png").string());
    CHECK(back.h == 16);
    CHECK(back.w == 16);
    // 8-bit quantization error only
    for (size_t i = 0; i < img.chan.size(); ++i) CHECK(std::abs(back.chan[i] - img.chan[i]) < 1.0 / 254.0);

    CHECK_THROWS_AS(png_io::read_image((root / "missing.png").string()), IoError);
    fs::remove_all(root);
}

TEST_CASE("probability png rounds half up") {
    fs::path root = temp_dir("afrclip_prob");
    Mat p(1, 3);
    p.data = {0.0, 0.5, 1.0};
    png_io::write_probability_png((root / "p.png").string(), p);
    auto raw = png_io::read_png((root / "p.png").string(), true);
    CHECK(raw.bytes[0] == 0);
    CHECK(raw.bytes[1] == 128);  // 127.5 rounds up
    CHECK(raw.bytes[2] == 255);

    Mat bad(1, 1, 1.5);
    CHECK_THROWS_AS(png_io::write_probability_png((root / "bad.png").string(), bad), NumericError);
    fs::remove_all(root);
}
