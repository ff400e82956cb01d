// End-to-end checks of the command-line surface: exit codes, emitted files,
// reproducibility. The binary path comes from the build system.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    fs::path out = fs::temp_directory_path() / "afrclip_cli_out.txt";
    std::string cmd = std::string(AFRCLIP_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    std::ifstream in(out);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    return RunResult{WEXITSTATUS(rc), text};
}

fs::path temp_dir(const char* name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

// shared tiny world: datasets + a 2-epoch checkpoint, built once
struct World {
    fs::path base = temp_dir("afrclip_cli_world");
    fs::path train_root = base / "data-a";
    fs::path test_root = base / "data-b";
    fs::path cfg_file = base / "run.cfg";
    fs::path run_dir = base / "run";

    World() {
        run_cli("synth --out " + train_root.string() + " --seed 31 --classes stripes,grid --per-class 6 --image-size 32 --id cli-a");
        run_cli("synth --out " + test_root.string() + " --seed 32 --classes dots --per-class 6 --image-size 32 --id cli-b");
        std::ofstream cfg(cfg_file);
        cfg << "backbone.image_size = 32\nbackbone.embed_dim = 16\nbackbone.text_dim = 8\n"
               "backbone.shared_dim = 8\nbackbone.cnn_dim = 8\nsp.k = 2\n"
               "train.epochs = 2\ntrain.batch_size = 4\n"
               "data.train_root = " << train_root.string() << "\ndata.train_id = cli-a\n"
               "data.test_root = " << test_root.string() << "\ndata.test_id = cli-b\n";
        cfg.close();
        run_cli("train --config " + cfg_file.string() + " --out " + run_dir.string());
    }
};

World& world() {
    static World w;
    return w;
}

}  // namespace

TEST_CASE("help documents subcommands and config keys") {
    auto r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* word : {"train", "eval", "predict", "ablate", "print-config", "synth"})
        CHECK(r.output.find(word) != std::string::npos);
    for (const char* key : {"backbone.image_size", "sp.stages", "mpfa.m", "score.temperature",
                            "train.lr0", "data.train_root", "cmfr.bounded_gate", "AFR_CACHE"})
        CHECK(r.output.find(key) != std::string::npos);
    auto sub = run_cli("eval --help");
    CHECK(sub.exit_code == 0);
    CHECK(sub.output.find("backbone.norm_mean") != std::string::npos);
}

TEST_CASE("print-config dumps resolved defaults") {
    auto r = run_cli("print-config");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("sp.k = 5") != std::string::npos);
    CHECK(r.output.find("mpfa.m = 3") != std::string::npos);
    CHECK(r.output.find("train.epochs = 100") != std::string::npos);
    CHECK(r.output.find("train.lr0 = 0.001") != std::string::npos);
    CHECK(r.output.find("backbone.image_size = 64") != std::string::npos);
}

TEST_CASE("train smoke run produced checkpoints") {
    CHECK(fs::exists(world().run_dir / "ckpt_best" / "manifest.txt"));
    CHECK(fs::exists(world().run_dir / "ckpt_epoch_001" / "data.bin"));
    CHECK(fs::exists(world().run_dir / "train_log.txt"));
}

TEST_CASE("train rejects identical train/test ids with exit 2") {
    fs::path bad_cfg = world().base / "bad.cfg";
    std::ofstream cfg(bad_cfg);
    cfg << "backbone.image_size = 32\nbackbone.embed_dim = 16\nbackbone.text_dim = 8\n"
           "backbone.shared_dim = 8\nbackbone.cnn_dim = 8\nsp.k = 2\n"
           "data.train_root = " << world().train_root.string() << "\ndata.train_id = same\n"
           "data.test_root = " << world().test_root.string() << "\ndata.test_id = same\n";
    cfg.close();
    auto r = run_cli("train --config " + bad_cfg.string() + " --out " + (world().base / "bad_run").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("protocol") != std::string::npos);
}

TEST_CASE("train with missing dataset root exits 1") {
    fs::path cfg_path = world().base / "missing.cfg";
    std::ofstream cfg(cfg_path);
    cfg << "data.train_root = /nonexistent/path\n";
    cfg.close();
    auto r = run_cli("train --config " + cfg_path.string() + " --out " + (world().base / "x").string());
    CHECK(r.exit_code == 1);
}

TEST_CASE("unknown config key exits 2") {
    fs::path cfg_path = world().base / "unknown.cfg";
    std::ofstream cfg(cfg_path);
    cfg << "nonsense.key = 1\n";
    cfg.close();
    auto r = run_cli("print-config --config " + cfg_path.string());
    CHECK(r.exit_code == 2);
}

TEST_CASE("eval writes metrics csv + table and reruns byte-identically") {
    fs::path out1 = world().base / "eval1";
    fs::path out2 = world().base / "eval2";
    auto r1 = run_cli("eval --config " + world().cfg_file.string() + " --checkpoint " +
                      (world().run_dir / "ckpt_best").string() + " --out " + out1.string());
    CHECK(r1.exit_code == 0);
    auto r2 = run_cli("eval --config " + world().cfg_file.string() + " --checkpoint " +
                      (world().run_dir / "ckpt_best").string() + " --out " + out2.string());
    CHECK(r2.exit_code == 0);

    std::string csv = slurp(out1 / "metrics.csv");
    CHECK(csv.find("dataset,level,auroc,max_f1") == 0);
    CHECK(csv.find("cli-b,image,") != std::string::npos);
    CHECK(csv.find("cli-b,pixel,") != std::string::npos);
    CHECK(csv == slurp(out2 / "metrics.csv"));
    CHECK(slurp(out1 / "report.txt") == slurp(out2 / "report.txt"));
}

TEST_CASE("eval refuses checkpoints trained on the evaluation dataset") {
    auto r = run_cli("eval --config " + world().cfg_file.string() + " --checkpoint " +
                     (world().run_dir / "ckpt_best").string() + " --out " + (world().base / "evx").string() +
                     " " + "--workers 1" +
                     "");
    CHECK(r.exit_code == 0);  // cli-a vs cli-b is fine

    // point evaluation at the training dataset
    fs::path cfg_path = world().base / "self.cfg";
    std::ofstream cfg(cfg_path);
    cfg << "backbone.image_size = 32\nbackbone.embed_dim = 16\nbackbone.text_dim = 8\n"
           "backbone.shared_dim = 8\nbackbone.cnn_dim = 8\nsp.k = 2\n"
           "data.test_root = " << world().train_root.string() << "\ndata.test_id = cli-a\n";
    cfg.close();
    auto bad = run_cli("eval --config " + cfg_path.string() + " --checkpoint " +
                       (world().run_dir / "ckpt_best").string() + " --out " + (world().base / "evy").string());
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("protocol") != std::string::npos);
}

TEST_CASE("predict writes score and heatmap with input dimensions") {
    fs::path img;
    for (const auto& e : fs::recursive_directory_iterator(world().test_root))
        if (e.path().extension() == ".png" && e.path().string().find("defect") != std::string::npos &&
            e.path().string().find("ground_truth") == std::string::npos) {
            img = e.path();
            break;
        }
    REQUIRE_FALSE(img.empty());
    fs::path out = world().base / "pred";
    auto r = run_cli("predict --image " + img.string() + " --class-name dots --checkpoint " +
                     (world().run_dir / "ckpt_best").string() + " --out " + out.string() + " --raw");
    CHECK(r.exit_code == 0);
    std::string stem = img.stem().string();
    REQUIRE(fs::exists(out / (stem + "_score.txt")));
    REQUIRE(fs::exists(out / (stem + "_heatmap.png")));
    CHECK(fs::exists(out / (stem + "_heatmap_raw") / "manifest.txt"));

    std::string score = slurp(out / (stem + "_score.txt"));
    double value = std::stod(score);
    CHECK(value > 0.0);
    CHECK(value < 1.0);
    CHECK(score.find('.') != std::string::npos);
    CHECK(score.substr(score.find('.') + 1).size() >= 6);  // six decimals

    // unknown class names still work (template instantiation is open-vocab)
    auto unk = run_cli("predict --image " + img.string() + " --class-name widget --checkpoint " +
                       (world().run_dir / "ckpt_best").string() + " --out " + out.string());
    CHECK(unk.exit_code == 0);

    auto missing = run_cli("predict --image /nonexistent.png --class-name dots --checkpoint " +
                           (world().run_dir / "ckpt_best").string() + " --out " + out.string());
    CHECK(missing.exit_code == 1);
}

TEST_CASE("predict heatmap PNG matches source image dimensions") {
    // synthesize a non-square-size check by predicting on a 32x32 source
    fs::path img;
    for (const auto& e : fs::recursive_directory_iterator(world().train_root))
        if (e.path().extension() == ".png" && e.path().string().find("good") != std::string::npos) {
            img = e.path();
            break;
        }
    fs::path out = world().base / "pred2";
    auto r = run_cli("predict --image " + img.string() + " --class-name stripes --checkpoint " +
                     (world().run_dir / "ckpt_best").string() + " --out " + out.string());
    CHECK(r.exit_code == 0);
    // PNG header: width/height at offsets 16..23 big-endian
    std::string png = slurp(out / (img.stem().string() + "_heatmap.png"));
    auto be32 = [&](size_t off) {
        return (uint32_t(uint8_t(png[off])) << 24) | (uint32_t(uint8_t(png[off + 1])) << 16) |
               (uint32_t(uint8_t(png[off + 2])) << 8) | uint32_t(uint8_t(png[off + 3]));
    };
    CHECK(be32(16) == 32);
    CHECK(be32(20) == 32);
}

TEST_CASE("ablate emits one row per cell") {
    fs::path out = world().base / "abl";
    auto r = run_cli("ablate --sweep m --config " + world().cfg_file.string() + " --checkpoint " +
                     (world().run_dir / "ckpt_best").string() + " --out " + out.string());
    CHECK(r.exit_code == 0);
    std::string csv = slurp(out / "ablation_m.csv");
    CHECK(csv.find("m,m1,") != std::string::npos);
    CHECK(csv.find("m,m3,") != std::string::npos);
    CHECK(csv.find("m,m5,") == std::string::npos);  // m=5 exceeds the 4x4 grid and is skipped? no: grid is 4

    auto comp = run_cli("ablate --sweep components --config " + world().cfg_file.string() + " --checkpoint " +
                        (world().run_dir / "ckpt_best").string() + " --out " + out.string());
    CHECK(comp.exit_code == 0);
    std::string ccsv = slurp(out / "ablation_components.csv");
    int rows = 0;
    for (char c : ccsv)
        if (c == '\n') ++rows;
    CHECK(rows == 7);  // header + 6 cells

    auto pv = run_cli("ablate --sweep pv_pl --config " + world().cfg_file.string() + " --checkpoint " +
                      (world().run_dir / "ckpt_best").string() + " --out " + out.string());
    CHECK(pv.exit_code == 0);
    std::string pcsv = slurp(out / "ablation_pv_pl.csv");
    rows = 0;
    for (char c : pcsv)
        if (c == '\n') ++rows;
    CHECK(rows == 5);  // header + 4 cells

    auto bad = run_cli("ablate --sweep bogus --config " + world().cfg_file.string() + " --checkpoint " +
                       (world().run_dir / "ckpt_best").string() + " --out " + out.string());
    CHECK(bad.exit_code == 2);
}
