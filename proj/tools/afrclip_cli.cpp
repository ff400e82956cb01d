// afrclip command-line driver: dataset synthesis, adapter training,
// evaluation, single-image prediction and ablation sweeps over one shared
// run-config file.
//
// Exit codes: 0 success, 1 I/O failure, 2 config/protocol violation,
// 3 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "afrclip/core.hpp"
#include "afrclip/dataio.hpp"
#include "afrclip/eval.hpp"
#include "afrclip/model.hpp"
#include "afrclip/png_io.hpp"
#include "afrclip/scoring.hpp"
#include "afrclip/training.hpp"

namespace fs = std::filesystem;
using namespace afrclip;

namespace {

constexpr const char* kConfigKeyHelp = R"(Config file keys (flat "key = value" lines, '#' comments):
  backbone.mode {surrogate|file:<dir>}, backbone.seed, backbone.image_size,
  backbone.patch_size, backbone.layers, backbone.heads, backbone.embed_dim,
  backbone.text_dim, backbone.shared_dim, backbone.cnn_dim,
  backbone.norm_mean, backbone.norm_std
  prompt.normal_template, prompt.abnormal_template, prompt.stateless_template
  cmfr.enabled, cmfr.bounded_gate, cmfr.use_mt
  sp.enabled, sp.k, sp.stages, sp.use_pv, sp.use_pl
  mpfa.enabled, mpfa.m
  score.average_image_stages, score.temperature
  train.epochs, train.batch_size, train.lr0, train.seed, train.lambda_focal,
  train.lambda_dice, train.focal_gamma, train.val_fraction, train.checkpoint_every
  data.train_root, data.train_id, data.test_root, data.test_id, data.split
  metrics.pixel_per_image, eval.workers
Environment: AFR_CACHE names a directory for the prompt-embedding cache.)";

struct CommonOpts {
    std::string config_path;
    std::string checkpoint;
    std::string backbone;
    std::string out_dir = ".";
    int workers = -1;
    int64_t seed = -1;
};

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg = opts.config_path.empty() ? RunConfig{} : RunConfig::from_file(opts.config_path);
    if (!opts.backbone.empty()) cfg.backbone_mode = opts.backbone;
    if (opts.seed >= 0) cfg.train_seed = static_cast<uint64_t>(opts.seed);
    if (opts.workers >= 0) cfg.eval_workers = opts.workers;
    cfg.validate();
    return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
}

std::string dataset_id_or_basename(const std::string& id, const std::string& root) {
    if (!id.empty()) return id;
    fs::path p(root);
    std::string base = p.filename().string();
    return base.empty() ? p.parent_path().filename().string() : base;
}

int cmd_print_config(const CommonOpts& opts) {
    std::cout << resolve_config(opts).to_string();
    return 0;
}

int cmd_synth(const std::string& out_dir, uint64_t seed, const std::string& classes_csv, int per_class,
              int image_size, const std::string& id) {
    std::vector<std::string> classes;
    std::stringstream ss(classes_csv);
    std::string c;
    while (std::getline(ss, c, ',')) classes.push_back(c);
    auto manifest = dataio::make_synthetic_dataset(out_dir, seed, classes, per_class, image_size, id);
    std::cout << "wrote " << manifest.samples.size() << " samples (" << manifest.classes.size()
              << " classes) under " << out_dir << "\n";
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    if (cfg.data_train_root.empty()) throw ConfigError("train: data.train_root is not set");
    cfg.data_train_id = dataset_id_or_basename(cfg.data_train_id, cfg.data_train_root);
    if (!cfg.data_test_root.empty())
        cfg.data_test_id = dataset_id_or_basename(cfg.data_test_id, cfg.data_test_root);
    if (!cfg.data_test_id.empty() && !dataio::check_protocol(cfg.data_train_id, cfg.data_test_id))
        throw ProtocolError("protocol violation: train and test datasets are both '" + cfg.data_train_id + "'");

    auto samples = eval::load_split(cfg.data_train_root, cfg.data_train_id, cfg.data_split, cfg.image_size);
    Model model = Model::create(cfg);
    auto result = training::train(model, samples, opts.out_dir, [](int epoch, double tl, double vl) {
        std::cout << "epoch " << epoch << " train_loss " << tl << " val_loss " << vl << "\n";
    });
    std::cout << "best epoch " << result.best_epoch << " (val loss " << result.best_val_loss << ")\n"
              << "best checkpoint: " << result.best_checkpoint_dir << "\n";
    return 0;
}

int run_eval_to_dir(const RunConfig& cfg, const Model& model, const std::string& out_dir) {
    std::string test_id = dataset_id_or_basename(cfg.data_test_id, cfg.data_test_root);
    auto it = model.checkpoint_meta.find("train_dataset");
    if (it != model.checkpoint_meta.end() && !it->second.empty() &&
        !dataio::check_protocol(it->second, test_id))
        throw ProtocolError("protocol violation: checkpoint was trained on '" + it->second +
                            "' which matches the evaluation dataset");

    auto samples = eval::load_split(cfg.data_test_root, test_id, cfg.data_split, cfg.image_size);
    eval::Scorer scorer = [&](const dataio::LabeledSample& s) {
        return scoring::infer(model, s.image, s.class_name);
    };
    auto report = eval::evaluate(samples, test_id, scorer, cfg.eval_workers, cfg.metrics_pixel_per_image);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "metrics.csv", eval::metrics_csv({report}));
    write_file(fs::path(out_dir) / "report.txt", eval::metrics_table({report}));
    std::cout << eval::metrics_table({report});
    return 0;
}

int cmd_eval(const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    if (cfg.data_test_root.empty()) throw ConfigError("eval: data.test_root is not set");
    if (opts.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
    Model model = Model::load_checkpoint(opts.checkpoint);
    // evaluation-time toggles come from the provided config
    model.cfg.cmfr_enabled = cfg.cmfr_enabled;
    model.cfg.cmfr_bounded_gate = cfg.cmfr_bounded_gate;
    model.cfg.sp_enabled = cfg.sp_enabled;
    model.cfg.sp_stages = cfg.sp_stages;
    model.cfg.sp_use_pv = cfg.sp_use_pv;
    model.cfg.sp_use_pl = cfg.sp_use_pl;
    model.cfg.mpfa_enabled = cfg.mpfa_enabled;
    model.cfg.mpfa_m = cfg.mpfa_m;
    model.cfg.score_average_image_stages = cfg.score_average_image_stages;
    model.cfg.score_temperature = cfg.score_temperature;
    model.cfg.eval_workers = cfg.eval_workers;
    model.cfg.metrics_pixel_per_image = cfg.metrics_pixel_per_image;
    model.cfg.data_test_root = cfg.data_test_root;
    model.cfg.data_test_id = cfg.data_test_id;
    model.cfg.data_split = cfg.data_split;
    return run_eval_to_dir(model.cfg, model, opts.out_dir);
}

int cmd_predict(const CommonOpts& opts, const std::string& image_path, const std::string& class_name,
                bool raw_heatmap) {
    if (opts.checkpoint.empty()) throw ConfigError("predict: --checkpoint is required");
    Model model = Model::load_checkpoint(opts.checkpoint);
    // open vocabulary: prompts are template-generated for any class name
    std::cerr << "info: scoring as class '" << class_name << "'\n";

    Image original = png_io::read_image(image_path);
    Image resized = resize_image(original, model.cfg.image_size, model.cfg.image_size);
    auto result = scoring::infer(model, resized, class_name);

    fs::create_directories(opts.out_dir);
    std::string stem = fs::path(image_path).stem().string();
    char score_text[32];
    std::snprintf(score_text, sizeof(score_text), "%.6f\n", result.image_score);
    write_file(fs::path(opts.out_dir) / (stem + "_score.txt"), score_text);

    Mat heatmap = bilinear_resize(result.heatmap, original.h, original.w);
    png_io::write_probability_png((fs::path(opts.out_dir) / (stem + "_heatmap.png")).string(), heatmap);
    if (raw_heatmap) {
        TensorStore store;
        store.put("heatmap", heatmap);
        store.save((fs::path(opts.out_dir) / (stem + "_heatmap_raw")).string());
    }
    std::cout << "score " << score_text;
    return 0;
}

struct AblationCell {
    std::string name;
    RunConfig cfg;
};

int cmd_ablate(const CommonOpts& opts, const std::string& sweep) {
    RunConfig base = resolve_config(opts);
    if (base.data_test_root.empty()) throw ConfigError("ablate: data.test_root is not set");
    if (opts.checkpoint.empty()) throw ConfigError("ablate: --checkpoint is required");
    Model model = Model::load_checkpoint(opts.checkpoint);

    std::vector<AblationCell> cells;
    auto add = [&](const std::string& name, auto mutate) {
        RunConfig cfg = base;
        mutate(cfg);
        cells.push_back({name, cfg});
    };
    if (sweep == "components") {
        // the on/off grid over CMFR / SP / MPFA
        add("none", [](RunConfig& c) { c.cmfr_enabled = false; c.sp_enabled = false; c.mpfa_enabled = false; });
        add("sp+mpfa", [](RunConfig& c) { c.cmfr_enabled = false; c.sp_enabled = true; c.mpfa_enabled = true; });
        add("cmfr", [](RunConfig& c) { c.cmfr_enabled = true; c.sp_enabled = false; c.mpfa_enabled = false; });
        add("cmfr+sp", [](RunConfig& c) { c.cmfr_enabled = true; c.sp_enabled = true; c.mpfa_enabled = false; });
        add("cmfr+mpfa", [](RunConfig& c) { c.cmfr_enabled = true; c.sp_enabled = false; c.mpfa_enabled = true; });
        add("cmfr+sp+mpfa", [](RunConfig& c) { c.cmfr_enabled = true; c.sp_enabled = true; c.mpfa_enabled = true; });
    } else if (sweep == "sp_stages") {
        add("stage1", [](RunConfig& c) { c.sp_stages = {1}; });
        add("stage1-2", [](RunConfig& c) { c.sp_stages = {1, 2}; });
        add("stage1-3", [](RunConfig& c) { c.sp_stages = {1, 2, 3}; });
        add("stage1-4", [](RunConfig& c) { c.sp_stages = {1, 2, 3, 4}; });
    } else if (sweep == "m") {
        for (int m : {1, 3, 5}) {
            if (m > base.grid_side()) {
                std::cerr << "note: skipping m=" << m << " (exceeds patch grid side " << base.grid_side()
                          << ")\n";
                continue;
            }
            add("m" + std::to_string(m), [m](RunConfig& c) { c.mpfa_m = m; c.mpfa_enabled = true; });
        }
    } else if (sweep == "pv_pl") {
        add("neither", [](RunConfig& c) { c.sp_use_pv = false; c.sp_use_pl = false; });
        add("pv", [](RunConfig& c) { c.sp_use_pv = true; c.sp_use_pl = false; });
        add("pl", [](RunConfig& c) { c.sp_use_pv = false; c.sp_use_pl = true; });
        add("pv+pl", [](RunConfig& c) { c.sp_use_pv = true; c.sp_use_pl = true; });
    } else {
        throw ConfigError("ablate: unknown sweep '" + sweep + "' (components|sp_stages|m|pv_pl)");
    }

    std::string test_id = dataset_id_or_basename(base.data_test_id, base.data_test_root);
    auto samples = eval::load_split(base.data_test_root, test_id, base.data_split, base.image_size);

    std::ostringstream csv;
    csv << "sweep,cell,image_auroc,image_max_f1,pixel_auroc,pixel_max_f1\n";
    for (const auto& cell : cells) {
        Model variant = model;
        variant.cfg.cmfr_enabled = cell.cfg.cmfr_enabled;
        variant.cfg.sp_enabled = cell.cfg.sp_enabled;
        variant.cfg.sp_stages = cell.cfg.sp_stages;
        variant.cfg.sp_use_pv = cell.cfg.sp_use_pv;
        variant.cfg.sp_use_pl = cell.cfg.sp_use_pl;
        variant.cfg.mpfa_enabled = cell.cfg.mpfa_enabled;
        variant.cfg.mpfa_m = cell.cfg.mpfa_m;
        eval::Scorer scorer = [&](const dataio::LabeledSample& s) {
            return scoring::infer(variant, s.image, s.class_name);
        };
        auto report = eval::evaluate(samples, test_id, scorer, base.eval_workers, base.metrics_pixel_per_image);
        char row[256];
        std::snprintf(row, sizeof(row), "%s,%s,%.6f,%.6f,%.6f,%.6f\n", sweep.c_str(), cell.name.c_str(),
                      report.image ? report.image->auroc : -1.0, report.image ? report.image->max_f1 : -1.0,
                      report.pixel ? report.pixel->auroc : -1.0, report.pixel ? report.pixel->max_f1 : -1.0);
        csv << row;
        std::cout << row;
    }
    fs::create_directories(opts.out_dir);
    write_file(fs::path(opts.out_dir) / ("ablation_" + sweep + ".csv"), csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot anomaly detection via image-guided text rectification"};
    app.require_subcommand(1);
    app.footer(kConfigKeyHelp);

    CommonOpts opts;

    auto add_common = [&](CLI::App* cmd, bool needs_checkpoint = false) {
        cmd->add_option("--config", opts.config_path, "run-config file");
        cmd->add_option("--seed", opts.seed, "override train.seed");
        cmd->add_option("--workers", opts.workers, "eval worker count (default: CPU count)");
        cmd->add_option("--backbone", opts.backbone, "surrogate | file:<dir>");
        cmd->add_option("--out", opts.out_dir, "output directory");
        if (needs_checkpoint) cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint directory");
        cmd->footer(kConfigKeyHelp);
    };

    auto* print_config = app.add_subcommand("print-config", "dump the resolved configuration");
    add_common(print_config);

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset tree");
    std::string synth_out, synth_classes = "stripes,grid", synth_id = "synthetic";
    uint64_t synth_seed = 1;
    int synth_per_class = 32, synth_size = 64;
    synth->add_option("--out", synth_out, "dataset root to create")->required();
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--classes", synth_classes, "comma-separated class names");
    synth->add_option("--per-class", synth_per_class, "samples per class (half defective)");
    synth->add_option("--image-size", synth_size, "square image size in pixels");
    synth->add_option("--id", synth_id, "dataset identifier");

    auto* train = app.add_subcommand("train", "train adapters on the configured dataset");
    add_common(train);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint, writing metrics CSV + table");
    add_common(eval_cmd, true);

    auto* predict = app.add_subcommand("predict", "score one image and export its heatmap");
    std::string image_path, class_name;
    bool raw_heatmap = false;
    predict->add_option("--image", image_path, "input PNG")->required();
    predict->add_option("--class-name", class_name, "object class")->required();
    predict->add_flag("--raw", raw_heatmap, "also export the raw float32 heatmap");
    add_common(predict, true);

    auto* ablate = app.add_subcommand("ablate", "toggle-grid evaluation of one checkpoint");
    std::string sweep;
    ablate->add_option("--sweep", sweep, "components | sp_stages | m | pv_pl")->required();
    add_common(ablate, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_config->parsed()) return cmd_print_config(opts);
        if (synth->parsed())
            return cmd_synth(synth_out, synth_seed, synth_classes, synth_per_class, synth_size, synth_id);
        if (train->parsed()) return cmd_train(opts);
        if (eval_cmd->parsed()) return cmd_eval(opts);
        if (predict->parsed()) return cmd_predict(opts, image_path, class_name, raw_heatmap);
        if (ablate->parsed()) return cmd_ablate(opts, sweep);
    } catch (const ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
