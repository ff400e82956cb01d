#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "afrclip/errors.hpp"

namespace afrclip {

// Resolved run configuration. On disk this is a flat key-value file with
// '#' comments; keys are dotted per module (backbone.*, prompt.*, cmfr.*,
// sp.*, mpfa.*, score.*, train.*, data.*, metrics.*, eval.*). Unknown keys
// are rejected.
struct RunConfig {
    // backbone
    std::string backbone_mode = "surrogate";  // "surrogate" or "file:<dir>"
    uint64_t backbone_seed = 7;
    int image_size = 64;
    int patch_size = 8;
    int layers = 8;  // divisible by 4 (one tap per stage)
    int heads = 2;
    int embed_dim = 32;   // D_v
    int text_dim = 32;
    int shared_dim = 32;  // post-adapter width D
    int cnn_dim = 32;     // D_cnn
    std::array<double, 3> norm_mean = {0.5, 0.5, 0.5};
    std::array<double, 3> norm_std = {0.5, 0.5, 0.5};

    // prompt templates; "{c}" is replaced by the class name
    std::string normal_template = "a photo of a normal {c}";
    std::string abnormal_template = "a photo of a defective {c}";
    std::string stateless_template = "a photo of a {c}";

    // cmfr
    bool cmfr_enabled = true;
    bool cmfr_bounded_gate = false;  // reorder sigmoid after the linear map
    bool cmfr_use_mt = false;        // reserved; M_t is computed and dropped

    // sp
    bool sp_enabled = true;
    int sp_k = 5;
    std::vector<int> sp_stages = {1};
    bool sp_use_pv = true;
    bool sp_use_pl = true;

    // mpfa
    bool mpfa_enabled = true;
    int mpfa_m = 3;

    // score
    bool score_average_image_stages = false;
    double score_temperature = 1.0;

    // train
    int train_epochs = 100;
    int train_batch_size = 4;
    double train_lr0 = 0.001;
    uint64_t train_seed = 0;
    double train_lambda_focal = 1.0;
    double train_lambda_dice = 1.0;
    double train_focal_gamma = 2.0;
    double train_val_fraction = 0.1;
    int train_checkpoint_every = 1;

    // data
    std::string data_train_root;
    std::string data_train_id;  // defaults to basename of root
    std::string data_test_root;
    std::string data_test_id;
    std::string data_split = "test";  // split consumed from each root

    // metrics
    bool metrics_pixel_per_image = false;

    // eval
    int eval_workers = 0;  // 0 = hardware concurrency

    void validate() const;

    int grid_side() const { return image_size / patch_size; }
    int n_patches() const { return grid_side() * grid_side(); }
    int n_tokens() const { return n_patches() + 1; }
    int layers_per_stage() const { return layers / 4; }

    static RunConfig from_file(const std::string& path);
    void apply_line(const std::string& key, const std::string& value);
    std::string to_string() const;
};

}  // namespace afrclip
