#include "afrclip/config.hpp"

#include <fstream>
#include <sstream>

namespace afrclip {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned integer for " + key + ": '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(parse_int(key, trim(part)));
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& v) {
    std::stringstream ss(v);
    std::string part;
    std::array<double, 3> out{};
    int i = 0;
    while (std::getline(ss, part, ',')) {
        if (i >= 3) throw ConfigError("config: expected 3 values for " + key);
        out[i++] = parse_double(key, trim(part));
    }
    if (i != 3) throw ConfigError("config: expected 3 values for " + key);
    return out;
}

std::string fmt_triple(const std::array<double, 3>& t) {
    std::ostringstream os;
    os << t[0] << "," << t[1] << "," << t[2];
    return os.str();
}

std::string fmt_int_list(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

}  // namespace

void RunConfig::apply_line(const std::string& key, const std::string& value) {
    if (key == "backbone.mode") backbone_mode = value;
    else if (key == "backbone.seed") backbone_seed = parse_u64(key, value);
    else if (key == "backbone.image_size") image_size = parse_int(key, value);
    else if (key == "backbone.patch_size") patch_size = parse_int(key, value);
    else if (key == "backbone.layers") layers = parse_int(key, value);
    else if (key == "backbone.heads") heads = parse_int(key, value);
    else if (key == "backbone.embed_dim") embed_dim = parse_int(key, value);
    else if (key == "backbone.text_dim") text_dim = parse_int(key, value);
    else if (key == "backbone.shared_dim") shared_dim = parse_int(key, value);
    else if (key == "backbone.cnn_dim") cnn_dim = parse_int(key, value);
    else if (key == "backbone.norm_mean") norm_mean = parse_triple(key, value);
    else if (key == "backbone.norm_std") norm_std = parse_triple(key, value);
    else if (key == "prompt.normal_template") normal_template = value;
    else if (key == "prompt.abnormal_template") abnormal_template = value;
    else if (key == "prompt.stateless_template") stateless_template = value;
    else if (key == "cmfr.enabled") cmfr_enabled = parse_bool(key, value);
    else if (key == "cmfr.bounded_gate") cmfr_bounded_gate = parse_bool(key, value);
    else if (key == "cmfr.use_mt") cmfr_use_mt = parse_bool(key, value);
    else if (key == "sp.enabled") sp_enabled = parse_bool(key, value);
    else if (key == "sp.k") sp_k = parse_int(key, value);
    else if (key == "sp.stages") sp_stages = parse_int_list(key, value);
    else if (key == "sp.use_pv") sp_use_pv = parse_bool(key, value);
    else if (key == "sp.use_pl") sp_use_pl = parse_bool(key, value);
    else if (key == "mpfa.enabled") mpfa_enabled = parse_bool(key, value);
    else if (key == "mpfa.m") mpfa_m = parse_int(key, value);
    else if (key == "score.average_image_stages") score_average_image_stages = parse_bool(key, value);
    else if (key == "score.temperature") score_temperature = parse_double(key, value);
    else if (key == "train.epochs") train_epochs = parse_int(key, value);
    else if (key == "train.batch_size") train_batch_size = parse_int(key, value);
    else if (key == "train.lr0") train_lr0 = parse_double(key, value);
    else if (key == "train.seed") train_seed = parse_u64(key, value);
    else if (key == "train.lambda_focal") train_lambda_focal = parse_double(key, value);
    else if (key == "train.lambda_dice") train_lambda_dice = parse_double(key, value);
    else if (key == "train.focal_gamma") train_focal_gamma = parse_double(key, value);
    else if (key == "train.val_fraction") train_val_fraction = parse_double(key, value);
    else if (key == "train.checkpoint_every") train_checkpoint_every = parse_int(key, value);
    else if (key == "data.train_root") data_train_root = value;
    else if (key == "data.train_id") data_train_id = value;
    else if (key == "data.test_root") data_test_root = value;
    else if (key == "data.test_id") data_test_id = value;
    else if (key == "data.split") data_split = value;
    else if (key == "metrics.pixel_per_image") metrics_pixel_per_image = parse_bool(key, value);
    else if (key == "eval.workers") eval_workers = parse_int(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        cfg.apply_line(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (image_size < 1 || patch_size < 1) throw ConfigError("config: image_size/patch_size must be positive");
    if (image_size % patch_size != 0) throw ConfigError("config: image_size must be divisible by patch_size");
    if (layers < 4 || layers % 4 != 0) throw ConfigError("config: backbone.layers must be a positive multiple of 4");
    if (heads < 1 || embed_dim % heads != 0) throw ConfigError("config: embed_dim must be divisible by heads");
    if (embed_dim < 1 || text_dim < 1 || shared_dim < 1 || cnn_dim < 1)
        throw ConfigError("config: embedding dims must be positive");
    for (double s : norm_std)
        if (s <= 0) throw ConfigError("config: norm_std entries must be positive");
    if (sp_k < 1) throw ConfigError("config: sp.k must be >= 1");
    if (sp_k >= n_tokens()) throw ConfigError("config: sp.k must be < token count");
    for (int s : sp_stages)
        if (s < 1 || s > 4) throw ConfigError("config: sp.stages entries must be in 1..4");
    if (mpfa_m < 1 || mpfa_m % 2 == 0) throw ConfigError("config: mpfa.m must be odd and >= 1");
    if (mpfa_m > grid_side()) throw ConfigError("config: mpfa.m exceeds patch grid side");
    if (score_temperature <= 0) throw ConfigError("config: score.temperature must be positive");
    if (train_epochs < 1) throw ConfigError("config: train.epochs must be >= 1");
    if (train_batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
    if (train_lr0 <= 0) throw ConfigError("config: train.lr0 must be positive");
    if (train_val_fraction < 0 || train_val_fraction >= 1)
        throw ConfigError("config: train.val_fraction must be in [0,1)");
    if (data_split != "train" && data_split != "test") throw ConfigError("config: data.split must be train or test");
}

std::string RunConfig::to_string() const {
    std::ostringstream os;
    os << "backbone.mode = " << backbone_mode << '\n'
       << "backbone.seed = " << backbone_seed << '\n'
       << "backbone.image_size = " << image_size << '\n'
       << "backbone.patch_size = " << patch_size << '\n'
       << "backbone.layers = " << layers << '\n'
       << "backbone.heads = " << heads << '\n'
       << "backbone.embed_dim = " << embed_dim << '\n'
       << "backbone.text_dim = " << text_dim << '\n'
       << "backbone.shared_dim = " << shared_dim << '\n'
       << "backbone.cnn_dim = " << cnn_dim << '\n'
       << "backbone.norm_mean = " << fmt_triple(norm_mean) << '\n'
       << "backbone.norm_std = " << fmt_triple(norm_std) << '\n'
       << "prompt.normal_template = " << normal_template << '\n'
       << "prompt.abnormal_template = " << abnormal_template << '\n'
       << "prompt.stateless_template = " << stateless_template << '\n'
       << "cmfr.enabled = " << (cmfr_enabled ? "true" : "false") << '\n'
       << "cmfr.bounded_gate = " << (cmfr_bounded_gate ? "true" : "false") << '\n'
       << "cmfr.use_mt = " << (cmfr_use_mt ? "true" : "false") << '\n'
       << "sp.enabled = " << (sp_enabled ? "true" : "false") << '\n'
       << "sp.k = " << sp_k << '\n'
       << "sp.stages = " << fmt_int_list(sp_stages) << '\n'
       << "sp.use_pv = " << (sp_use_pv ? "true" : "false") << '\n'
       << "sp.use_pl = " << (sp_use_pl ? "true" : "false") << '\n'
       << "mpfa.enabled = " << (mpfa_enabled ? "true" : "false") << '\n'
       << "mpfa.m = " << mpfa_m << '\n'
       << "score.average_image_stages = " << (score_average_image_stages ? "true" : "false") << '\n'
       << "score.temperature = " << score_temperature << '\n'
       << "train.epochs = " << train_epochs << '\n'
       << "train.batch_size = " << train_batch_size << '\n'
       << "train.lr0 = " << train_lr0 << '\n'
       << "train.seed = " << train_seed << '\n'
       << "train.lambda_focal = " << train_lambda_focal << '\n'
       << "train.lambda_dice = " << train_lambda_dice << '\n'
       << "train.focal_gamma = " << train_focal_gamma << '\n'
       << "train.val_fraction = " << train_val_fraction << '\n'
       << "train.checkpoint_every = " << train_checkpoint_every << '\n'
       << "data.train_root = " << data_train_root << '\n'
       << "data.train_id = " << data_train_id << '\n'
       << "data.test_root = " << data_test_root << '\n'
       << "data.test_id = " << data_test_id << '\n'
       << "data.split = " << data_split << '\n'
       << "metrics.pixel_per_image = " << (metrics_pixel_per_image ? "true" : "false") << '\n'
       << "eval.workers = " << eval_workers << '\n';
    return os.str();
}

}  // namespace afrclip
