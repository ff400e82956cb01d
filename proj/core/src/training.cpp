#include "afrclip/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "afrclip/rng.hpp"

namespace fs = std::filesystem;

namespace afrclip::training {

namespace {
constexpr double kClampEps = 1e-7;
constexpr double kDiceSmooth = 1.0;
}  // namespace

double lr_at(double lr0, int epoch) {
    if (epoch < 0) throw ConfigError("lr_at: negative epoch");
    return lr0 / (epoch + 1);
}

LossBreakdown compute_loss(const scoring::AnomalyResult& result, int label, const Mat& mask,
                           double lambda_focal, double lambda_dice, double focal_gamma) {
    require_same_shape(result.heatmap, mask, "compute_loss: heatmap vs mask");

    LossBreakdown out;
    double p = std::clamp(result.image_score, kClampEps, 1.0 - kClampEps);
    out.bce = label == 1 ? -std::log(p) : -std::log(1.0 - p);

    double focal_sum = 0.0, inter = 0.0, psum = 0.0, gsum = 0.0;
    for (size_t i = 0; i < result.heatmap.size(); ++i) {
        double pi = std::clamp(result.heatmap.data[i], kClampEps, 1.0 - kClampEps);
        double g = mask.data[i] > 0.5 ? 1.0 : 0.0;
        double pt = g * pi + (1.0 - g) * (1.0 - pi);
        focal_sum += -std::pow(1.0 - pt, focal_gamma) * std::log(pt);
        inter += pi * g;
        psum += pi;
        gsum += g;
    }
    out.focal = focal_sum / static_cast<double>(result.heatmap.size());
    out.dice = 1.0 - (2.0 * inter + kDiceSmooth) / (psum + gsum + kDiceSmooth);
    out.total = out.bce + lambda_focal * out.focal + lambda_dice * out.dice;
    return out;
}

ad::Var loss_graph(const scoring::PipelineOutputs& out, int label, const Mat& mask, double lambda_focal,
                   double lambda_dice, double focal_gamma) {
    require_same_shape(out.heatmap->value, mask, "loss_graph: heatmap vs mask");
    if (focal_gamma != 2.0)
        throw ConfigError("loss_graph: only focal_gamma = 2 is supported");

    // image-level BCE
    ad::Var p = ad::clampv(out.image_prob, kClampEps, 1.0 - kClampEps);
    ad::Var bce = label == 1 ? ad::scale(ad::logv(p), -1.0)
                             : ad::scale(ad::logv(ad::add_scalar(ad::scale(p, -1.0), 1.0)), -1.0);

    // pixel losses
    Mat gmask = mask;
    for (double& v : gmask.data) v = v > 0.5 ? 1.0 : 0.0;
    ad::Var g = ad::constant(gmask);
    Mat ginv_m = gmask;
    for (double& v : ginv_m.data) v = 1.0 - v;
    ad::Var ginv = ad::constant(ginv_m);

    ad::Var heat = ad::clampv(out.heatmap, kClampEps, 1.0 - kClampEps);
    ad::Var heat_inv = ad::add_scalar(ad::scale(heat, -1.0), 1.0);
    ad::Var pt = ad::add(ad::mul(heat, g), ad::mul(heat_inv, ginv));
    ad::Var one_minus_pt = ad::add_scalar(ad::scale(pt, -1.0), 1.0);
    ad::Var focal = ad::scale(ad::mean_all(ad::mul(ad::square(one_minus_pt), ad::logv(pt))), -1.0);

    ad::Var inter = ad::sum_all(ad::mul(heat, g));
    ad::Var denom = ad::add_scalar(ad::add(ad::sum_all(heat), ad::sum_all(g)), kDiceSmooth);
    ad::Var dice = ad::add_scalar(
        ad::scale(ad::divide(ad::add_scalar(ad::scale(inter, 2.0), kDiceSmooth), denom), -1.0), 1.0);

    return ad::add(bce, ad::add(ad::scale(focal, lambda_focal), ad::scale(dice, lambda_dice)));
}

Adam::Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParameterRegistry& params, double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, var] : params) {
        if (var->grad.size() != var->value.size()) var->ensure_grad();
        Mat& m = m_[name];
        Mat& v = v_[name];
        if (m.size() != var->value.size()) m = Mat(var->value.rows, var->value.cols);
        if (v.size() != var->value.size()) v = Mat(var->value.rows, var->value.cols);
        for (size_t i = 0; i < var->value.size(); ++i) {
            double gi = var->grad.data[i];
            m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * gi;
            v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * gi * gi;
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            var->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

void dump_norms(const ParameterRegistry& params, std::ostream& os) {
    for (const auto& [name, var] : params) {
        double wn = 0.0, gn = 0.0;
        for (double v : var->value.data) wn += v * v;
        for (double v : var->grad.data) gn += v * v;
        os << "  " << name << " |w|=" << std::sqrt(wn) << " |g|=" << std::sqrt(gn) << '\n';
    }
}

double validation_loss(const Model& model, const std::vector<const dataio::LabeledSample*>& val,
                       const RunConfig& cfg) {
    if (val.empty()) return 0.0;
    double total = 0.0;
    for (const auto* s : val) {
        auto result = scoring::infer(model, s->image, s->class_name);
        total += compute_loss(result, s->label, s->mask, cfg.train_lambda_focal, cfg.train_lambda_dice,
                              cfg.train_focal_gamma)
                     .total;
    }
    return total / static_cast<double>(val.size());
}

}  // namespace

TrainResult train(Model& model, const std::vector<dataio::LabeledSample>& samples,
                  const std::string& out_dir, const EpochCallback& on_epoch) {
    const RunConfig& cfg = model.cfg;
    if (!cfg.data_train_id.empty() && !cfg.data_test_id.empty() &&
        !dataio::check_protocol(cfg.data_train_id, cfg.data_test_id))
        throw ProtocolError("train: train and test datasets are identical ('" + cfg.data_train_id +
                            "'); cross-dataset protocol requires disjoint data");
    if (samples.empty()) throw ConfigError("train: empty dataset");
    bool has_pos = false, has_neg = false;
    for (const auto& s : samples) (s.label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw ConfigError("train: dataset must contain both normal and abnormal samples");

    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "train_log.txt");

    // stratified validation split
    std::vector<size_t> pos_idx, neg_idx;
    for (size_t i = 0; i < samples.size(); ++i) (samples[i].label ? pos_idx : neg_idx).push_back(i);
    Rng split_rng(mix_seed(cfg.train_seed, fnv1a64("val-split")));
    split_rng.shuffle(pos_idx);
    split_rng.shuffle(neg_idx);
    size_t val_pos = static_cast<size_t>(std::floor(pos_idx.size() * cfg.train_val_fraction));
    size_t val_neg = static_cast<size_t>(std::floor(neg_idx.size() * cfg.train_val_fraction));

    std::vector<size_t> train_idx;
    std::vector<const dataio::LabeledSample*> val_set;
    for (size_t i = 0; i < pos_idx.size(); ++i)
        (i < val_pos ? val_set.push_back(&samples[pos_idx[i]]) : train_idx.push_back(pos_idx[i]));
    for (size_t i = 0; i < neg_idx.size(); ++i)
        (i < val_neg ? val_set.push_back(&samples[neg_idx[i]]) : train_idx.push_back(neg_idx[i]));
    std::sort(train_idx.begin(), train_idx.end());

    ParameterRegistry registry = model.registry();
    Adam optimizer;
    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.train_epochs; ++epoch) {
        double lr = lr_at(cfg.train_lr0, epoch);
        Rng shuffle_rng(mix_seed(cfg.train_seed, mix_seed(fnv1a64("epoch-shuffle"), epoch)));
        std::vector<size_t> order = train_idx;
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        int step = 0;
        for (size_t b = 0; b < order.size(); b += cfg.train_batch_size, ++step) {
            size_t end = std::min(order.size(), b + cfg.train_batch_size);
            int bsz = static_cast<int>(end - b);

            for (auto& [name, var] : registry) var->zero_grad();

            ad::Var batch_loss;
            LossBreakdown batch_parts;
            for (size_t i = b; i < end; ++i) {
                const auto& s = samples[order[i]];
                auto out = scoring::run_pipeline(model, s.image, s.class_name);
                ad::Var l = loss_graph(out, s.label, s.mask, cfg.train_lambda_focal, cfg.train_lambda_dice,
                                       cfg.train_focal_gamma);
                batch_loss = batch_loss ? ad::add(batch_loss, l) : l;

                scoring::AnomalyResult r;
                r.image_score = out.image_prob->value.data[0];
                r.heatmap = out.heatmap->value;
                LossBreakdown parts = compute_loss(r, s.label, s.mask, cfg.train_lambda_focal,
                                                   cfg.train_lambda_dice, cfg.train_focal_gamma);
                batch_parts.bce += parts.bce / bsz;
                batch_parts.focal += parts.focal / bsz;
                batch_parts.dice += parts.dice / bsz;
            }
            batch_loss = ad::scale(batch_loss, 1.0 / bsz);
            double loss_value = batch_loss->value.data[0];
            if (!std::isfinite(loss_value)) {
                std::ostringstream diag;
                diag << "train: non-finite loss at epoch " << epoch << " step " << step << '\n';
                dump_norms(registry, diag);
                throw NumericError(diag.str());
            }
            ad::backward(batch_loss);
            optimizer.step(registry, lr);

            epoch_loss += loss_value * bsz;
            if (log)
                log << "epoch " << epoch << " step " << step << " loss " << loss_value << " bce "
                    << batch_parts.bce << " focal " << batch_parts.focal << " dice " << batch_parts.dice
                    << " lr " << lr << '\n';
        }
        epoch_loss /= static_cast<double>(order.size());
        if (epoch == 0) result.first_epoch_loss = epoch_loss;
        result.last_epoch_loss = epoch_loss;

        double val_loss = validation_loss(model, val_set, cfg);
        if (log) log << "epoch " << epoch << " mean_loss " << epoch_loss << " val_loss " << val_loss << '\n';
        if (on_epoch) on_epoch(epoch, epoch_loss, val_loss);

        std::map<std::string, std::string> meta{{"epoch", std::to_string(epoch)},
                                                {"train_dataset", cfg.data_train_id},
                                                {"val_loss", std::to_string(val_loss)}};
        if (cfg.train_checkpoint_every > 0 && (epoch + 1) % cfg.train_checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_epoch_%03d", epoch);
            model.save_checkpoint((fs::path(out_dir) / name).string(), meta);
        }
        double tracked = val_set.empty() ? epoch_loss : val_loss;
        if (tracked < result.best_val_loss) {
            result.best_val_loss = tracked;
            result.best_epoch = epoch;
            result.best_checkpoint_dir = (fs::path(out_dir) / "ckpt_best").string();
            model.save_checkpoint(result.best_checkpoint_dir, meta);
        }
    }
    return result;
}

}  // namespace afrclip::training
