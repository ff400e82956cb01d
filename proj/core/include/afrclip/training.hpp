#pragma once

#include <functional>
#include <string>
#include <vector>

#include "afrclip/dataio.hpp"
#include "afrclip/metrics.hpp"
#include "afrclip/model.hpp"
#include "afrclip/scoring.hpp"

namespace afrclip::training {

// Learning-rate schedule: lr0 / (epoch + 1), epoch counted from 0.
double lr_at(double lr0, int epoch);

struct LossBreakdown {
    double total = 0.0;
    double bce = 0.0;
    double focal = 0.0;
    double dice = 0.0;
};

// Composite objective on one sample: BCE on the image score plus
// lambda_f * focal(gamma) and lambda_d * dice on the heatmap vs mask.
// Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs.
LossBreakdown compute_loss(const scoring::AnomalyResult& result, int label, const Mat& mask,
                           double lambda_focal, double lambda_dice, double focal_gamma);

// Differentiable version used by the trainer; the scalar graph node carries
// the same value compute_loss reports.
ad::Var loss_graph(const scoring::PipelineOutputs& out, int label, const Mat& mask, double lambda_focal,
                   double lambda_dice, double focal_gamma);

// Adam with bias correction; state keyed by parameter node.
class Adam {
public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(ParameterRegistry& params, double lr);

private:
    double beta1_, beta2_, eps_;
    int t_ = 0;
    std::map<std::string, Mat> m_, v_;
};

struct TrainResult {
    double first_epoch_loss = 0.0;
    double last_epoch_loss = 0.0;
    double best_val_loss = 0.0;
    int best_epoch = -1;
    std::string best_checkpoint_dir;
};

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

// Adapter-only optimization: backbone stays frozen (its tensors are not in
// the registry), samples are shuffled per epoch with the run seed, the batch
// loss is the mean over batch graphs, and a checkpoint is written every
// train.checkpoint_every epochs plus a "best" checkpoint chosen by
// validation loss on a stratified train.val_fraction split.
//
// Refuses to run when cfg.data_train_id == cfg.data_test_id (both set), when
// the dataset is empty, or when it contains a single class of labels.
TrainResult train(Model& model, const std::vector<dataio::LabeledSample>& samples,
                  const std::string& out_dir, const EpochCallback& on_epoch = nullptr);

}  // namespace afrclip::training
