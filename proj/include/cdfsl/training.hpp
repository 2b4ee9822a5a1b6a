#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdfsl/domains.hpp"
#include "cdfsl/losses.hpp"
#include "cdfsl/nets.hpp"
#include "cdfsl/optim.hpp"

namespace cdfsl {

// Non-finite loss or diverged optimization; maps to exit code 3 in the CLI.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Regime { Supervised, Ssl, Mixed };
Regime parse_regime(const std::string& s);
std::string regime_name(Regime r);

struct TrainConfig {
    // pretraining
    int pretrain_epochs = 50;
    int batch_size = 32;
    double pretrain_lr = 1e-4;
    double kappa = 0.1;
    double tau = 0.5;
    Regime regime = Regime::Mixed;
    double view_noise = 0.01;  // absolute scale of the two SSL view perturbations

    // meta-training
    int episodes = 600;
    double meta_lr = 1e-4;
    double inner_lr = 0.01;
    int inner_steps = 5;
    double lambda_min = 0.3;
    double lambda_max = 0.7;
    bool generator_updates_encoder = false;
    int way = 5;
    int shot = 1;
    int query = 15;
    int checkpoint_every = 0;  // 0 = no periodic checkpoints
    std::filesystem::path checkpoint_dir;
};

struct TrainedModel {
    Model model;
    std::string phase;  // "pretrain" | "metatrain"
    std::uint64_t seed = 0;
    std::string config_hash;
};

void save_model(const TrainedModel& m, const std::filesystem::path& stem);
TrainedModel load_model(const std::filesystem::path& stem);

struct PretrainEpochRow {
    int epoch = 0;
    double ce = 0.0;
    double ssl = 0.0;
    double alpha = 0.0;
    double total = 0.0;
};

struct PretrainResult {
    Model model;
    std::vector<PretrainEpochRow> trace;
};

// Minibatch Adam on ce + alpha(t) * ssl over the base table; the held-out
// table provides the novel-class negative bank, refreshed each epoch.
PretrainResult pretrain(const ModelConfig& arch, const TrainConfig& cfg, const SampleTable& base,
                        const SampleTable& heldout, std::uint64_t seed);

// `steps` SGD steps on support cross-entropy; only the returned classifier
// changes, inputs are untouched.
Linear inner_adapt(const Linear& clf, const Tensor& features, const std::vector<int>& labels,
                   double inner_lr, int steps);

// Episode classifier init: column y of W is the mean support feature of class
// y, bias zero. Nearest-prototype up to the shared column norm.
Linear prototype_classifier(const Tensor& features, const std::vector<int>& labels, int way);

struct MetaStepMetrics {
    double loss_cls = 0.0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    double query_acc = 0.0;
    double mean_rho_v = 0.0;
    double mean_rho_u = 0.0;
};

// One episodic update on a visible/pseudo-unseen task pair. Gradient routing:
// encoder steps on the query classification loss (optionally plus the
// generator loss), the domain classifier on the discriminator loss, the
// mapping layer on the generator loss. The episode-local classifier is
// inner-adapted on fused support features and then discarded.
MetaStepMetrics meta_train_step(Model& model, const Episode& visible, const Episode& pseudo_unseen,
                                double lambda, const TrainConfig& cfg, Adam& opt,
                                std::uint64_t episode_seed);

struct MetaTrainRow {
    int episode = 0;
    double lambda = 0.0;
    double loss_cls = 0.0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    double query_acc = 0.0;
    double mean_rho_u = 0.0;
};

struct MetaTrainResult {
    Model model;
    std::vector<MetaTrainRow> trace;
};

MetaTrainResult run_meta_training(const Model& pretrained, const TrainConfig& cfg,
                                  const SampleTable& base, std::uint64_t seed);

// c = z + rho ⊙ M(z) on plain values
Tensor fuse_values(const Tensor& z, const Tensor& rho, const Tensor& mapped);

double accuracy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace cdfsl
