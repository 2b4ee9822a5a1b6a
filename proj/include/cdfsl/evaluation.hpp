#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cdfsl/domains.hpp"
#include "cdfsl/nets.hpp"
#include "cdfsl/training.hpp"

namespace cdfsl {

struct EvalConfig {
    int tasks = 1000;
    int way = 5;
    int shot = 1;
    int query = 15;
    int calib_steps = 1;  // "single calibration" default
    double calib_lr = 2.0;
    double inner_lr = 0.01;
    int inner_steps = 5;
    int emd_cap = 64;
    bool rho_off = false;      // force rho_tgt = 0 (mapping ablation switch)
    bool feature_emd = false;  // measure domain shift on encoder features instead of raw inputs
    int parallel = 1;
};

// Meta-test state after the single support-set calibration. The encoder is
// shared with the frozen source model and never modified.
struct CalibratedModel {
    const Mlp* encoder = nullptr;
    Mlp mapper;
    Mlp domain_clf;
    Linear classifier;  // episode-local, prototype-initialized then inner-adapted
    bool rho_off = false;
};

// One calibration pass with d_u = 1: the domain classifier steps on the
// discriminator loss and the mapping layer on the generator loss over support
// features, then an episode classifier is built from fused class prototypes
// and inner-adapted. The input model is untouched.
CalibratedModel calibrate(const Model& model, const Episode& target_support, const EvalConfig& cfg,
                          std::uint64_t seed);

// Guard for the single-calibration protocol: always throws.
[[noreturn]] void calibrate(const CalibratedModel& already, const Episode&, const EvalConfig&, std::uint64_t);

struct EpisodeEval {
    double accuracy = 0.0;
    double mean_rho = 0.0;        // mean rho_tgt over query samples
    double mean_rho_fused = 0.0;  // f_d applied to fused features; logged, unused in prediction
};

EpisodeEval evaluate_episode(const CalibratedModel& cm, const Tensor& query_x,
                             const std::vector<int>& query_y);

struct EvalReport {
    std::string target;
    int tasks = 0;
    double mean = 0.0;
    double ci95 = 0.0;  // halfwidth, normal approximation over task accuracies
    double mean_rho = 0.0;
    double mean_rho_fused = 0.0;
    double emd_to_source = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;

    struct TaskRow {
        int task_id = 0;
        std::uint64_t seed = 0;
        double accuracy = 0.0;
        double mean_rho = 0.0;
        double mean_rho_fused = 0.0;
    };
    std::vector<TaskRow> rows;
};

// Per task: sample episode -> calibrate -> evaluate, with derived seeds; rows
// are merged in task order, so the report is deterministic even with
// cfg.parallel > 1.
EvalReport run_meta_test(const Model& model, const SampleTable& target, const SampleTable& source,
                         const EvalConfig& cfg, std::uint64_t seed);

struct Pipeline {
    ModelConfig arch;
    TrainConfig train;
    EvalConfig eval;
};

struct PipelineData {
    SampleTable base;
    SampleTable heldout;
    std::vector<std::pair<std::string, SampleTable>> targets;
};

struct PipelineResult {
    Model model;
    PretrainResult pretrain;
    MetaTrainResult metatrain;
    std::vector<EvalReport> reports;  // one per target, in data order
};

// pretrain -> meta-train -> evaluate on every target, all seeds derived from
// `seed` independently of the regime, so regimes are comparable pairwise.
PipelineResult run_pipeline(const Pipeline& p, const PipelineData& data, std::uint64_t seed);

struct AblationResult {
    // supervised, ssl, mixed — in that order
    std::vector<std::pair<Regime, std::vector<EvalReport>>> regimes;
};

AblationResult run_ablation(Pipeline p, const PipelineData& data, std::uint64_t seed);

struct SweepRow {
    double kappa = 0.0;
    double mean_accuracy = 0.0;
};

// Full pipeline per kappa on shared seeds; accuracy is reported on the first
// configured target.
std::vector<SweepRow> sweep_kappa(Pipeline p, const PipelineData& data, std::uint64_t seed,
                                  double kappa_max, double kappa_step);

}  // namespace cdfsl
