#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdfsl/evaluation.hpp"

namespace cdfsl {

// Invalid or malformed run configuration; maps to exit code 2 in the CLI.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TargetSpecConfig {
    std::string name;
    double rotation_deg = 45.0;
    double scale_min = 0.7;
    double scale_max = 1.3;
    double shift = 2.0;
};

struct DataConfig {
    int source_classes = 64;
    int heldout_classes = 16;
    int target_classes = 20;
    int per_class = 20;
    int per_class_eval = 30;
    double sigma_class = 0.35;
    double proto_scale = 1.0;
    int proto_rank = 6;  // latent subspace dimension shared by all class prototypes
    std::uint64_t domain_seed = 7;
    std::vector<TargetSpecConfig> targets;
};

struct SweepConfig {
    double kappa_max = 10.0;
    double kappa_step = 0.2;
};

struct RunConfig {
    std::uint64_t seed = 1;
    Pipeline pipeline;
    DataConfig data;
    SweepConfig sweep;
};

// Parse and validate a JSON run config: unknown keys are rejected with their
// field path, defaults are materialized. `resolved` receives the full config
// with every default filled in.
RunConfig load_run_config(const std::filesystem::path& path, nlohmann::json& resolved);

// Default config with all defaults materialized (what an empty {} resolves to).
RunConfig default_run_config(nlohmann::json& resolved);

// FNV-1a over the canonical dump of the resolved config.
std::string config_hash(const nlohmann::json& resolved);

// Synthesize the benchmark: base/held-out tables share one source domain with
// identity transform; each target is a fresh-class domain under its own
// rotation + scale + shift.
PipelineData build_benchmark(const DataConfig& data, const ModelConfig& arch);

}  // namespace cdfsl
