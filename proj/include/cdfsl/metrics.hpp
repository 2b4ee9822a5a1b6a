#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cdfsl/evaluation.hpp"
#include "cdfsl/training.hpp"

namespace cdfsl {

// Canonical double formatting for metrics files; reruns must be byte-identical.
std::string fmt_double(double v);

void write_pretrain_trace(const std::vector<PretrainEpochRow>& trace, const std::filesystem::path& path);
void write_metatrain_trace(const std::vector<MetaTrainRow>& trace, const std::filesystem::path& path);
void write_eval_report_csv(const EvalReport& rep, const std::filesystem::path& path);
void write_eval_report_json(const EvalReport& rep, const std::filesystem::path& path);
void write_ablation_csv(const AblationResult& res, const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace cdfsl
