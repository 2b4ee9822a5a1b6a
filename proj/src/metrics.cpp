#include "cdfsl/metrics.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace cdfsl {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return f;
}

}  // namespace

void write_pretrain_trace(const std::vector<PretrainEpochRow>& trace, const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "epoch,ce,ssl,alpha,total\n";
    for (const auto& r : trace)
        f << r.epoch << "," << fmt_double(r.ce) << "," << fmt_double(r.ssl) << "," << fmt_double(r.alpha)
          << "," << fmt_double(r.total) << "\n";
}

void write_metatrain_trace(const std::vector<MetaTrainRow>& trace, const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "episode,lambda,loss_cls,loss_d,loss_g,query_acc,mean_rho_u\n";
    for (const auto& r : trace)
        f << r.episode << "," << fmt_double(r.lambda) << "," << fmt_double(r.loss_cls) << ","
          << fmt_double(r.loss_d) << "," << fmt_double(r.loss_g) << "," << fmt_double(r.query_acc) << ","
          << fmt_double(r.mean_rho_u) << "\n";
}

void write_eval_report_csv(const EvalReport& rep, const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "task_id,seed,accuracy,mean_rho,mean_rho_fused,emd\n";
    for (const auto& r : rep.rows)
        f << r.task_id << "," << r.seed << "," << fmt_double(r.accuracy) << "," << fmt_double(r.mean_rho)
          << "," << fmt_double(r.mean_rho_fused) << "," << fmt_double(rep.emd_to_source) << "\n";
}

void write_eval_report_json(const EvalReport& rep, const std::filesystem::path& path) {
    nlohmann::json j = {
        {"target", rep.target},
        {"tasks", rep.tasks},
        {"mean_accuracy", rep.mean},
        {"ci95_halfwidth", rep.ci95},
        {"mean_rho", rep.mean_rho},
        {"mean_rho_fused", rep.mean_rho_fused},
        {"emd_to_source", rep.emd_to_source},
        {"seed", rep.seed},
        {"config_hash", rep.config_hash},
    };
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

void write_ablation_csv(const AblationResult& res, const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "regime,target,mean_accuracy,ci95_halfwidth\n";
    for (const auto& [regime, reports] : res.regimes)
        for (const auto& rep : reports)
            f << regime_name(regime) << "," << rep.target << "," << fmt_double(rep.mean) << ","
              << fmt_double(rep.ci95) << "\n";
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "kappa,mean_accuracy\n";
    for (const auto& r : rows) f << fmt_double(r.kappa) << "," << fmt_double(r.mean_accuracy) << "\n";
}

}  // namespace cdfsl
