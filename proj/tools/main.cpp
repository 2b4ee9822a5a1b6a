#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "cdfsl/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Cross-domain few-shot learning pipeline"};
    app.require_subcommand(1);

    cdfsl::CommandOptions opts;
    std::string config;
    std::string out;
    std::string checkpoint;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "path to run config json");
        sub->add_option("--out", out, "output run directory");
        sub->add_option("--seed", seed, "override the master seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_flag("--force", opts.force, "allow writing into a non-empty run directory");
    };

    auto* pre = app.add_subcommand("pretrain", "source-domain pretraining");
    add_common(pre);

    auto* meta = app.add_subcommand("metatrain", "episodic meta-training from a pretrain checkpoint");
    add_common(meta);
    meta->add_option("--checkpoint", checkpoint, "pretrain checkpoint stem");

    auto* ev = app.add_subcommand("evaluate", "meta-test evaluation on the target domains");
    add_common(ev);
    ev->add_option("--checkpoint", checkpoint, "model checkpoint stem");
    ev->add_flag("--rho-off", opts.rho_off, "disable difficulty-weighted fusion at test time");
    ev->add_option("--parallel", opts.parallel, "worker threads for evaluation tasks");

    auto* ab = app.add_subcommand("ablate", "run the supervised/ssl/mixed ablation");
    add_common(ab);
    ab->add_option("--parallel", opts.parallel, "worker threads for evaluation tasks");

    auto* sw = app.add_subcommand("sweep", "sweep the ssl weight schedule scale");
    add_common(sw);
    sw->add_option("--parallel", opts.parallel, "worker threads for evaluation tasks");

    auto* st = app.add_subcommand("selftest", "quick invariant checks, no run directory");

    CLI11_PARSE(app, argc, argv);

    opts.config_path = config;
    opts.out_dir = out;
    if (seed_set) opts.seed_override = seed;

    if (pre->parsed()) return cdfsl::cmd_pretrain(opts);
    if (meta->parsed()) return cdfsl::cmd_metatrain(opts, checkpoint);
    if (ev->parsed()) return cdfsl::cmd_evaluate(opts, checkpoint);
    if (ab->parsed()) return cdfsl::cmd_ablate(opts);
    if (sw->parsed()) return cdfsl::cmd_sweep(opts);
    if (st->parsed()) return cdfsl::cmd_selftest();
    return 1;
}
