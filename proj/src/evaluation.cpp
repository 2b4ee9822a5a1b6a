#include "cdfsl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "cdfsl/losses.hpp"
#include "cdfsl/rng.hpp"

namespace cdfsl {

CalibratedModel calibrate(const Model& model, const Episode& target_support, const EvalConfig& cfg,
                          std::uint64_t seed) {
    if (target_support.support_x.rows() == 0) throw std::invalid_argument("calibrate: empty support set");

    CalibratedModel cm;
    cm.encoder = &model.encoder;
    cm.mapper = model.mapper;
    cm.domain_clf = model.domain_clf;
    cm.rho_off = cfg.rho_off;

    Tensor z_sup = eval_encode(model.encoder, target_support.support_x);

    // d_u = 1: the target support plays both roles of the discriminator loss
    for (int step = 0; step < cfg.calib_steps; ++step) {
        Graph g;
        AttachedMlp map = attach(g, cm.mapper);
        AttachedMlp dom = attach(g, cm.domain_clf);
        int rho = g.sigmoid(mlp_forward(g, dom, map_features(g, map, g.constant(z_sup))));
        int l_d = discriminator_loss(g, rho, rho, 1.0);
        int l_g = generator_loss(g, rho, 1.0);
        GradientMap g_d = g.backward(l_d);
        GradientMap g_g = g.backward(l_g);
        sgd_step_mlp(cm.domain_clf, dom, g_d, cfg.calib_lr);
        // apply only the mapper's share of the generator gradient
        GradientMap map_only;
        for (const auto& layer : map.layers) {
            if (auto it = g_g.find(layer.w); it != g_g.end()) map_only.emplace(layer.w, it->second);
            if (auto it = g_g.find(layer.b); it != g_g.end()) map_only.emplace(layer.b, it->second);
        }
        sgd_step_mlp(cm.mapper, map, map_only, cfg.calib_lr);
    }

    // The classifier always adapts on fused support features; rho_off only
    // switches the query-side gain to zero in evaluate_episode.
    Tensor m_sup = eval_map(cm.mapper, z_sup);
    Tensor rho_sup = eval_difficulty(cm.domain_clf, cm.mapper, z_sup);
    Tensor c_sup = fuse_values(z_sup, rho_sup, m_sup);

    cm.classifier = prototype_classifier(c_sup, target_support.support_y, target_support.way);
    cm.classifier = inner_adapt(cm.classifier, c_sup, target_support.support_y, cfg.inner_lr, cfg.inner_steps);
    return cm;
}

void calibrate(const CalibratedModel&, const Episode&, const EvalConfig&, std::uint64_t) {
    throw std::logic_error("calibrate: model already calibrated; the protocol allows a single calibration");
}

EpisodeEval evaluate_episode(const CalibratedModel& cm, const Tensor& query_x,
                             const std::vector<int>& query_y) {
    if (query_x.rows() == 0) throw std::invalid_argument("evaluate_episode: empty query set");
    Tensor z_q = eval_encode(*cm.encoder, query_x);
    Tensor rho_q = eval_difficulty(cm.domain_clf, cm.mapper, z_q);
    Tensor c_q = z_q;
    if (!cm.rho_off) {
        Tensor m_q = eval_map(cm.mapper, z_q);
        c_q = fuse_values(z_q, rho_q, m_q);
    }
    Tensor logits = eval_linear(cm.classifier, c_q);

    EpisodeEval ev;
    ev.accuracy = accuracy(logits, query_y);
    for (double v : rho_q.values) ev.mean_rho += v;
    ev.mean_rho /= rho_q.size();
    // p_t = f_d(c_tgt): the domain classifier applied directly to fused features
    Graph g;
    Tensor p_t = g.value(g.sigmoid(mlp_forward(g, attach_frozen(g, cm.domain_clf), g.constant(c_q))));
    for (double v : p_t.values) ev.mean_rho_fused += v;
    ev.mean_rho_fused /= p_t.size();
    return ev;
}

namespace {

Tensor random_rows(const Tensor& x, int count, Rng& rng) {
    std::vector<int> idx(x.rows());
    for (int i = 0; i < x.rows(); ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(count);
    int d = x.cols();
    Tensor out = Tensor::zeros({count, d});
    for (int i = 0; i < count; ++i)
        std::copy_n(&x.values[static_cast<std::size_t>(idx[i]) * d], d,
                    &out.values[static_cast<std::size_t>(i) * d]);
    return out;
}

}  // namespace

EvalReport run_meta_test(const Model& model, const SampleTable& target, const SampleTable& source,
                         const EvalConfig& cfg, std::uint64_t seed) {
    if (cfg.tasks < 1) throw std::invalid_argument("run_meta_test: task count must be >= 1");

    EvalReport rep;
    rep.tasks = cfg.tasks;
    rep.seed = seed;
    rep.rows.resize(cfg.tasks);

    auto run_task = [&](int t) {
        std::uint64_t task_seed = derive_seed(seed, "task", static_cast<std::uint64_t>(t));
        Episode ep = sample_episode(target, cfg.way, cfg.shot, cfg.query, derive_seed(task_seed, "sample", 0));
        CalibratedModel cm = calibrate(model, ep, cfg, task_seed);
        EpisodeEval ev = evaluate_episode(cm, ep.query_x, ep.query_y);
        rep.rows[t] = {t, task_seed, ev.accuracy, ev.mean_rho, ev.mean_rho_fused};
    };

    int workers = std::max(1, cfg.parallel);
    if (workers == 1) {
        for (int t = 0; t < cfg.tasks; ++t) run_task(t);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int t = w; t < cfg.tasks; t += workers) run_task(t);
            });
        for (auto& th : pool) th.join();
    }

    for (const auto& r : rep.rows) {
        rep.mean += r.accuracy;
        rep.mean_rho += r.mean_rho;
        rep.mean_rho_fused += r.mean_rho_fused;
    }
    rep.mean /= rep.tasks;
    rep.mean_rho /= rep.tasks;
    rep.mean_rho_fused /= rep.tasks;
    if (rep.tasks > 1) {
        double ss = 0.0;
        for (const auto& r : rep.rows) ss += (r.accuracy - rep.mean) * (r.accuracy - rep.mean);
        rep.ci95 = 1.96 * std::sqrt(ss / (rep.tasks - 1)) / std::sqrt(static_cast<double>(rep.tasks));
    }

    Rng emd_rng(derive_seed(seed, "emd", 0));
    int count = std::min({cfg.emd_cap, source.x.rows(), target.x.rows()});
    if (count >= 1) {
        Tensor a = random_rows(source.x, count, emd_rng);
        Tensor b = random_rows(target.x, count, emd_rng);
        if (cfg.feature_emd) {
            a = eval_encode(model.encoder, a);
            b = eval_encode(model.encoder, b);
        }
        rep.emd_to_source = emd(a, b, cfg.emd_cap);
    }
    return rep;
}

PipelineResult run_pipeline(const Pipeline& p, const PipelineData& data, std::uint64_t seed) {
    PipelineResult res;
    res.pretrain = pretrain(p.arch, p.train, data.base, data.heldout, derive_seed(seed, "pretrain", 0));
    res.metatrain = run_meta_training(res.pretrain.model, p.train, data.base, derive_seed(seed, "metatrain", 0));
    res.model = res.metatrain.model;
    for (std::size_t i = 0; i < data.targets.size(); ++i) {
        EvalReport rep = run_meta_test(res.model, data.targets[i].second, data.base, p.eval,
                                       derive_seed(seed, "metatest", i));
        rep.target = data.targets[i].first;
        res.reports.push_back(std::move(rep));
    }
    return res;
}

AblationResult run_ablation(Pipeline p, const PipelineData& data, std::uint64_t seed) {
    AblationResult out;
    for (Regime r : {Regime::Supervised, Regime::Ssl, Regime::Mixed}) {
        p.train.regime = r;
        out.regimes.emplace_back(r, run_pipeline(p, data, seed).reports);
    }
    return out;
}

std::vector<SweepRow> sweep_kappa(Pipeline p, const PipelineData& data, std::uint64_t seed,
                                  double kappa_max, double kappa_step) {
    if (kappa_step <= 0.0 || kappa_max < 0.0) throw std::invalid_argument("sweep_kappa: invalid grid");
    if (data.targets.empty()) throw std::invalid_argument("sweep_kappa: no targets configured");
    std::vector<SweepRow> rows;
    p.train.regime = Regime::Mixed;
    int steps = static_cast<int>(std::llround(kappa_max / kappa_step));
    for (int i = 0; i <= steps; ++i) {
        p.train.kappa = i * kappa_step;
        PipelineResult res = run_pipeline(p, data, seed);
        rows.push_back({p.train.kappa, res.reports.front().mean});
    }
    return rows;
}

}  // namespace cdfsl
