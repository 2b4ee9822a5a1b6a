#include "cdfsl/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cdfsl/rng.hpp"

namespace cdfsl {

Regime parse_regime(const std::string& s) {
    if (s == "supervised") return Regime::Supervised;
    if (s == "ssl") return Regime::Ssl;
    if (s == "mixed") return Regime::Mixed;
    throw std::invalid_argument("unknown regime '" + s + "' (expected supervised|ssl|mixed)");
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::Supervised: return "supervised";
        case Regime::Ssl: return "ssl";
        case Regime::Mixed: return "mixed";
    }
    return "?";
}

void save_model(const TrainedModel& m, const std::filesystem::path& stem) {
    save_params(model_to_params(m.model), stem);
    nlohmann::json meta = {{"phase", m.phase}, {"seed", m.seed}, {"config_hash", m.config_hash}};
    std::ofstream f(stem.string() + ".meta.json");
    if (!f) throw std::runtime_error("save_model: cannot open " + stem.string() + ".meta.json");
    f << meta.dump(2) << "\n";
}

TrainedModel load_model(const std::filesystem::path& stem) {
    TrainedModel m;
    m.model = model_from_params(load_params(stem));
    std::ifstream f(stem.string() + ".meta.json");
    if (!f) throw std::runtime_error("load_model: missing " + stem.string() + ".meta.json");
    nlohmann::json meta = nlohmann::json::parse(f);
    m.phase = meta.at("phase").get<std::string>();
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.config_hash = meta.at("config_hash").get<std::string>();
    return m;
}

Tensor fuse_values(const Tensor& z, const Tensor& rho, const Tensor& mapped) {
    Tensor c = z;
    for (int i = 0; i < z.rows(); ++i) {
        for (int j = 0; j < z.cols(); ++j) c.at(i, j) += rho.at(i, 0) * mapped.at(i, j);
        double norm = 0.0;
        for (int j = 0; j < z.cols(); ++j) norm += c.at(i, j) * c.at(i, j);
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (int j = 0; j < z.cols(); ++j) c.at(i, j) /= norm;
    }
    return c;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
    int correct = 0;
    for (int i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < logits.cols(); ++j)
            if (logits.at(i, j) > logits.at(i, best)) best = j;
        if (best == labels[i]) ++correct;
    }
    return logits.rows() == 0 ? 0.0 : static_cast<double>(correct) / logits.rows();
}

namespace {

// Class-mean encoded features of the held-out classes, renormalized; serves as
// the novel-class negative bank and is recomputed every epoch.
Tensor novel_bank(const Mlp& encoder, const SampleTable& heldout) {
    Tensor z = eval_encode(encoder, heldout.x);
    std::vector<int> classes = heldout.labels;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    int d = z.cols();
    Tensor bank = Tensor::zeros({static_cast<int>(classes.size()), d});
    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        int count = 0;
        for (int r = 0; r < z.rows(); ++r)
            if (heldout.labels[r] == classes[ci]) {
                for (int j = 0; j < d; ++j) bank.at(static_cast<int>(ci), j) += z.at(r, j);
                ++count;
            }
        double n2 = 0.0;
        for (int j = 0; j < d; ++j) {
            bank.at(static_cast<int>(ci), j) /= count;
            n2 += bank.at(static_cast<int>(ci), j) * bank.at(static_cast<int>(ci), j);
        }
        double norm = std::sqrt(n2);
        if (norm > 1e-12)
            for (int j = 0; j < d; ++j) bank.at(static_cast<int>(ci), j) /= norm;
    }
    return bank;
}

Tensor slice_rows(const Tensor& t, const std::vector<int>& rows) {
    int d = t.cols();
    Tensor out = Tensor::zeros({static_cast<int>(rows.size()), d});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(&t.values[static_cast<std::size_t>(rows[i]) * d], d,
                    &out.values[i * static_cast<std::size_t>(d)]);
    return out;
}

Tensor perturb(const Tensor& x, double scale, Rng& rng) {
    Tensor out = x;
    for (double& v : out.values) v += scale * rng.normal();
    return out;
}

void merge_grad(GradientMap& into, const GradientMap& from, int id) {
    auto it = from.find(id);
    if (it == from.end()) return;
    auto jt = into.find(id);
    if (jt == into.end()) {
        into.emplace(id, it->second);
    } else {
        for (int i = 0; i < jt->second.size(); ++i) jt->second.values[i] += it->second.values[i];
    }
}

}  // namespace

PretrainResult pretrain(const ModelConfig& arch, const TrainConfig& cfg, const SampleTable& base,
                        const SampleTable& heldout, std::uint64_t seed) {
    int num_classes = base.num_classes;
    for (int y : base.labels)
        if (y < 0 || y >= num_classes)
            throw std::invalid_argument("pretrain: base table labels must be contiguous in [0, C)");

    PretrainResult res;
    res.model = init_model(arch, num_classes, derive_seed(seed, "init", 0));
    Adam opt({cfg.pretrain_lr});
    Schedule sched{cfg.kappa, cfg.pretrain_epochs};

    int n = base.x.rows();
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    for (int t = 1; t <= cfg.pretrain_epochs; ++t) {
        double a = alpha(t, sched);
        bool use_ce = cfg.regime != Regime::Ssl;
        bool use_ssl = cfg.regime != Regime::Supervised && a > 0.0;
        double ssl_weight = cfg.regime == Regime::Mixed ? a : (use_ssl ? a : 0.0);

        Rng shuffle_rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(t)));
        shuffle_rng.shuffle(order);

        Tensor bank;
        if (use_ssl) bank = novel_bank(res.model.encoder, heldout);

        double sum_ce = 0.0, sum_ssl = 0.0, sum_total = 0.0;
        int num_batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size, ++num_batches) {
            int bs = std::min(cfg.batch_size, n - start);
            std::vector<int> rows(order.begin() + start, order.begin() + start + bs);
            Tensor bx = slice_rows(base.x, rows);
            std::vector<int> by(bs);
            for (int i = 0; i < bs; ++i) by[i] = base.labels[rows[i]];

            Graph g;
            AttachedMlp enc = attach(g, res.model.encoder);
            AttachedLinear clf = attach(g, res.model.classifier);

            int ce = -1, ssl = -1;
            if (use_ce) {
                int z = encode(g, enc, g.constant(bx));
                ce = cross_entropy(g, linear_forward(g, clf, z), by);
            }
            if (use_ssl && bs >= 2) {
                Rng view_rng(derive_seed(seed, "views",
                                         static_cast<std::uint64_t>(t) * 1000000u + num_batches));
                Tensor v1 = perturb(bx, cfg.view_noise, view_rng);
                Tensor v2 = perturb(bx, cfg.view_noise, view_rng);
                int z1 = encode(g, enc, g.constant(std::move(v1)));
                int z2 = encode(g, enc, g.constant(std::move(v2)));
                ssl = info_nce_class_aware(g, z1, z2, by, g.constant(bank), cfg.tau);
            }

            int total;
            if (ce >= 0 && ssl >= 0) {
                total = pretrain_loss(g, ce, ssl, t, sched);
            } else if (ce >= 0) {
                total = ce;
            } else if (ssl >= 0) {
                total = g.scalar_mul(ssl, ssl_weight);
            } else {
                continue;  // ssl regime, alpha still 0 and nothing to optimize
            }

            double total_v = g.value(total).values[0];
            if (!std::isfinite(total_v))
                throw NumericError("pretrain: non-finite loss at epoch " + std::to_string(t));

            GradientMap grads = g.backward(total);
            adam_step_mlp(opt, "encoder", res.model.encoder, enc, grads);
            if (use_ce) adam_step_linear(opt, "classifier", res.model.classifier, clf, grads);

            if (ce >= 0) sum_ce += g.value(ce).values[0];
            if (ssl >= 0) sum_ssl += g.value(ssl).values[0];
            sum_total += total_v;
        }

        PretrainEpochRow row;
        row.epoch = t;
        row.alpha = a;
        if (num_batches > 0) {
            row.ce = sum_ce / num_batches;
            row.ssl = sum_ssl / num_batches;
            row.total = sum_total / num_batches;
        }
        res.trace.push_back(row);
    }
    return res;
}

Linear prototype_classifier(const Tensor& features, const std::vector<int>& labels, int way) {
    int d = features.cols();
    Linear clf{Tensor::zeros({d, way}), Tensor::zeros({1, way})};
    std::vector<int> counts(way, 0);
    for (int r = 0; r < features.rows(); ++r) {
        int y = labels[r];
        for (int j = 0; j < d; ++j) clf.w.at(j, y) += features.at(r, j);
        ++counts[y];
    }
    for (int y = 0; y < way; ++y) {
        if (counts[y] == 0) throw std::invalid_argument("prototype_classifier: class without support rows");
        for (int j = 0; j < d; ++j) clf.w.at(j, y) /= counts[y];
    }
    return clf;
}

Linear inner_adapt(const Linear& clf, const Tensor& features, const std::vector<int>& labels,
                   double inner_lr, int steps) {
    Linear out = clf;
    for (int s = 0; s < steps; ++s) {
        Graph g;
        AttachedLinear a = attach(g, out);
        int loss = cross_entropy(g, linear_forward(g, a, g.constant(features)), labels);
        GradientMap grads = g.backward(loss);
        sgd_step(out.w, grads.at(a.w), inner_lr);
        sgd_step(out.b, grads.at(a.b), inner_lr);
    }
    return out;
}

MetaStepMetrics meta_train_step(Model& model, const Episode& visible, const Episode& pseudo_unseen,
                                double lambda, const TrainConfig& cfg, Adam& opt,
                                std::uint64_t episode_seed) {
    if (visible.support_y != pseudo_unseen.support_y || visible.query_y != pseudo_unseen.query_y)
        throw std::invalid_argument("meta_train_step: domains must share labels");
    if (lambda < cfg.lambda_min || lambda > cfg.lambda_max)
        throw std::invalid_argument("meta_train_step: lambda outside configured range");
    double d_u = 1.0 - lambda;

    // support path is numeric: inner adaptation is first-order
    Tensor z_sup = eval_encode(model.encoder, visible.support_x);
    Tensor m_sup = eval_map(model.mapper, z_sup);
    Tensor rho_sup = eval_difficulty(model.domain_clf, model.mapper, z_sup);
    Tensor c_sup = fuse_values(z_sup, rho_sup, m_sup);

    Linear episode_clf = prototype_classifier(c_sup, visible.support_y, visible.way);
    episode_clf = inner_adapt(episode_clf, c_sup, visible.support_y, cfg.inner_lr, cfg.inner_steps);

    Graph g;
    AttachedMlp enc = attach(g, model.encoder);
    AttachedMlp map = attach(g, model.mapper);
    AttachedMlp dom = attach(g, model.domain_clf);

    int zq_v = encode(g, enc, g.constant(visible.query_x));
    int zq_u = encode(g, enc, g.constant(pseudo_unseen.query_x));
    int mq_v = map_features(g, map, zq_v);
    int rho_v = g.sigmoid(mlp_forward(g, dom, mq_v));
    int rho_u = g.sigmoid(mlp_forward(g, dom, map_features(g, map, zq_u)));

    // rho enters the fusion detached so the classification loss cannot leak
    // into the domain classifier
    int rho_v_const = g.constant(g.value(rho_v));
    int c_v = fuse(g, zq_v, rho_v_const, mq_v);
    AttachedLinear clf = attach_frozen(g, episode_clf);
    int logits = linear_forward(g, clf, c_v);
    int l_cls = cross_entropy(g, logits, visible.query_y);
    int l_d = discriminator_loss(g, rho_v, rho_u, d_u);
    int l_g = generator_loss(g, rho_u, d_u);

    MetaStepMetrics mm;
    mm.loss_cls = g.value(l_cls).values[0];
    mm.loss_d = g.value(l_d).values[0];
    mm.loss_g = g.value(l_g).values[0];
    if (!std::isfinite(mm.loss_cls) || !std::isfinite(mm.loss_d) || !std::isfinite(mm.loss_g))
        throw NumericError("meta_train_step: non-finite loss");
    mm.query_acc = accuracy(g.value(logits), visible.query_y);
    {
        const Tensor& rv = g.value(rho_v);
        const Tensor& ru = g.value(rho_u);
        for (double v : rv.values) mm.mean_rho_v += v;
        for (double v : ru.values) mm.mean_rho_u += v;
        mm.mean_rho_v /= rv.size();
        mm.mean_rho_u /= ru.size();
    }

    GradientMap g_cls = g.backward(l_cls);
    GradientMap g_d = g.backward(l_d);
    GradientMap g_g = g.backward(l_g);

    // encoder: classification loss (+ generator loss when configured)
    GradientMap enc_grads;
    for (const auto& layer : enc.layers) {
        merge_grad(enc_grads, g_cls, layer.w);
        merge_grad(enc_grads, g_cls, layer.b);
        if (cfg.generator_updates_encoder) {
            merge_grad(enc_grads, g_g, layer.w);
            merge_grad(enc_grads, g_g, layer.b);
        }
    }
    adam_step_mlp(opt, "encoder", model.encoder, enc, enc_grads);
    adam_step_mlp(opt, "domain_clf", model.domain_clf, dom, g_d);
    adam_step_mlp(opt, "mapper", model.mapper, map, g_g);
    return mm;
}

MetaTrainResult run_meta_training(const Model& pretrained, const TrainConfig& cfg,
                                  const SampleTable& base, std::uint64_t seed) {
    MetaTrainResult res;
    res.model = pretrained;
    if (cfg.episodes == 0) return res;

    DomainStats stats = domain_stats(base.x);
    Adam opt({cfg.meta_lr});
    for (int e = 0; e < cfg.episodes; ++e) {
        std::uint64_t ep_seed = derive_seed(seed, "meta_episode", static_cast<std::uint64_t>(e));
        Episode vis = sample_episode(base, cfg.way, cfg.shot, cfg.query, derive_seed(ep_seed, "sample", 0));
        Rng lrng(derive_seed(ep_seed, "lambda", 0));
        double lambda = lrng.uniform(cfg.lambda_min, cfg.lambda_max);

        Episode pu = vis;
        pu.support_x = make_pseudo_unseen(vis.support_x, lambda, stats, derive_seed(ep_seed, "mix_sup", 0));
        pu.query_x = make_pseudo_unseen(vis.query_x, lambda, stats, derive_seed(ep_seed, "mix_qry", 0));

        MetaStepMetrics mm = meta_train_step(res.model, vis, pu, lambda, cfg, opt, ep_seed);
        res.trace.push_back({e, lambda, mm.loss_cls, mm.loss_d, mm.loss_g, mm.query_acc, mm.mean_rho_u});

        if (cfg.checkpoint_every > 0 && (e + 1) % cfg.checkpoint_every == 0 && !cfg.checkpoint_dir.empty()) {
            TrainedModel tm{res.model, "metatrain", seed, ""};
            save_model(tm, cfg.checkpoint_dir / ("checkpoint_" + std::to_string(e + 1)));
        }
    }
    return res;
}

}  // namespace cdfsl
