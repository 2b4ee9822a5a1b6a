#include "cdfsl/config.hpp"

#include <cstdio>
#include <fstream>

#include "cdfsl/rng.hpp"

namespace cdfsl {

namespace {

using nlohmann::json;

json default_target() {
    return {{"name", "target"}, {"rotation_deg", 45.0}, {"scale_min", 0.7}, {"scale_max", 1.3}, {"shift", 2.0}};
}

json default_json() {
    return {
        {"seed", 1},
        {"regime", "mixed"},
        {"model",
         {{"in_dim", 16},
          {"encoder_hidden", json::array({64, 64})},
          {"feat_dim", 32},
          {"mapper_hidden", 32},
          {"domain_hidden", 32}}},
        {"data",
         {{"source_classes", 64},
          {"heldout_classes", 16},
          {"target_classes", 20},
          {"per_class", 20},
          {"per_class_eval", 30},
          {"sigma_class", 0.35},
          {"proto_scale", 1.0},
          {"proto_rank", 6},
          {"domain_seed", 7},
          {"targets", json::array()}}},
        {"pretrain",
         {{"epochs", 50},
          {"batch_size", 32},
          {"lr", 1e-4},
          {"kappa", 0.1},
          {"tau", 0.5},
          {"view_noise_factor", 1.0}}},
        {"meta",
         {{"episodes", 600},
          {"lr", 1e-4},
          {"inner_lr", 0.01},
          {"inner_steps", 5},
          {"lambda_min", 0.3},
          {"lambda_max", 0.7},
          {"generator_updates_encoder", false},
          {"way", 5},
          {"shot", 1},
          {"query", 15},
          {"checkpoint_every", 0}}},
        {"eval",
         {{"tasks", 1000},
          {"way", 5},
          {"shot", 1},
          {"query", 15},
          {"calib_steps", 1},
          {"calib_lr", 2.0},
          {"inner_lr", 0.01},
          {"inner_steps", 5},
          {"emd_cap", 64},
          {"feature_emd", false}}},
        {"sweep", {{"kappa_max", 10.0}, {"kappa_step", 0.2}}},
    };
}

bool type_compatible(const json& dst, const json& src) {
    if (dst.type() == src.type()) return true;
    if (dst.is_number() && src.is_number()) return true;
    return false;
}

void merge_into(json& dst, const json& src, const std::string& path) {
    if (!src.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, value] : src.items()) {
        std::string here = path.empty() ? key : path + "." + key;
        if (!dst.contains(key)) throw ConfigError("unknown config key: " + here);
        json& d = dst[key];
        if (key == "targets") {
            if (!value.is_array()) throw ConfigError(here + ": expected an array");
            json resolved_targets = json::array();
            for (std::size_t i = 0; i < value.size(); ++i) {
                json t = default_target();
                t["name"] = "target" + std::to_string(i);
                merge_into(t, value[i], here + "[" + std::to_string(i) + "]");
                resolved_targets.push_back(std::move(t));
            }
            d = std::move(resolved_targets);
        } else if (d.is_object()) {
            merge_into(d, value, here);
        } else {
            if (!type_compatible(d, value))
                throw ConfigError(here + ": expected " + std::string(d.type_name()) + ", got " +
                                  std::string(value.type_name()));
            d = value;
        }
    }
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

RunConfig extract(const json& j) {
    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();

    const json& m = j.at("model");
    c.pipeline.arch.in_dim = m.at("in_dim").get<int>();
    c.pipeline.arch.encoder_hidden = m.at("encoder_hidden").get<std::vector<int>>();
    c.pipeline.arch.feat_dim = m.at("feat_dim").get<int>();
    c.pipeline.arch.mapper_hidden = m.at("mapper_hidden").get<int>();
    c.pipeline.arch.domain_hidden = m.at("domain_hidden").get<int>();
    require(c.pipeline.arch.in_dim > 0, "model.in_dim: must be positive");
    require(c.pipeline.arch.feat_dim > 0, "model.feat_dim: must be positive");
    for (int h : c.pipeline.arch.encoder_hidden) require(h > 0, "model.encoder_hidden: widths must be positive");

    const json& d = j.at("data");
    c.data.source_classes = d.at("source_classes").get<int>();
    c.data.heldout_classes = d.at("heldout_classes").get<int>();
    c.data.target_classes = d.at("target_classes").get<int>();
    c.data.per_class = d.at("per_class").get<int>();
    c.data.per_class_eval = d.at("per_class_eval").get<int>();
    c.data.sigma_class = d.at("sigma_class").get<double>();
    c.data.proto_scale = d.at("proto_scale").get<double>();
    c.data.proto_rank = d.at("proto_rank").get<int>();
    c.data.domain_seed = d.at("domain_seed").get<std::uint64_t>();
    require(c.data.proto_rank > 0 && c.data.proto_rank <= c.pipeline.arch.in_dim,
            "data.proto_rank: must be in [1, model.in_dim]");
    require(c.data.source_classes > 0, "data.source_classes: must be positive");
    require(c.data.heldout_classes > 0, "data.heldout_classes: must be positive");
    require(c.data.sigma_class > 0.0, "data.sigma_class: must be positive");
    for (const auto& t : d.at("targets")) {
        TargetSpecConfig ts;
        ts.name = t.at("name").get<std::string>();
        ts.rotation_deg = t.at("rotation_deg").get<double>();
        ts.scale_min = t.at("scale_min").get<double>();
        ts.scale_max = t.at("scale_max").get<double>();
        ts.shift = t.at("shift").get<double>();
        require(ts.scale_min <= ts.scale_max, "data.targets: scale_min must be <= scale_max");
        c.data.targets.push_back(std::move(ts));
    }

    const json& p = j.at("pretrain");
    c.pipeline.train.pretrain_epochs = p.at("epochs").get<int>();
    c.pipeline.train.batch_size = p.at("batch_size").get<int>();
    c.pipeline.train.pretrain_lr = p.at("lr").get<double>();
    c.pipeline.train.kappa = p.at("kappa").get<double>();
    c.pipeline.train.tau = p.at("tau").get<double>();
    c.pipeline.train.view_noise = p.at("view_noise_factor").get<double>() * c.data.sigma_class;
    c.pipeline.train.regime = parse_regime(j.at("regime").get<std::string>());
    require(c.pipeline.train.pretrain_epochs >= 1, "pretrain.epochs: must be >= 1");
    require(c.pipeline.train.batch_size >= 1, "pretrain.batch_size: must be >= 1");
    require(c.pipeline.train.pretrain_lr > 0.0, "pretrain.lr: must be positive");
    require(c.pipeline.train.kappa >= 0.0, "pretrain.kappa: must be >= 0");
    require(c.pipeline.train.tau > 0.0, "pretrain.tau: must be positive");

    const json& mt = j.at("meta");
    c.pipeline.train.episodes = mt.at("episodes").get<int>();
    c.pipeline.train.meta_lr = mt.at("lr").get<double>();
    c.pipeline.train.inner_lr = mt.at("inner_lr").get<double>();
    c.pipeline.train.inner_steps = mt.at("inner_steps").get<int>();
    c.pipeline.train.lambda_min = mt.at("lambda_min").get<double>();
    c.pipeline.train.lambda_max = mt.at("lambda_max").get<double>();
    c.pipeline.train.generator_updates_encoder = mt.at("generator_updates_encoder").get<bool>();
    c.pipeline.train.way = mt.at("way").get<int>();
    c.pipeline.train.shot = mt.at("shot").get<int>();
    c.pipeline.train.query = mt.at("query").get<int>();
    c.pipeline.train.checkpoint_every = mt.at("checkpoint_every").get<int>();
    require(c.pipeline.train.episodes >= 0, "meta.episodes: must be >= 0");
    require(c.pipeline.train.meta_lr >= 0.0, "meta.lr: must be >= 0");
    require(c.pipeline.train.inner_lr >= 0.0, "meta.inner_lr: must be >= 0");
    require(c.pipeline.train.lambda_min >= 0.0 && c.pipeline.train.lambda_max <= 1.0 &&
                c.pipeline.train.lambda_min <= c.pipeline.train.lambda_max,
            "meta.lambda range must be within [0, 1]");

    const json& e = j.at("eval");
    c.pipeline.eval.tasks = e.at("tasks").get<int>();
    c.pipeline.eval.way = e.at("way").get<int>();
    c.pipeline.eval.shot = e.at("shot").get<int>();
    c.pipeline.eval.query = e.at("query").get<int>();
    c.pipeline.eval.calib_steps = e.at("calib_steps").get<int>();
    c.pipeline.eval.calib_lr = e.at("calib_lr").get<double>();
    c.pipeline.eval.inner_lr = e.at("inner_lr").get<double>();
    c.pipeline.eval.inner_steps = e.at("inner_steps").get<int>();
    c.pipeline.eval.emd_cap = e.at("emd_cap").get<int>();
    c.pipeline.eval.feature_emd = e.at("feature_emd").get<bool>();
    require(c.pipeline.eval.tasks >= 1, "eval.tasks: must be >= 1");
    require(c.pipeline.eval.way >= 2, "eval.way: must be >= 2");
    require(c.pipeline.eval.shot >= 1, "eval.shot: must be >= 1");
    require(c.pipeline.eval.query >= 1, "eval.query: must be >= 1");
    require(c.data.target_classes >= c.pipeline.eval.way, "data.target_classes: must cover eval.way");
    require(c.data.per_class_eval >= c.pipeline.eval.shot + c.pipeline.eval.query,
            "data.per_class_eval: must cover eval.shot + eval.query");

    const json& s = j.at("sweep");
    c.sweep.kappa_max = s.at("kappa_max").get<double>();
    c.sweep.kappa_step = s.at("kappa_step").get<double>();
    require(c.sweep.kappa_step > 0.0, "sweep.kappa_step: must be positive");
    return c;
}

void fill_default_targets(json& resolved) {
    json& targets = resolved["data"]["targets"];
    if (!targets.empty()) return;
    const double degs[] = {45.0, 90.0, 135.0};
    for (int i = 0; i < 3; ++i) {
        json t = default_target();
        t["name"] = "rot" + std::to_string(static_cast<int>(degs[i]));
        t["rotation_deg"] = degs[i];
        targets.push_back(std::move(t));
    }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path, nlohmann::json& resolved) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    json user;
    try {
        user = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    resolved = default_json();
    merge_into(resolved, user, "");
    fill_default_targets(resolved);
    return extract(resolved);
}

RunConfig default_run_config(nlohmann::json& resolved) {
    resolved = default_json();
    fill_default_targets(resolved);
    return extract(resolved);
}

std::string config_hash(const nlohmann::json& resolved) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(resolved.dump())));
    return buf;
}

PipelineData build_benchmark(const DataConfig& data, const ModelConfig& arch) {
    int dim = arch.in_dim;
    int all_source = data.source_classes + data.heldout_classes;
    // Source and target prototypes share one latent subspace so the encoder
    // can learn domain structure that the target transforms then disturb.
    Tensor basis = random_basis(dim, data.proto_rank, derive_seed(data.domain_seed, "proto_basis", 0));
    Tensor protos = subspace_prototypes(all_source, basis, data.proto_scale,
                                        derive_seed(data.domain_seed, "source_protos", 0));

    auto source_spec = [&](int first, int count, int label_offset) {
        DomainSpec s;
        s.prototypes = Tensor::zeros({count, dim});
        for (int c = 0; c < count; ++c)
            for (int j = 0; j < dim; ++j) s.prototypes.at(c, j) = protos.at(first + c, j);
        s.sigma_class = data.sigma_class;
        s.rotation = identity_matrix(dim);
        s.scale.assign(dim, 1.0);
        s.shift.assign(dim, 0.0);
        s.label_offset = label_offset;
        return s;
    };

    PipelineData out;
    out.base = synth_dataset(source_spec(0, data.source_classes, 0), data.per_class,
                             derive_seed(data.domain_seed, "base", 0));
    out.heldout = synth_dataset(source_spec(data.source_classes, data.heldout_classes, data.source_classes),
                                data.per_class, derive_seed(data.domain_seed, "heldout", 0));

    for (std::size_t i = 0; i < data.targets.size(); ++i) {
        const TargetSpecConfig& t = data.targets[i];
        DomainSpec s;
        s.prototypes = subspace_prototypes(data.target_classes, basis, data.proto_scale,
                                           derive_seed(data.domain_seed, "target_protos", i));
        s.sigma_class = data.sigma_class;
        s.rotation = rotation_matrix(dim, t.rotation_deg);
        Rng trng(derive_seed(data.domain_seed, "target_transform", i));
        s.scale.resize(dim);
        s.shift.resize(dim);
        for (int j = 0; j < dim; ++j) s.scale[j] = trng.uniform(t.scale_min, t.scale_max);
        for (int j = 0; j < dim; ++j) s.shift[j] = t.shift * trng.normal();
        out.targets.emplace_back(t.name, synth_dataset(s, data.per_class_eval,
                                                       derive_seed(data.domain_seed, "target_table", i)));
    }
    return out;
}

}  // namespace cdfsl
