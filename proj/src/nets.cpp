#include "cdfsl/nets.hpp"

#include <stdexcept>

#include "cdfsl/rng.hpp"

namespace cdfsl {

Linear init_linear(int in, int out, std::uint64_t seed) {
    return {xavier_uniform(in, out, seed), Tensor::zeros({1, out})};
}

Mlp init_mlp(const std::vector<int>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("init_mlp: need at least two dims");
    Mlp m;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        m.layers.push_back(init_linear(dims[i], dims[i + 1], derive_seed(seed, "layer", i)));
    return m;
}

Model init_model(const ModelConfig& cfg, int num_classes, std::uint64_t seed) {
    Model m;
    std::vector<int> enc_dims = {cfg.in_dim};
    enc_dims.insert(enc_dims.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
    enc_dims.push_back(cfg.feat_dim);
    m.encoder = init_mlp(enc_dims, derive_seed(seed, "encoder", 0));
    m.mapper = init_mlp({cfg.feat_dim, cfg.mapper_hidden, cfg.feat_dim}, derive_seed(seed, "mapper", 0));
    m.domain_clf = init_mlp({cfg.feat_dim, cfg.domain_hidden, 1}, derive_seed(seed, "domain_clf", 0));
    m.classifier = init_linear(cfg.feat_dim, num_classes, derive_seed(seed, "classifier", 0));
    return m;
}

AttachedLinear attach(Graph& g, const Linear& lin) { return {g.input(lin.w), g.input(lin.b)}; }

AttachedMlp attach(Graph& g, const Mlp& mlp) {
    AttachedMlp out;
    for (const auto& l : mlp.layers) out.layers.push_back(attach(g, l));
    return out;
}

AttachedLinear attach_frozen(Graph& g, const Linear& lin) { return {g.constant(lin.w), g.constant(lin.b)}; }

AttachedMlp attach_frozen(Graph& g, const Mlp& mlp) {
    AttachedMlp out;
    for (const auto& l : mlp.layers) out.layers.push_back(attach_frozen(g, l));
    return out;
}

int linear_forward(Graph& g, const AttachedLinear& lin, int x) {
    return g.add(g.matmul(x, lin.w), lin.b);
}

int mlp_forward(Graph& g, const AttachedMlp& mlp, int x) {
    int h = x;
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        h = linear_forward(g, mlp.layers[i], h);
        if (i + 1 < mlp.layers.size()) h = g.relu(h);
    }
    return h;
}

int encode(Graph& g, const AttachedMlp& encoder, int batch) {
    return g.l2_normalize(mlp_forward(g, encoder, batch));
}

int map_features(Graph& g, const AttachedMlp& mapper, int z) {
    return g.add(z, mlp_forward(g, mapper, z));
}

Tensor eval_map(const Mlp& mapper, const Tensor& z) {
    Graph g;
    return g.value(map_features(g, attach_frozen(g, mapper), g.constant(z)));
}

int difficulty_score(Graph& g, const AttachedMlp& domain_clf, const AttachedMlp& mapper, int z) {
    return g.sigmoid(mlp_forward(g, domain_clf, map_features(g, mapper, z)));
}

int fuse(Graph& g, int z, int rho, int mapped) {
    const Tensor& zt = g.value(z);
    const Tensor& rt = g.value(rho);
    if (rt.cols() != 1 || rt.rows() != zt.rows())
        throw GraphError("fuse: rho " + rt.shape_str() + " incompatible with z " + zt.shape_str());
    int spread = g.matmul(rho, g.constant(Tensor::full({1, zt.cols()}, 1.0)));
    return g.l2_normalize(g.add(z, g.mul(spread, mapped)));
}

Tensor eval_encode(const Mlp& encoder, const Tensor& batch) {
    Graph g;
    return g.value(encode(g, attach_frozen(g, encoder), g.constant(batch)));
}

Tensor eval_mlp(const Mlp& mlp, const Tensor& batch) {
    Graph g;
    return g.value(mlp_forward(g, attach_frozen(g, mlp), g.constant(batch)));
}

Tensor eval_difficulty(const Mlp& domain_clf, const Mlp& mapper, const Tensor& z) {
    Graph g;
    return g.value(difficulty_score(g, attach_frozen(g, domain_clf), attach_frozen(g, mapper), g.constant(z)));
}

Tensor eval_linear(const Linear& lin, const Tensor& batch) {
    Graph g;
    return g.value(linear_forward(g, attach_frozen(g, lin), g.constant(batch)));
}

void mlp_to_params(const Mlp& m, const std::string& prefix, ParamSet& out) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        out.add(prefix + "." + std::to_string(i) + ".w", m.layers[i].w);
        out.add(prefix + "." + std::to_string(i) + ".b", m.layers[i].b);
    }
}

Mlp mlp_from_params(const ParamSet& p, const std::string& prefix) {
    Mlp m;
    for (std::size_t i = 0;; ++i) {
        std::string wn = prefix + "." + std::to_string(i) + ".w";
        if (!p.has(wn)) break;
        m.layers.push_back({p.get(wn), p.get(prefix + "." + std::to_string(i) + ".b")});
    }
    if (m.layers.empty()) throw std::out_of_range("mlp_from_params: no layers under " + prefix);
    return m;
}

ParamSet model_to_params(const Model& m) {
    ParamSet p;
    mlp_to_params(m.encoder, "encoder", p);
    mlp_to_params(m.mapper, "mapper", p);
    mlp_to_params(m.domain_clf, "domain_clf", p);
    p.add("classifier.w", m.classifier.w);
    p.add("classifier.b", m.classifier.b);
    return p;
}

Model model_from_params(const ParamSet& p) {
    Model m;
    m.encoder = mlp_from_params(p, "encoder");
    m.mapper = mlp_from_params(p, "mapper");
    m.domain_clf = mlp_from_params(p, "domain_clf");
    m.classifier = {p.get("classifier.w"), p.get("classifier.b")};
    return m;
}

}  // namespace cdfsl
