#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cdfsl/graph.hpp"
#include "cdfsl/params.hpp"
#include "cdfsl/tensor.hpp"

namespace cdfsl {

struct Linear {
    Tensor w;  // [in x out]
    Tensor b;  // [1 x out]
};

struct Mlp {
    std::vector<Linear> layers;
    int in_dim() const { return layers.front().w.rows(); }
    int out_dim() const { return layers.back().w.cols(); }
};

struct ModelConfig {
    int in_dim = 16;
    std::vector<int> encoder_hidden = {64, 64};
    int feat_dim = 32;       // d
    int mapper_hidden = 32;  // interior width of the two-layer mapping network
    int domain_hidden = 32;
};

// Feature encoder phi, domain knowledge mapping layer M, domain classifier f_d
// (sigmoid head, scores in (0,1)) and the pretraining classifier f_c.
// Meta-phase classifiers are episode-local and created per task.
struct Model {
    Mlp encoder;
    Mlp mapper;
    Mlp domain_clf;
    Linear classifier;
};

Linear init_linear(int in, int out, std::uint64_t seed);
Mlp init_mlp(const std::vector<int>& dims, std::uint64_t seed);
Model init_model(const ModelConfig& cfg, int num_classes, std::uint64_t seed);

// Graph-attached parameter handles (node ids per layer, weight then bias).
struct AttachedLinear {
    int w;
    int b;
};
struct AttachedMlp {
    std::vector<AttachedLinear> layers;
};

AttachedLinear attach(Graph& g, const Linear& lin);
AttachedMlp attach(Graph& g, const Mlp& mlp);
// Frozen variants: parameters enter the graph as constants.
AttachedLinear attach_frozen(Graph& g, const Linear& lin);
AttachedMlp attach_frozen(Graph& g, const Mlp& mlp);

int linear_forward(Graph& g, const AttachedLinear& lin, int x);
// relu between layers, none after the last
int mlp_forward(Graph& g, const AttachedMlp& mlp, int x);

// phi(x): MLP forward then row-wise L2 normalization.
int encode(Graph& g, const AttachedMlp& encoder, int batch);

// M(z) = z + R(z): the mapping layer is residual, so it starts near the
// identity and adversarial training bends it away gradually.
int map_features(Graph& g, const AttachedMlp& mapper, int z);
Tensor eval_map(const Mlp& mapper, const Tensor& z);

// rho = sigmoid(f_d(M(z))), shape [n x 1], entries strictly in (0,1)
int difficulty_score(Graph& g, const AttachedMlp& domain_clf, const AttachedMlp& mapper, int z);

// c = z + rho ⊙ M(z), rho [n x 1] broadcast across columns
int fuse(Graph& g, int z, int rho, int mapped);

// Value-level conveniences (build a throwaway graph internally).
Tensor eval_encode(const Mlp& encoder, const Tensor& batch);
Tensor eval_mlp(const Mlp& mlp, const Tensor& batch);
Tensor eval_difficulty(const Mlp& domain_clf, const Mlp& mapper, const Tensor& z);
Tensor eval_linear(const Linear& lin, const Tensor& batch);

// Flat named views for checkpointing and fd_check closures.
ParamSet model_to_params(const Model& m);
Model model_from_params(const ParamSet& p);
void mlp_to_params(const Mlp& m, const std::string& prefix, ParamSet& out);
Mlp mlp_from_params(const ParamSet& p, const std::string& prefix);

}  // namespace cdfsl
