#pragma once

#include <vector>

#include "cdfsl/graph.hpp"

namespace cdfsl {

// Linear ramp for the self-supervised weight: alpha(t) = kappa * t / T.
struct Schedule {
    double kappa = 0.1;
    int total_epochs = 1;  // T
};

double alpha(int t, const Schedule& sched);

// mean over samples of -log softmax(logits)[label]
int cross_entropy(Graph& g, int logits, const std::vector<int>& labels);

// Contrastive estimator over two row-aligned views (rows unit-norm); the
// denominator ranges over all second-view rows. Returned negated, so
// minimizing it maximizes the mutual-information estimator.
int info_nce(Graph& g, int z1, int z2, double tau);

// As info_nce, but the denominator spans second-view rows plus a bank of
// novel-class features, keeps the anchor's own positive, and drops every other
// row sharing the anchor's label. bank = -1 means no bank.
int info_nce_class_aware(Graph& g, int z1, int z2, const std::vector<int>& labels, int bank, double tau);

// ce + alpha(t) * ssl
int pretrain_loss(Graph& g, int ce, int ssl, int t, const Schedule& sched);

// -[ mean log(rho_v) + mean log(clamp(d_u - rho_u, eps, 1)) ]; minimized by the
// domain classifier's optimizer (the underlying objective is a max).
int discriminator_loss(Graph& g, int rho_v, int rho_u, double d_u);

// mean log(clamp(d_u - rho_u, eps, 1)); minimized w.r.t. the mapping layer,
// driving pseudo-unseen scores upward toward d_u.
int generator_loss(Graph& g, int rho_u, double d_u);

}  // namespace cdfsl
