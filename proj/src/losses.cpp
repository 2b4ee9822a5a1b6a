#include "cdfsl/losses.hpp"

#include <stdexcept>

#include "cdfsl/tensor.hpp"

namespace cdfsl {

double alpha(int t, const Schedule& sched) {
    if (sched.total_epochs < 1) throw std::invalid_argument("alpha: T must be >= 1");
    if (sched.kappa < 0.0) throw std::invalid_argument("alpha: kappa must be >= 0");
    if (t < 0 || t > sched.total_epochs) throw std::invalid_argument("alpha: t outside [0, T]");
    return sched.kappa * static_cast<double>(t) / sched.total_epochs;
}

int cross_entropy(Graph& g, int logits, const std::vector<int>& labels) {
    const Tensor& L = g.value(logits);
    int n = L.rows(), c = L.cols();
    if (static_cast<int>(labels.size()) != n)
        throw GraphError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    Tensor onehot = Tensor::zeros({n, c});
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= c)
            throw GraphError("cross_entropy: label " + std::to_string(labels[i]) + " out of range [0, " +
                             std::to_string(c) + ")");
        onehot.at(i, labels[i]) = 1.0;
    }
    int picked = g.sum(g.mul(g.log_softmax(logits), g.constant(std::move(onehot))));
    return g.scalar_mul(picked, -1.0 / n);
}

int info_nce(Graph& g, int z1, int z2, double tau) {
    const Tensor& A = g.value(z1);
    const Tensor& B = g.value(z2);
    if (!A.same_shape(B)) throw GraphError("info_nce: views " + A.shape_str() + " vs " + B.shape_str());
    int n = A.rows();
    if (n < 2) throw GraphError("info_nce: need at least 2 samples for negatives");
    if (tau <= 0.0) throw GraphError("info_nce: temperature must be positive");

    int sims = g.scalar_mul(g.matmul(z1, g.transpose(z2)), 1.0 / tau);
    Tensor eye = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) eye.at(i, i) = 1.0;
    int pos = g.sum(g.mul(sims, g.constant(std::move(eye))));
    int lse = g.sum(g.log(g.matmul(g.exp(sims), g.constant(Tensor::full({n, 1}, 1.0)))));
    return g.scalar_mul(g.sub(lse, pos), 1.0 / n);
}

int info_nce_class_aware(Graph& g, int z1, int z2, const std::vector<int>& labels, int bank, double tau) {
    const Tensor& A = g.value(z1);
    const Tensor& B = g.value(z2);
    if (!A.same_shape(B)) throw GraphError("info_nce_class_aware: views " + A.shape_str() + " vs " + B.shape_str());
    int n = A.rows();
    if (static_cast<int>(labels.size()) != n) throw GraphError("info_nce_class_aware: label count mismatch");
    if (n < 2 && bank < 0) throw GraphError("info_nce_class_aware: need at least 2 samples for negatives");
    if (tau <= 0.0) throw GraphError("info_nce_class_aware: temperature must be positive");

    int m = bank >= 0 ? g.value(bank).rows() : 0;
    int candidates = bank >= 0 ? g.concat_rows(z2, bank) : z2;
    int sims = g.scalar_mul(g.matmul(z1, g.transpose(candidates)), 1.0 / tau);

    // keep the anchor's own positive, drop every other same-label batch row;
    // bank rows hold classes absent from the batch and are always kept
    Tensor mask = Tensor::zeros({n, n + m});
    for (int i = 0; i < n; ++i) {
        int negatives = m;
        for (int k = 0; k < n; ++k) {
            if (k == i) {
                mask.at(i, k) = 1.0;
            } else if (labels[k] != labels[i]) {
                mask.at(i, k) = 1.0;
                ++negatives;
            }
        }
        for (int k = 0; k < m; ++k) mask.at(i, n + k) = 1.0;
        if (negatives == 0)
            throw GraphError("info_nce_class_aware: anchor " + std::to_string(i) + " has no negatives after exclusion");
    }

    int masked = g.mul(g.exp(sims), g.constant(std::move(mask)));
    int lse = g.sum(g.log(g.matmul(masked, g.constant(Tensor::full({n + m, 1}, 1.0)))));
    Tensor eye = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) eye.at(i, i) = 1.0;
    int pos = g.sum(g.mul(g.scalar_mul(g.matmul(z1, g.transpose(z2)), 1.0 / tau), g.constant(std::move(eye))));
    return g.scalar_mul(g.sub(lse, pos), 1.0 / n);
}

int pretrain_loss(Graph& g, int ce, int ssl, int t, const Schedule& sched) {
    return g.add(ce, g.scalar_mul(ssl, alpha(t, sched)));
}

namespace {

int clamped_log_gap(Graph& g, int rho_u, double d_u) {
    const Tensor& R = g.value(rho_u);
    int gap = g.sub(g.constant(Tensor::full(R.shape, d_u)), rho_u);
    return g.log(g.clamp(gap, kLogEps, 1.0));
}

}  // namespace

int discriminator_loss(Graph& g, int rho_v, int rho_u, double d_u) {
    if (d_u <= 0.0 || d_u > 1.0) throw GraphError("discriminator_loss: d_u outside (0, 1]");
    int t1 = g.mean(g.log(rho_v));
    int t2 = g.mean(clamped_log_gap(g, rho_u, d_u));
    return g.scalar_mul(g.add(t1, t2), -1.0);
}

int generator_loss(Graph& g, int rho_u, double d_u) {
    if (d_u <= 0.0 || d_u > 1.0) throw GraphError("generator_loss: d_u outside (0, 1]");
    return g.mean(clamped_log_gap(g, rho_u, d_u));
}

}  // namespace cdfsl
