#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cdfsl/tensor.hpp"

namespace cdfsl {

// Generative description of a synthetic domain: per-class prototypes plus an
// affine transform x -> scale ⊙ (R x) + shift applied after class noise.
struct DomainSpec {
    Tensor prototypes;  // [C x in_dim]
    double sigma_class = 0.1;
    Tensor rotation;            // [in_dim x in_dim], orthogonal (or permutation)
    std::vector<double> scale;  // diagonal, length in_dim
    std::vector<double> shift;  // length in_dim
    int label_offset = 0;

    int num_classes() const { return prototypes.rows(); }
    int in_dim() const { return prototypes.cols(); }
};

struct DomainStats {
    std::vector<double> mu;
    std::vector<double> sigma;  // population standard deviation, entries >= 0
};

struct SampleTable {
    Tensor x;  // [n x in_dim]
    std::vector<int> labels;
    int num_classes = 0;
};

// One N-way K-shot task; labels are episode-local in [0, N).
struct Episode {
    Tensor support_x;
    std::vector<int> support_y;
    Tensor query_x;
    std::vector<int> query_y;
    int way = 0, shot = 0, query_per_class = 0;
};

Tensor identity_matrix(int n);
// Product of Givens rotations over consecutive dimension pairs, all by `angle_deg`.
Tensor rotation_matrix(int dim, double angle_deg);
// Random Gaussian prototypes scaled to `proto_scale`, deterministic in seed.
Tensor random_prototypes(int num_classes, int dim, double proto_scale, std::uint64_t seed);

// Orthonormal basis [dim x rank] from Gram-Schmidt over seeded Gaussian draws.
Tensor random_basis(int dim, int rank, std::uint64_t seed);

// Prototypes confined to span(basis); coordinates are scaled by
// proto_scale * sqrt(dim / rank) so expected norms match full-rank draws.
Tensor subspace_prototypes(int num_classes, const Tensor& basis, double proto_scale,
                           std::uint64_t seed);

// Each sample = transform(prototype_c + sigma_class * g), g standard normal.
SampleTable synth_dataset(const DomainSpec& spec, int per_class, std::uint64_t seed);

// Per-dimension mean and population standard deviation; requires >= 2 samples.
DomainStats domain_stats(const Tensor& samples);

// x_u = lambda * x_v + (1 - lambda) * eps, eps elementwise ~ N(mu_j, sigma_j^2).
Tensor make_pseudo_unseen(const Tensor& x_v, double lambda, const DomainStats& stats, std::uint64_t seed);

// Classes without replacement, within-class rows without replacement, support
// and query disjoint.
Episode sample_episode(const SampleTable& table, int way, int shot, int query_per_class, std::uint64_t seed);

// Exact earth mover's distance between equal-mass point sets: minimum-cost
// perfect matching under Euclidean ground distance, divided by |A|.
double emd(const Tensor& a, const Tensor& b, int size_cap = 64);

// Exact min-cost assignment over a square cost matrix (Jonker-Volgenant style
// shortest augmenting paths). Exposed for the EMD test oracle.
double solve_assignment(const std::vector<std::vector<double>>& cost);

// Columnar CSV round-trip; header: class,x0..x{D-1}.
void save_table_csv(const SampleTable& table, const std::filesystem::path& path);
SampleTable load_table_csv(const std::filesystem::path& path);

}  // namespace cdfsl
