#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "cdfsl/domains.hpp"
#include "cdfsl/rng.hpp"

using namespace cdfsl;

namespace {

// exhaustive assignment oracle, feasible up to n = 6
double brute_force_emd(const Tensor& a, const Tensor& b) {
    int n = a.rows();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double d2 = 0.0;
            for (int c = 0; c < a.cols(); ++c) {
                double d = a.at(i, c) - b.at(perm[i], c);
                d2 += d * d;
            }
            total += std::sqrt(d2);
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / n;
}

Tensor random_points(int n, int d, std::uint64_t seed) {
    Tensor t = Tensor::zeros({n, d});
    Rng rng(seed);
    for (auto& v : t.values) v = rng.uniform(-2.0, 2.0);
    return t;
}

}  // namespace

TEST_CASE("rotation matrices are orthogonal and reduce to identity at zero") {
    Tensor r0 = rotation_matrix(4, 0.0);
    CHECK(r0.values == identity_matrix(4).values);

    Tensor r = rotation_matrix(6, 37.0);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 6; ++k) dot += r.at(k, i) * r.at(k, j);
            CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
}

TEST_CASE("rotation by 90 degrees in 2d maps e1 to e2") {
    Tensor r = rotation_matrix(2, 90.0);
    // row vector convention: x' = x R
    double x0 = 1.0 * r.at(0, 0);
    double x1 = 1.0 * r.at(0, 1);
    CHECK(std::abs(std::abs(x1) - 1.0) < 1e-12);
    CHECK(std::abs(x0) < 1e-12);
}

TEST_CASE("random_basis is orthonormal and deterministic") {
    Tensor b = random_basis(8, 3, 41);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 8; ++k) dot += b.at(k, i) * b.at(k, j);
            CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
    Tensor again = random_basis(8, 3, 41);
    CHECK(b.values == again.values);
    CHECK_THROWS_AS(random_basis(4, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(random_basis(4, 0, 1), std::invalid_argument);
}

TEST_CASE("subspace prototypes lie in the basis span with matched scale") {
    int dim = 10, rank = 4, classes = 40;
    Tensor b = random_basis(dim, rank, 43);
    Tensor p = subspace_prototypes(classes, b, 1.0, 44);
    REQUIRE(p.rows() == classes);
    REQUIRE(p.cols() == dim);
    // residual after projecting each prototype onto span(b) is zero
    for (int c = 0; c < classes; ++c) {
        std::vector<double> proj(dim, 0.0);
        for (int k = 0; k < rank; ++k) {
            double coef = 0.0;
            for (int i = 0; i < dim; ++i) coef += p.at(c, i) * b.at(i, k);
            for (int i = 0; i < dim; ++i) proj[i] += coef * b.at(i, k);
        }
        for (int i = 0; i < dim; ++i) CHECK(p.at(c, i) == doctest::Approx(proj[i]).epsilon(1e-10));
    }
    // mean squared norm tracks proto_scale^2 * dim like a full-rank draw
    double ms = 0.0;
    for (double v : p.values) ms += v * v;
    ms /= classes;
    CHECK(ms > 0.5 * dim);
    CHECK(ms < 2.0 * dim);
}

TEST_CASE("synth_dataset is deterministic with balanced labels and offset applied") {
    DomainSpec spec;
    spec.prototypes = random_points(4, 3, 11);
    spec.sigma_class = 0.2;
    spec.rotation = identity_matrix(3);
    spec.scale = {1.0, 1.0, 1.0};
    spec.shift = {0.0, 0.0, 0.0};
    spec.label_offset = 10;

    SampleTable t1 = synth_dataset(spec, 5, 21);
    SampleTable t2 = synth_dataset(spec, 5, 21);
    CHECK(t1.x.values == t2.x.values);
    CHECK(t1.labels == t2.labels);
    CHECK(t1.x.rows() == 20);
    std::map<int, int> counts;
    for (int y : t1.labels) counts[y]++;
    CHECK(counts.size() == 4);
    for (const auto& [y, n] : counts) {
        CHECK(y >= 10);
        CHECK(y < 14);
        CHECK(n == 5);
    }
    CHECK(synth_dataset(spec, 5, 22).x.values != t1.x.values);
}

TEST_CASE("affine transform moves the sample cloud as specified") {
    DomainSpec spec;
    spec.prototypes = Tensor::matrix(1, 2, {1.0, 0.0});
    spec.sigma_class = 0.0;
    spec.rotation = rotation_matrix(2, 90.0);
    spec.scale = {2.0, 3.0};
    spec.shift = {0.5, -0.5};
    SampleTable t = synth_dataset(spec, 1, 1);
    // (1,0) rotated 90 deg then scaled and shifted
    CHECK(std::abs(t.x.at(0, 0) - 0.5) < 1e-12);
    CHECK(std::abs(std::abs(t.x.at(0, 1) + 0.5) - 3.0) < 1e-12);
}

TEST_CASE("domain_stats matches hand computation") {
    Tensor x = Tensor::matrix(4, 2, {1.0, 10.0, 2.0, 10.0, 3.0, 10.0, 4.0, 10.0});
    DomainStats st = domain_stats(x);
    CHECK(st.mu[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(st.mu[1] == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(st.sigma[0] == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));  // population variance
    CHECK(st.sigma[1] == 0.0);
}

TEST_CASE("pseudo-unseen mixing: identity at lambda=1 and exact interpolation form") {
    Tensor x = random_points(8, 3, 31);
    DomainStats st{{0.1, -0.2, 0.3}, {1.0, 0.5, 2.0}};

    Tensor same = make_pseudo_unseen(x, 1.0, st, 77);
    CHECK(same.values == x.values);  // bit-exact, no noise drawn

    // same seed, two lambdas: the same eps draw underlies both, so we can solve for it
    Tensor u1 = make_pseudo_unseen(x, 0.4, st, 55);
    Tensor u2 = make_pseudo_unseen(x, 0.6, st, 55);
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        double eps1 = (u1.values[i] - 0.4 * x.values[i]) / 0.6;
        double eps2 = (u2.values[i] - 0.6 * x.values[i]) / 0.4;
        CHECK(eps1 == doctest::Approx(eps2).epsilon(1e-9));
    }
    CHECK(make_pseudo_unseen(x, 0.4, st, 55).values == u1.values);
}

TEST_CASE("mixing noise follows the domain statistics") {
    const int n = 10000;
    Tensor x = Tensor::zeros({n, 2});
    DomainStats st{{1.5, -2.0}, {0.5, 2.0}};
    Tensor u = make_pseudo_unseen(x, 0.0, st, 13);  // pure noise
    for (int c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (int r = 0; r < n; ++r) mean += u.at(r, c);
        mean /= n;
        double var = 0.0;
        for (int r = 0; r < n; ++r) var += (u.at(r, c) - mean) * (u.at(r, c) - mean);
        var /= n;
        CHECK(mean == doctest::Approx(st.mu[c]).epsilon(0.05));
        CHECK(std::sqrt(var) == doctest::Approx(st.sigma[c]).epsilon(0.05));
    }
}

TEST_CASE("episodes are well formed and support/query disjoint") {
    DomainSpec spec;
    spec.prototypes = random_points(8, 4, 41);
    spec.sigma_class = 0.3;
    spec.rotation = identity_matrix(4);
    spec.scale = {1, 1, 1, 1};
    spec.shift = {0, 0, 0, 0};
    SampleTable table = synth_dataset(spec, 12, 3);

    Episode ep = sample_episode(table, 5, 2, 4, 91);
    CHECK(ep.support_x.rows() == 10);
    CHECK(ep.query_x.rows() == 20);
    std::set<int> sy(ep.support_y.begin(), ep.support_y.end());
    std::set<int> qy(ep.query_y.begin(), ep.query_y.end());
    CHECK(sy == std::set<int>({0, 1, 2, 3, 4}));
    CHECK(qy == sy);

    // rows drawn for support never reappear in query
    std::set<std::vector<double>> support_rows;
    for (int r = 0; r < ep.support_x.rows(); ++r) {
        std::vector<double> row(ep.support_x.values.begin() + r * 4,
                                ep.support_x.values.begin() + (r + 1) * 4);
        support_rows.insert(row);
    }
    for (int r = 0; r < ep.query_x.rows(); ++r) {
        std::vector<double> row(ep.query_x.values.begin() + r * 4,
                                ep.query_x.values.begin() + (r + 1) * 4);
        CHECK(support_rows.count(row) == 0);
    }

    Episode ep2 = sample_episode(table, 5, 2, 4, 91);
    CHECK(ep2.support_x.values == ep.support_x.values);
    CHECK(ep2.query_y == ep.query_y);
}

TEST_CASE("episode sampling rejects impossible requests") {
    DomainSpec spec;
    spec.prototypes = random_points(3, 2, 51);
    spec.sigma_class = 0.1;
    spec.rotation = identity_matrix(2);
    spec.scale = {1, 1};
    spec.shift = {0, 0};
    SampleTable table = synth_dataset(spec, 4, 5);
    CHECK_THROWS(sample_episode(table, 5, 1, 1, 1));   // more ways than classes
    CHECK_THROWS(sample_episode(table, 3, 3, 3, 1));   // shot+query exceeds per-class rows
}

TEST_CASE("emd matches the exhaustive oracle on random instances") {
    Rng meta(123);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + static_cast<int>(meta.uniform_int(5));  // 2..6
        int d = 1 + static_cast<int>(meta.uniform_int(3));
        Tensor a = random_points(n, d, meta.next_u64());
        Tensor b = random_points(n, d, meta.next_u64());
        CHECK(std::abs(emd(a, b) - brute_force_emd(a, b)) < 1e-9);
    }
}

TEST_CASE("emd basic properties") {
    Tensor a = random_points(10, 3, 61);
    CHECK(emd(a, a) == doctest::Approx(0.0).epsilon(1e-12));

    Tensor b = a;
    for (int r = 0; r < b.rows(); ++r) b.at(r, 0) += 3.0;  // rigid shift by 3
    CHECK(emd(a, b) == doctest::Approx(3.0).epsilon(1e-9));

    Tensor c = random_points(10, 3, 62);
    CHECK(emd(a, c) == doctest::Approx(emd(c, a)).epsilon(1e-9));
}

TEST_CASE("emd enforces its size contract") {
    Tensor a = random_points(10, 2, 71);
    Tensor b = random_points(10, 2, 72);
    CHECK_THROWS(emd(a, b, 8));  // cap exceeded
    CHECK_THROWS(emd(a, random_points(9, 2, 73)));
    CHECK_THROWS(emd(a, random_points(10, 3, 74)));
    CHECK(emd(a, b, 10) == emd(a, b, 10));
}

TEST_CASE("sample table csv round trip is bit-exact") {
    DomainSpec spec;
    spec.prototypes = random_points(3, 4, 81);
    spec.sigma_class = 0.25;
    spec.rotation = rotation_matrix(4, 15.0);
    spec.scale = {1.0, 0.9, 1.1, 1.0};
    spec.shift = {0.1, 0.0, -0.1, 0.2};
    SampleTable t = synth_dataset(spec, 6, 7);

    auto dir = std::filesystem::temp_directory_path() / "cdfsl_domains_test";
    std::filesystem::create_directories(dir);
    save_table_csv(t, dir / "table.csv");
    SampleTable u = load_table_csv(dir / "table.csv");
    CHECK(u.x.values == t.x.values);
    CHECK(u.labels == t.labels);
    CHECK(u.num_classes == t.num_classes);
    std::filesystem::remove_all(dir);
}
