#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cdfsl/nets.hpp"
#include "cdfsl/rng.hpp"

using namespace cdfsl;

TEST_CASE("xavier_uniform bounds and determinism") {
    Tensor w = xavier_uniform(8, 4, 42);
    CHECK(w.rows() == 8);
    CHECK(w.cols() == 4);
    double a = std::sqrt(6.0 / (8 + 4));
    for (double v : w.values) {
        CHECK(v >= -a);
        CHECK(v <= a);
    }
    CHECK(xavier_uniform(8, 4, 42).values == w.values);
    CHECK(xavier_uniform(8, 4, 43).values != w.values);
}

TEST_CASE("init shapes match the architecture") {
    ModelConfig cfg;
    Model m = init_model(cfg, 64, 1);
    REQUIRE(m.encoder.layers.size() == 3);
    CHECK(m.encoder.in_dim() == cfg.in_dim);
    CHECK(m.encoder.out_dim() == cfg.feat_dim);
    CHECK(m.mapper.in_dim() == cfg.feat_dim);
    CHECK(m.mapper.out_dim() == cfg.feat_dim);
    CHECK(m.domain_clf.in_dim() == cfg.feat_dim);
    CHECK(m.domain_clf.out_dim() == 1);
    CHECK(m.classifier.w.rows() == cfg.feat_dim);
    CHECK(m.classifier.w.cols() == 64);

    // subnetworks draw from independent streams
    CHECK(m.encoder.layers[0].w.values != init_model(cfg, 64, 2).encoder.layers[0].w.values);
}

TEST_CASE("linear_forward is x*W + b") {
    Linear lin;
    lin.w = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
    lin.b = Tensor::row({0.5, -0.5});
    Tensor out = eval_linear(lin, Tensor::matrix(1, 2, {1.0, 1.0}));
    CHECK(out.values == std::vector<double>({4.5, 5.5}));
}

TEST_CASE("mlp_forward applies relu between layers but not after the last") {
    Mlp mlp;
    Linear l1;
    l1.w = Tensor::matrix(1, 1, {-1.0});
    l1.b = Tensor::row({0.0});
    Linear l2;
    l2.w = Tensor::matrix(1, 1, {1.0});
    l2.b = Tensor::row({-3.0});
    mlp.layers = {l1, l2};
    // x=1: layer1 gives -1, relu 0, layer2 gives -3 (negative survives the last layer)
    Tensor out = eval_mlp(mlp, Tensor::matrix(1, 1, {1.0}));
    CHECK(out.values[0] == -3.0);
}

TEST_CASE("encode produces unit-norm rows") {
    ModelConfig cfg;
    Model m = init_model(cfg, 8, 3);
    Rng rng(5);
    Tensor x = Tensor::zeros({6, cfg.in_dim});
    for (auto& v : x.values) v = rng.normal();
    Tensor z = eval_encode(m.encoder, x);
    for (int r = 0; r < z.rows(); ++r) {
        double n2 = 0.0;
        for (int c = 0; c < z.cols(); ++c) n2 += z.at(r, c) * z.at(r, c);
        CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("difficulty scores are strictly inside (0,1) with shape [n x 1]") {
    ModelConfig cfg;
    Model m = init_model(cfg, 8, 4);
    Rng rng(6);
    Tensor z = Tensor::zeros({5, cfg.feat_dim});
    for (auto& v : z.values) v = rng.normal();
    Tensor rho = eval_difficulty(m.domain_clf, m.mapper, z);
    CHECK(rho.rows() == 5);
    CHECK(rho.cols() == 1);
    for (double v : rho.values) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("fuse computes normalize(z + rho * mapped) rowwise") {
    Graph g;
    int z = g.input(Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
    int m = g.input(Tensor::matrix(2, 2, {10.0, 10.0, 10.0, 10.0}));
    int rho = g.input(Tensor::matrix(2, 1, {0.5, 0.1}));
    const Tensor& c = g.value(fuse(g, z, rho, m));
    // pre-normalization rows: {6, 7} and {4, 5}
    double n0 = std::sqrt(36.0 + 49.0), n1 = std::sqrt(16.0 + 25.0);
    CHECK(c.at(0, 0) == doctest::Approx(6.0 / n0).epsilon(1e-12));
    CHECK(c.at(0, 1) == doctest::Approx(7.0 / n0).epsilon(1e-12));
    CHECK(c.at(1, 0) == doctest::Approx(4.0 / n1).epsilon(1e-12));
    CHECK(c.at(1, 1) == doctest::Approx(5.0 / n1).epsilon(1e-12));
}

TEST_CASE("model params round trip through the flat view and disk") {
    ModelConfig cfg;
    Model m = init_model(cfg, 16, 9);
    ParamSet p = model_to_params(m);
    Model m2 = model_from_params(p);
    CHECK(model_to_params(m2) == p);

    auto dir = std::filesystem::temp_directory_path() / "cdfsl_nets_test";
    std::filesystem::create_directories(dir);
    save_params(p, dir / "ckpt");
    ParamSet q = load_params(dir / "ckpt");
    CHECK(q == p);  // bit-exact through the binary blob
    std::filesystem::remove_all(dir);
}

TEST_CASE("frozen attachment blocks gradients") {
    ModelConfig cfg;
    Model m = init_model(cfg, 8, 10);
    Rng rng(7);
    Tensor x = Tensor::zeros({4, cfg.in_dim});
    for (auto& v : x.values) v = rng.normal();

    Graph g;
    AttachedMlp enc = attach_frozen(g, m.encoder);
    int z = encode(g, enc, g.constant(x));
    GradientMap grads = g.backward(g.mean(z));
    for (const auto& layer : enc.layers) {
        CHECK(grads.count(layer.w) == 0);
        CHECK(grads.count(layer.b) == 0);
    }
}
