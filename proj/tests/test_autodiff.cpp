#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cdfsl/graph.hpp"
#include "cdfsl/params.hpp"
#include "cdfsl/rng.hpp"

using namespace cdfsl;

namespace {

// finite-difference check for a closure over a single named matrix
double check_unary(int rows, int cols, std::uint64_t seed,
                   const std::function<int(Graph&, int)>& build) {
    ParamSet p;
    Tensor t = Tensor::zeros({rows, cols});
    Rng rng(seed);
    for (auto& v : t.values) v = rng.uniform(-1.0, 1.0);
    p.add("x", t);
    auto closure = [&build](const ParamSet& ps) {
        Graph g;
        int x = g.input(ps.get("x"));
        int loss = build(g, x);
        GradientMap grads = g.backward(loss);
        LossEval ev;
        ev.value = g.value(loss).values[0];
        if (auto it = grads.find(x); it != grads.end()) ev.grads["x"] = it->second;
        return ev;
    };
    return fd_check(closure, p, 1e-5);
}

}  // namespace

TEST_CASE("forward values match hand-computed results") {
    Graph g;
    int a = g.input(Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
    int b = g.input(Tensor::matrix(2, 2, {0.5, -1.0, 2.0, 0.0}));

    CHECK(g.value(g.matmul(a, b)).values == std::vector<double>({4.5, -1.0, 9.5, -3.0}));
    CHECK(g.value(g.transpose(a)).values == std::vector<double>({1.0, 3.0, 2.0, 4.0}));
    CHECK(g.value(g.add(a, b)).values == std::vector<double>({1.5, 1.0, 5.0, 4.0}));
    CHECK(g.value(g.sub(a, b)).values == std::vector<double>({0.5, 3.0, 1.0, 4.0}));
    CHECK(g.value(g.mul(a, b)).values == std::vector<double>({0.5, -2.0, 6.0, 0.0}));
    CHECK(g.value(g.scalar_mul(a, -2.0)).values == std::vector<double>({-2.0, -4.0, -6.0, -8.0}));
    CHECK(g.value(g.relu(b)).values == std::vector<double>({0.5, 0.0, 2.0, 0.0}));
    CHECK(g.value(g.mean(a)).values == std::vector<double>({2.5}));
    CHECK(g.value(g.sum(a)).values == std::vector<double>({10.0}));
    CHECK(g.value(g.clamp(a, 1.5, 3.5)).values == std::vector<double>({1.5, 2.0, 3.0, 3.5}));

    int s = g.sigmoid(g.input(Tensor::row({0.0, 2.0})));
    CHECK(g.value(s).values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.value(s).values[1] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
}

TEST_CASE("row bias broadcast add") {
    Graph g;
    int x = g.input(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    int b = g.input(Tensor::row({10, 20, 30}));
    CHECK(g.value(g.add(x, b)).values == std::vector<double>({11, 22, 33, 14, 25, 36}));

    // bias gradient is the column sum of the upstream gradient
    int loss = g.sum(g.add(x, b));
    GradientMap grads = g.backward(loss);
    CHECK(grads.at(b).values == std::vector<double>({2.0, 2.0, 2.0}));
}

TEST_CASE("log floors its argument at kLogEps") {
    Graph g;
    int x = g.input(Tensor::row({0.0, 1.0}));
    int l = g.log(x);
    CHECK(g.value(l).values[0] == std::log(kLogEps));
    CHECK(g.value(l).values[1] == 0.0);

    GradientMap grads = g.backward(g.sum(l));
    CHECK(grads.at(x).values[0] == 0.0);  // floored region carries no gradient
    CHECK(grads.at(x).values[1] == 1.0);
}

TEST_CASE("clamp gradient is zero outside the interval") {
    Graph g;
    int x = g.input(Tensor::row({-2.0, 0.5, 3.0}));
    GradientMap grads = g.backward(g.sum(g.clamp(x, 0.0, 1.0)));
    CHECK(grads.at(x).values == std::vector<double>({0.0, 1.0, 0.0}));
}

TEST_CASE("log_softmax rows sum to one after exponentiation") {
    Graph g;
    int x = g.input(Tensor::matrix(2, 3, {1.0, 2.0, 3.0, -1.0, 0.0, 5.0}));
    const Tensor& y = g.value(g.log_softmax(x));
    for (int r = 0; r < 2; ++r) {
        double total = 0.0;
        for (int c = 0; c < 3; ++c) total += std::exp(y.at(r, c));
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("l2_normalize rows have unit norm and zero rows pass through") {
    Graph g;
    int x = g.input(Tensor::matrix(2, 2, {3.0, 4.0, 0.0, 0.0}));
    const Tensor& y = g.value(g.l2_normalize(x));
    CHECK(y.values == std::vector<double>({0.6, 0.8, 0.0, 0.0}));

    GradientMap grads = g.backward(g.sum(g.l2_normalize(x)));
    CHECK(std::isfinite(grads.at(x).values[2]));
}

TEST_CASE("grad_reverse is identity forward and negated scaled backward") {
    Graph g;
    int x = g.input(Tensor::row({1.0, -2.0}));
    int y = g.grad_reverse(x, 0.5);
    CHECK(g.value(y).values == std::vector<double>({1.0, -2.0}));
    GradientMap grads = g.backward(g.sum(y));
    CHECK(grads.at(x).values == std::vector<double>({-0.5, -0.5}));
}

TEST_CASE("constants receive no gradient") {
    Graph g;
    int x = g.input(Tensor::row({2.0}));
    int c = g.constant(Tensor::row({3.0}));
    GradientMap grads = g.backward(g.sum(g.mul(x, c)));
    CHECK(grads.count(x) == 1);
    CHECK(grads.count(c) == 0);
    CHECK(grads.at(x).values[0] == 3.0);
}

TEST_CASE("shape mismatches raise GraphError") {
    Graph g;
    int a = g.input(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    int b = g.input(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    CHECK_THROWS_AS(g.matmul(a, b), GraphError);
    CHECK_THROWS_AS(g.mul(a, b), GraphError);
    CHECK_THROWS_AS(g.concat_rows(a, b), GraphError);
}

TEST_CASE("finite differences agree with analytic gradients per op") {
    CHECK(check_unary(3, 4, 1, [](Graph& g, int x) { return g.mean(g.relu(x)); }) < 1e-4);
    CHECK(check_unary(3, 4, 2, [](Graph& g, int x) { return g.mean(g.sigmoid(x)); }) < 1e-4);
    CHECK(check_unary(3, 4, 3, [](Graph& g, int x) { return g.mean(g.exp(x)); }) < 1e-4);
    CHECK(check_unary(3, 4, 4, [](Graph& g, int x) {
              return g.mean(g.log(g.add(g.mul(x, x), g.constant(Tensor::full({3, 4}, 0.5)))));
          }) < 1e-4);
    CHECK(check_unary(3, 4, 5, [](Graph& g, int x) { return g.mean(g.log_softmax(x)); }) < 1e-4);
    CHECK(check_unary(3, 4, 6, [](Graph& g, int x) { return g.mean(g.l2_normalize(x)); }) < 1e-4);
    CHECK(check_unary(3, 4, 7, [](Graph& g, int x) { return g.sum(g.transpose(x)); }) < 1e-4);
    CHECK(check_unary(3, 4, 8, [](Graph& g, int x) {
              return g.mean(g.concat_rows(x, g.scalar_mul(x, 2.0)));
          }) < 1e-4);
    CHECK(check_unary(3, 4, 9, [](Graph& g, int x) { return g.mean(g.clamp(x, -0.5, 0.5)); }) < 1e-4);
    CHECK(check_unary(3, 4, 10, [](Graph& g, int x) {
              int y = g.matmul(x, g.transpose(x));
              return g.mean(g.sub(y, g.scalar_mul(y, 0.25)));
          }) < 1e-4);
}

TEST_CASE("fd_check on a two-layer composite across many seeds") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ParamSet p;
        p.add("w1", xavier_uniform(4, 5, derive_seed(seed, "w1", 0)));
        p.add("b1", Tensor::zeros({1, 5}));
        p.add("w2", xavier_uniform(5, 3, derive_seed(seed, "w2", 0)));
        Tensor xin = Tensor::zeros({6, 4});
        Rng rng(derive_seed(seed, "x", 0));
        for (auto& v : xin.values) v = rng.normal();
        auto closure = [&xin](const ParamSet& ps) {
            Graph g;
            int w1 = g.input(ps.get("w1"));
            int b1 = g.input(ps.get("b1"));
            int w2 = g.input(ps.get("w2"));
            int x = g.constant(xin);
            int h = g.relu(g.add(g.matmul(x, w1), b1));
            int out = g.l2_normalize(g.matmul(h, w2));
            int loss = g.mean(g.log_softmax(out));
            GradientMap grads = g.backward(loss);
            LossEval ev;
            ev.value = g.value(loss).values[0];
            for (const auto& [name, id] : {std::pair<const char*, int>{"w1", w1}, {"b1", b1}, {"w2", w2}})
                if (auto it = grads.find(id); it != grads.end()) ev.grads[name] = it->second;
            return ev;
        };
        CHECK(fd_check(closure, p, 1e-5) < 1e-4);
    }
}
