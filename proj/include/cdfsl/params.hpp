#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdfsl/graph.hpp"
#include "cdfsl/tensor.hpp"

namespace cdfsl {

// Ordered, named collection of trainable tensors for one or more networks.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    void add(std::string name, Tensor t);
    const Tensor& get(const std::string& name) const;
    Tensor& get(const std::string& name);
    bool has(const std::string& name) const;

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }
    std::size_t size() const { return entries_.size(); }

    bool operator==(const ParamSet& o) const;

private:
    std::vector<Entry> entries_;
};

// Glorot-uniform weight matrix: entries uniform in [-a, a], a = sqrt(6/(fan_in+fan_out)).
Tensor xavier_uniform(int fan_in, int fan_out, std::uint64_t seed);

// JSON manifest (names, shapes) at <stem>.json plus a little-endian blob of
// 64-bit reals at <stem>.bin, in entry order. Loading validates shapes.
void save_params(const ParamSet& params, const std::filesystem::path& stem);
ParamSet load_params(const std::filesystem::path& stem);

// Closure mapping a ParamSet to a scalar loss with analytic gradients.
using LossClosure = std::function<LossEval(const ParamSet&)>;

// Max over parameter elements of |analytic - central difference| / (|central difference| + 1e-8).
// Zero-parameter closures yield 0. Throws GraphError if an evaluation goes non-finite,
// naming the parameter being probed.
double fd_check(const LossClosure& closure, const ParamSet& params, double step);

}  // namespace cdfsl
