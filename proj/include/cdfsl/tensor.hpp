#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cdfsl {

// Dense row-major tensor of 64-bit reals. Effectively 2-D everywhere in this
// project; scalars are shape {1} and row vectors shape {1, d}.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> v);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    static Tensor row(std::vector<double> v);
    static Tensor matrix(int rows, int cols, std::vector<double> v);

    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    int size() const { return static_cast<int>(values.size()); }

    double& at(int r, int c) { return values[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;

    std::string shape_str() const;
};

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace cdfsl
