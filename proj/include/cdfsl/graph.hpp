#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdfsl/tensor.hpp"

namespace cdfsl {

// Thrown on shape mismatches and contract violations in graph construction.
struct GraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Op {
    Input,
    Constant,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    ScalarMul,
    Relu,
    Sigmoid,
    Exp,
    Log,
    Mean,
    Sum,
    LogSoftmax,
    L2Normalize,
    ConcatRows,
    Clamp,
    GradReverse,
};

// Floor applied to every log argument; log(x) is computed as log(max(x, kLogEps)).
inline constexpr double kLogEps = 1e-7;

struct GraphNode {
    Op op;
    std::vector<int> inputs;
    Tensor value;
    double a = 0.0;  // scalar multiplier / clamp lo / grad_reverse scale
    double b = 0.0;  // clamp hi
};

// node id -> gradient tensor; nodes unreachable from the loss are absent.
using GradientMap = std::unordered_map<int, Tensor>;

// Eager single-use tape. Values are computed at insertion; backward walks the
// tape in reverse insertion order. Confined to one thread.
class Graph {
public:
    int input(Tensor t);     // differentiable leaf
    int constant(Tensor t);  // non-differentiable leaf

    int matmul(int a, int b);
    int transpose(int a);
    int add(int a, int b);  // equal shapes, or [n x d] + [1 x d] row bias
    int sub(int a, int b);
    int mul(int a, int b);  // elementwise, equal shapes
    int scalar_mul(int a, double s);
    int relu(int a);
    int sigmoid(int a);
    int exp(int a);
    int log(int a);  // argument floored at kLogEps
    int mean(int a);  // full reduction to shape {1}
    int sum(int a);   // full reduction to shape {1}
    int log_softmax(int a);   // row-wise
    int l2_normalize(int a);  // row-wise; zero rows pass through unchanged
    int concat_rows(int a, int b);
    int clamp(int a, double lo, double hi);
    int grad_reverse(int a, double scale);  // identity forward, -scale * g backward

    const Tensor& value(int id) const { return nodes_[id].value; }
    const GraphNode& node(int id) const { return nodes_[id]; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    // Reverse accumulation from a scalar loss node (shape {1}).
    GradientMap backward(int loss_node) const;

private:
    int push(GraphNode n);
    void check_id(int id) const;
    std::vector<GraphNode> nodes_;
};

// Result of evaluating a differentiable closure: loss value plus per-parameter
// gradients keyed by parameter name (missing name == zero gradient).
struct LossEval {
    double value = 0.0;
    std::map<std::string, Tensor> grads;
};

}  // namespace cdfsl
