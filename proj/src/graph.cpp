#include "cdfsl/graph.hpp"

#include <cmath>

namespace cdfsl {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw GraphError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
    throw GraphError(std::string(op) + ": invalid shape " + a.shape_str());
}

bool is_matrix(const Tensor& t) { return t.shape.size() == 2; }

}  // namespace

int Graph::push(GraphNode n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_id(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw GraphError("graph: bad node id");
}

int Graph::input(Tensor t) { return push({Op::Input, {}, std::move(t)}); }

int Graph::constant(Tensor t) { return push({Op::Constant, {}, std::move(t)}); }

int Graph::matmul(int a, int b) {
    check_id(a);
    check_id(b);
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (!is_matrix(A) || !is_matrix(B) || A.cols() != B.rows()) shape_error("matmul", A, B);
    Tensor out = Tensor::zeros({A.rows(), B.cols()});
    for (int i = 0; i < A.rows(); ++i)
        for (int k = 0; k < A.cols(); ++k) {
            double aik = A.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < B.cols(); ++j) out.at(i, j) += aik * B.at(k, j);
        }
    return push({Op::MatMul, {a, b}, std::move(out)});
}

int Graph::transpose(int a) {
    check_id(a);
    const Tensor& A = nodes_[a].value;
    if (!is_matrix(A)) shape_error("transpose", A);
    Tensor out = Tensor::zeros({A.cols(), A.rows()});
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(j, i) = A.at(i, j);
    return push({Op::Transpose, {a}, std::move(out)});
}

int Graph::add(int a, int b) {
    check_id(a);
    check_id(b);
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.same_shape(B)) {
        Tensor out = A;
        for (int i = 0; i < out.size(); ++i) out.values[i] += B.values[i];
        return push({Op::Add, {a, b}, std::move(out)});
    }
    // row-wise bias: [n x d] + [1 x d]; the only broadcast allowed anywhere
    if (is_matrix(A) && is_matrix(B) && B.rows() == 1 && A.cols() == B.cols()) {
        Tensor out = A;
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < A.cols(); ++j) out.at(i, j) += B.at(0, j);
        return push({Op::Add, {a, b}, std::move(out)});
    }
    shape_error("add", A, B);
}

int Graph::sub(int a, int b) {
    check_id(a);
    check_id(b);
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (!A.same_shape(B)) shape_error("sub", A, B);
    Tensor out = A;
    for (int i = 0; i < out.size(); ++i) out.values[i] -= B.values[i];
    return push({Op::Sub, {a, b}, std::move(out)});
}

int Graph::mul(int a, int b) {
    check_id(a);
    check_id(b);
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (!A.same_shape(B)) shape_error("mul", A, B);
    Tensor out = A;
    for (int i = 0; i < out.size(); ++i) out.values[i] *= B.values[i];
    return push({Op::Mul, {a, b}, std::move(out)});
}

int Graph::scalar_mul(int a, double s) {
    check_id(a);
    Tensor out = nodes_[a].value;
    for (double& v : out.values) v *= s;
    GraphNode n{Op::ScalarMul, {a}, std::move(out)};
    n.a = s;
    return push(std::move(n));
}

int Graph::relu(int a) {
    check_id(a);
    Tensor out = nodes_[a].value;
    for (double& v : out.values) v = v > 0.0 ? v : 0.0;
    return push({Op::Relu, {a}, std::move(out)});
}

int Graph::sigmoid(int a) {
    check_id(a);
    Tensor out = nodes_[a].value;
    for (double& v : out.values) v = 1.0 / (1.0 + std::exp(-v));
    return push({Op::Sigmoid, {a}, std::move(out)});
}

int Graph::exp(int a) {
    check_id(a);
    Tensor out = nodes_[a].value;
    for (double& v : out.values) v = std::exp(v);
    return push({Op::Exp, {a}, std::move(out)});
}

int Graph::log(int a) {
    check_id(a);
    Tensor out = nodes_[a].value;
    for (double& v : out.values) v = std::log(v > kLogEps ? v : kLogEps);
    return push({Op::Log, {a}, std::move(out)});
}

int Graph::mean(int a) {
    check_id(a);
    const Tensor& A = nodes_[a].value;
    double s = 0.0;
    for (double v : A.values) s += v;
    return push({Op::Mean, {a}, Tensor::scalar(s / A.size())});
}

int Graph::sum(int a) {
    check_id(a);
    const Tensor& A = nodes_[a].value;
    double s = 0.0;
    for (double v : A.values) s += v;
    return push({Op::Sum, {a}, Tensor::scalar(s)});
}

int Graph::log_softmax(int a) {
    check_id(a);
    const Tensor& A = nodes_[a].value;
    if (!is_matrix(A)) shape_error("log_softmax", A);
    Tensor out = A;
    for (int i = 0; i < A.rows(); ++i) {
        double mx = A.at(i, 0);
        for (int j = 1; j < A.cols(); ++j) mx = std::max(mx, A.at(i, j));
        double lse = 0.0;
        for (int j = 0; j < A.cols(); ++j) lse += std::exp(A.at(i, j) - mx);
        lse = mx + std::log(lse);
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(i, j) - lse;
    }
    return push({Op::LogSoftmax, {a}, std::move(out)});
}

int Graph::l2_normalize(int a) {
    check_id(a);
    const Tensor& A = nodes_[a].value;
    if (!is_matrix(A)) shape_error("l2_normalize", A);
    Tensor out = A;
    for (int i = 0; i < A.rows(); ++i) {
        double n2 = 0.0;
        for (int j = 0; j < A.cols(); ++j) n2 += A.at(i, j) * A.at(i, j);
        double n = std::sqrt(n2);
        if (n < 1e-12) continue;  // zero rows pass through
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(i, j) / n;
    }
    return push({Op::L2Normalize, {a}, std::move(out)});
}

int Graph::concat_rows(int a, int b) {
    check_id(a);
    check_id(b);
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (!is_matrix(A) || !is_matrix(B) || A.cols() != B.cols()) shape_error("concat_rows", A, B);
    Tensor out = Tensor::zeros({A.rows() + B.rows(), A.cols()});
    std::copy(A.values.begin(), A.values.end(), out.values.begin());
    std::copy(B.values.begin(), B.values.end(), out.values.begin() + A.values.size());
    return push({Op::ConcatRows, {a, b}, std::move(out)});
}

int Graph::clamp(int a, double lo, double hi) {
    check_id(a);
    if (!(lo <= hi)) throw GraphError("clamp: lo > hi");
    Tensor out = nodes_[a].value;
    for (double& v : out.values) v = v < lo ? lo : (v > hi ? hi : v);
    GraphNode n{Op::Clamp, {a}, std::move(out)};
    n.a = lo;
    n.b = hi;
    return push(std::move(n));
}

int Graph::grad_reverse(int a, double scale) {
    check_id(a);
    GraphNode n{Op::GradReverse, {a}, nodes_[a].value};
    n.a = scale;
    return push(std::move(n));
}

GradientMap Graph::backward(int loss_node) const {
    check_id(loss_node);
    if (nodes_[loss_node].value.size() != 1)
        throw GraphError("backward: loss node must be scalar, got " + nodes_[loss_node].value.shape_str());

    GradientMap grads;
    grads[loss_node] = Tensor::scalar(1.0);

    for (int id = loss_node; id >= 0; --id) {
        auto it = grads.find(id);
        if (it == grads.end()) continue;
        const GraphNode& n = nodes_[id];
        const Tensor& g = it->second;

        auto accum = [&](int target, Tensor add) {
            auto jt = grads.find(target);
            if (jt == grads.end()) {
                grads.emplace(target, std::move(add));
            } else {
                Tensor& acc = jt->second;
                for (int i = 0; i < acc.size(); ++i) acc.values[i] += add.values[i];
            }
        };

        switch (n.op) {
            case Op::Input:
            case Op::Constant:
                break;
            case Op::MatMul: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                const Tensor& B = nodes_[n.inputs[1]].value;
                Tensor da = Tensor::zeros({A.rows(), A.cols()});
                for (int i = 0; i < A.rows(); ++i)
                    for (int j = 0; j < B.cols(); ++j) {
                        double gij = g.at(i, j);
                        if (gij == 0.0) continue;
                        for (int k = 0; k < A.cols(); ++k) da.at(i, k) += gij * B.at(k, j);
                    }
                Tensor db = Tensor::zeros({B.rows(), B.cols()});
                for (int i = 0; i < A.rows(); ++i)
                    for (int k = 0; k < A.cols(); ++k) {
                        double aik = A.at(i, k);
                        if (aik == 0.0) continue;
                        for (int j = 0; j < B.cols(); ++j) db.at(k, j) += aik * g.at(i, j);
                    }
                accum(n.inputs[0], std::move(da));
                accum(n.inputs[1], std::move(db));
                break;
            }
            case Op::Transpose: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor da = Tensor::zeros({A.rows(), A.cols()});
                for (int i = 0; i < A.rows(); ++i)
                    for (int j = 0; j < A.cols(); ++j) da.at(i, j) = g.at(j, i);
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::Add: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                const Tensor& B = nodes_[n.inputs[1]].value;
                accum(n.inputs[0], g);
                if (A.same_shape(B)) {
                    accum(n.inputs[1], g);
                } else {
                    // row bias: sum over rows
                    Tensor db = Tensor::zeros({1, B.cols()});
                    for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < g.cols(); ++j) db.at(0, j) += g.at(i, j);
                    accum(n.inputs[1], std::move(db));
                }
                break;
            }
            case Op::Sub: {
                accum(n.inputs[0], g);
                Tensor db = g;
                for (double& v : db.values) v = -v;
                accum(n.inputs[1], std::move(db));
                break;
            }
            case Op::Mul: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                const Tensor& B = nodes_[n.inputs[1]].value;
                Tensor da = g;
                for (int i = 0; i < da.size(); ++i) da.values[i] *= B.values[i];
                Tensor db = g;
                for (int i = 0; i < db.size(); ++i) db.values[i] *= A.values[i];
                accum(n.inputs[0], std::move(da));
                accum(n.inputs[1], std::move(db));
                break;
            }
            case Op::ScalarMul: {
                Tensor da = g;
                for (double& v : da.values) v *= n.a;
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::Relu: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor da = g;
                for (int i = 0; i < da.size(); ++i)
                    if (A.values[i] <= 0.0) da.values[i] = 0.0;
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::Sigmoid: {
                Tensor da = g;
                for (int i = 0; i < da.size(); ++i) {
                    double y = n.value.values[i];
                    da.values[i] *= y * (1.0 - y);
                }
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::Exp: {
                Tensor da = g;
                for (int i = 0; i < da.size(); ++i) da.values[i] *= n.value.values[i];
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::Log: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor da = g;
                for (int i = 0; i < da.size(); ++i)
                    da.values[i] = A.values[i] > kLogEps ? da.values[i] / A.values[i] : 0.0;
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::Mean: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor da = Tensor::full(A.shape, g.values[0] / A.size());
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::Sum: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor da = Tensor::full(A.shape, g.values[0]);
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::LogSoftmax: {
                // dx = g - softmax(x) * rowsum(g)
                Tensor da = g;
                for (int i = 0; i < g.rows(); ++i) {
                    double gs = 0.0;
                    for (int j = 0; j < g.cols(); ++j) gs += g.at(i, j);
                    for (int j = 0; j < g.cols(); ++j)
                        da.at(i, j) = g.at(i, j) - std::exp(n.value.at(i, j)) * gs;
                }
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::L2Normalize: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor da = g;
                for (int i = 0; i < A.rows(); ++i) {
                    double n2 = 0.0;
                    for (int j = 0; j < A.cols(); ++j) n2 += A.at(i, j) * A.at(i, j);
                    double norm = std::sqrt(n2);
                    if (norm < 1e-12) continue;  // pass-through region
                    double dot = 0.0;
                    for (int j = 0; j < A.cols(); ++j) dot += n.value.at(i, j) * g.at(i, j);
                    for (int j = 0; j < A.cols(); ++j)
                        da.at(i, j) = (g.at(i, j) - n.value.at(i, j) * dot) / norm;
                }
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::ConcatRows: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                const Tensor& B = nodes_[n.inputs[1]].value;
                Tensor da = Tensor::zeros({A.rows(), A.cols()});
                Tensor db = Tensor::zeros({B.rows(), B.cols()});
                std::copy(g.values.begin(), g.values.begin() + A.values.size(), da.values.begin());
                std::copy(g.values.begin() + A.values.size(), g.values.end(), db.values.begin());
                accum(n.inputs[0], std::move(da));
                accum(n.inputs[1], std::move(db));
                break;
            }
            case Op::Clamp: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                Tensor da = g;
                for (int i = 0; i < da.size(); ++i)
                    if (A.values[i] < n.a || A.values[i] > n.b) da.values[i] = 0.0;
                accum(n.inputs[0], std::move(da));
                break;
            }
            case Op::GradReverse: {
                Tensor da = g;
                for (double& v : da.values) v *= -n.a;
                accum(n.inputs[0], std::move(da));
                break;
            }
        }
    }

    // Constants never report gradients.
    for (int id = 0; id < static_cast<int>(nodes_.size()); ++id)
        if (nodes_[id].op == Op::Constant) grads.erase(id);
    return grads;
}

}  // namespace cdfsl
