#include "cdfsl/optim.hpp"

#include <cmath>

namespace cdfsl {

void sgd_step(Tensor& param, const Tensor& grad, double lr) {
    for (int i = 0; i < param.size(); ++i) param.values[i] -= lr * grad.values[i];
}

void Adam::apply(const std::string& name, Tensor& param, const Tensor& grad) {
    State& s = state_[name];
    if (s.t == 0) {
        s.m = Tensor::zeros(param.shape);
        s.v = Tensor::zeros(param.shape);
    }
    ++s.t;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
    for (int i = 0; i < param.size(); ++i) {
        double gi = grad.values[i];
        s.m.values[i] = cfg_.beta1 * s.m.values[i] + (1.0 - cfg_.beta1) * gi;
        s.v.values[i] = cfg_.beta2 * s.v.values[i] + (1.0 - cfg_.beta2) * gi * gi;
        double mhat = s.m.values[i] / bc1;
        double vhat = s.v.values[i] / bc2;
        param.values[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

namespace {

const Tensor* find_grad(const GradientMap& grads, int id) {
    auto it = grads.find(id);
    return it == grads.end() ? nullptr : &it->second;
}

}  // namespace

void adam_step_mlp(Adam& opt, const std::string& prefix, Mlp& mlp, const AttachedMlp& attached,
                   const GradientMap& grads) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        std::string stem = prefix + "." + std::to_string(i);
        if (const Tensor* gw = find_grad(grads, attached.layers[i].w))
            opt.apply(stem + ".w", mlp.layers[i].w, *gw);
        if (const Tensor* gb = find_grad(grads, attached.layers[i].b))
            opt.apply(stem + ".b", mlp.layers[i].b, *gb);
    }
}

void adam_step_linear(Adam& opt, const std::string& prefix, Linear& lin, const AttachedLinear& attached,
                      const GradientMap& grads) {
    if (const Tensor* gw = find_grad(grads, attached.w)) opt.apply(prefix + ".w", lin.w, *gw);
    if (const Tensor* gb = find_grad(grads, attached.b)) opt.apply(prefix + ".b", lin.b, *gb);
}

void sgd_step_mlp(Mlp& mlp, const AttachedMlp& attached, const GradientMap& grads, double lr) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        if (const Tensor* gw = find_grad(grads, attached.layers[i].w)) sgd_step(mlp.layers[i].w, *gw, lr);
        if (const Tensor* gb = find_grad(grads, attached.layers[i].b)) sgd_step(mlp.layers[i].b, *gb, lr);
    }
}

}  // namespace cdfsl
