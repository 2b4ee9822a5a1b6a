#pragma once

#include <map>
#include <string>

#include "cdfsl/graph.hpp"
#include "cdfsl/nets.hpp"
#include "cdfsl/tensor.hpp"

namespace cdfsl {

void sgd_step(Tensor& param, const Tensor& grad, double lr);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction; moment state is keyed by parameter name, so one
// instance can own disjoint parameter groups stepping at different times.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void apply(const std::string& name, Tensor& param, const Tensor& grad);

    const AdamConfig& config() const { return cfg_; }

private:
    struct State {
        Tensor m, v;
        long t = 0;
    };
    AdamConfig cfg_;
    std::map<std::string, State> state_;
};

// Step every layer of `mlp` by the gradients recorded for its attached node
// ids; layers whose nodes are absent from the map are left untouched.
void adam_step_mlp(Adam& opt, const std::string& prefix, Mlp& mlp, const AttachedMlp& attached,
                   const GradientMap& grads);
void adam_step_linear(Adam& opt, const std::string& prefix, Linear& lin, const AttachedLinear& attached,
                      const GradientMap& grads);
void sgd_step_mlp(Mlp& mlp, const AttachedMlp& attached, const GradientMap& grads, double lr);

}  // namespace cdfsl
