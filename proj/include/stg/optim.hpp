#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "stg/tensor.hpp"

namespace stg {

// AdamW with decoupled weight decay: the decay term is applied directly to
// the parameter and never enters the moment estimates.
template <typename T>
struct AdamWState {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    AdamWState() = default;
    AdamWState(double lr, double wd) : learning_rate(lr), weight_decay(wd) {
        if (lr <= 0.0) throw ParameterError("adamw: learning rate must be positive");
        if (wd < 0.0) throw ParameterError("adamw: weight decay must be nonnegative");
    }

    void init(const std::vector<Tensor<T>>& params) {
        first_moment.clear();
        second_moment.clear();
        for (const auto& p : params) {
            first_moment.emplace_back(p.numel(), 0.0);
            second_moment.emplace_back(p.numel(), 0.0);
        }
        step_count = 0;
    }
};

// One optimizer step over the given parameter list. Gradients are read from
// each tensor's grad buffer; parameters without an allocated gradient are
// treated as zero-gradient (decay still applies).
template <typename T>
void adamw_step(std::vector<Tensor<T>>& params, AdamWState<T>& state) {
    if (state.first_moment.size() != params.size())
        throw DimensionError("adamw_step: state not initialized for this parameter list");
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        auto& m = state.first_moment[pi];
        auto& v = state.second_moment[pi];
        if (m.size() != p.numel())
            throw DimensionError("adamw_step: moment size does not match parameter");
        auto& w = p.data();
        const bool has_grad = p.has_grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double g = has_grad ? static_cast<double>(p.grad()[i]) : 0.0;
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            const double update =
                mhat / (std::sqrt(vhat) + state.epsilon) + state.weight_decay * w[i];
            w[i] = static_cast<T>(w[i] - state.learning_rate * update);
        }
    }
}

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace stg
