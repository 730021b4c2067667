#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stg/ops.hpp"

namespace stg {

// Low-rank adapter on a frozen linear layer: y += scaling * (drop(x) A) B.
// B starts at zero so a freshly wrapped layer computes exactly the base map.
template <typename T>
struct LoraAdapter {
    Tensor<T> a;  // [in x r]
    Tensor<T> b;  // [r x out]
    T scaling = T(1);  // alpha / r
    double dropout_rate = 0.0;
};

template <typename T>
struct Linear {
    Tensor<T> weight;  // [in x out]
    Tensor<T> bias;    // [out]
    std::optional<LoraAdapter<T>> adapter;

    static Linear init(std::size_t in, std::size_t out, RngState& rng) {
        Linear l;
        l.weight = Tensor<T>({in, out});
        fill_xavier_uniform(l.weight, in, out, rng);
        l.bias = Tensor<T>({out});
        return l;
    }

    std::size_t in_dim() const { return weight.dim(0); }
    std::size_t out_dim() const { return weight.dim(1); }

    Tensor<T> forward(const Tensor<T>& x, RngState* rng = nullptr, bool training = false) const {
        if (x.ndim() != 2 || x.dim(1) != in_dim())
            throw DimensionError("linear: input columns " +
                                 std::to_string(x.ndim() == 2 ? x.dim(1) : 0) +
                                 " do not match weight rows " + std::to_string(in_dim()));
        Tensor<T> y = linear(x, weight, bias);
        if (adapter) {
            Tensor<T> ax = x;
            if (training && adapter->dropout_rate > 0.0) {
                if (rng == nullptr)
                    throw ParameterError("linear: adapter dropout needs an rng in training mode");
                ax = dropout(ax, adapter->dropout_rate, *rng, true);
            }
            Tensor<T> low = matmul(matmul(ax, adapter->a), adapter->b);
            y = add(y, scale(low, adapter->scaling));
        }
        return y;
    }
};

// Named handle to one parameter tensor inside a model registry.
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
};

template <typename T>
std::vector<Tensor<T>> tensors_of(const std::vector<ParamRef<T>>& refs, bool trainable_only) {
    std::vector<Tensor<T>> out;
    for (const auto& r : refs)
        if (!trainable_only || r.trainable) out.push_back(r.tensor);
    return out;
}

}  // namespace stg
