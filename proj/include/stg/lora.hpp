#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "stg/encoder.hpp"

namespace stg {

struct LoraConfig {
    std::size_t rank = 4;
    double alpha = 16.0;
    double adapter_dropout = 0.1;
    std::vector<std::string> targets = {"q", "v"};  // projection names per layer

    double scaling() const { return alpha / static_cast<double>(rank); }

    void validate() const {
        if (rank < 1) throw ConfigError("lora: rank must be at least 1");
        if (alpha <= 0.0) throw ConfigError("lora: alpha must be positive");
        if (adapter_dropout < 0.0 || adapter_dropout >= 1.0)
            throw ConfigError("lora: adapter dropout must be in [0, 1)");
        if (targets.empty()) throw ConfigError("lora: target set must be non-empty");
        for (const auto& t : targets)
            if (t != "q" && t != "k" && t != "v" && t != "o" && t != "ffn1" && t != "ffn2")
                throw ConfigError("lora: unknown target projection '" + t + "'");
    }
};

namespace detail {

template <typename T>
Linear<T>* select_projection(EncoderLayer<T>& layer, const std::string& name) {
    if (name == "q") return &layer.q;
    if (name == "k") return &layer.k;
    if (name == "v") return &layer.v;
    if (name == "o") return &layer.o;
    if (name == "ffn1") return &layer.ffn1;
    if (name == "ffn2") return &layer.ffn2;
    return nullptr;
}

}  // namespace detail

// Installs adapters on the configured projections of every layer. A is
// initialized from N(0, 0.02^2) and B from zero, so the wrapped model equals
// the base model exactly until the first optimizer step. The base partition
// is frozen afterwards.
template <typename T>
void lora_wrap(EncoderModel<T>& model, const LoraConfig& cfg, RngState& rng) {
    cfg.validate();
    if (model.lora_wrapped) throw StateError("lora_wrap: model already wrapped");
    for (auto& layer : model.layers) {
        for (const auto& name : cfg.targets) {
            Linear<T>* proj = detail::select_projection(layer, name);
            if (proj == nullptr) throw ConfigError("lora_wrap: unknown target '" + name + "'");
            LoraAdapter<T> adapter;
            adapter.a = Tensor<T>({proj->in_dim(), cfg.rank});
            fill_normal(adapter.a, 0.02, rng);
            adapter.b = Tensor<T>({cfg.rank, proj->out_dim()});
            adapter.scaling = static_cast<T>(cfg.scaling());
            adapter.dropout_rate = cfg.adapter_dropout;
            proj->adapter = std::move(adapter);
        }
    }
    model.lora_wrapped = true;
}

// Folds one adapter into its base weight: W' = W + scaling * A B, with the
// product and sum accumulated in double. Only legal outside training mode;
// afterwards the layer is a plain linear again.
template <typename T>
void lora_merge_layer(Linear<T>& layer) {
    if (!layer.adapter) return;
    const std::size_t in = layer.in_dim(), out = layer.out_dim();
    const std::size_t rank = layer.adapter->a.dim(1);
    const double s = static_cast<double>(layer.adapter->scaling);
    for (std::size_t i = 0; i < in; ++i)
        for (std::size_t j = 0; j < out; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < rank; ++k)
                acc += static_cast<double>(layer.adapter->a.at(i, k)) *
                       static_cast<double>(layer.adapter->b.at(k, j));
            layer.weight.at(i, j) =
                static_cast<T>(static_cast<double>(layer.weight.at(i, j)) + s * acc);
        }
    layer.adapter.reset();
}

template <typename T>
void lora_merge(EncoderModel<T>& model) {
    if (model.training_mode) throw StateError("lora_merge: model is in training mode");
    if (!model.lora_wrapped) throw StateError("lora_merge: model has no adapters");
    for (auto& layer : model.layers)
        for (auto* proj : {&layer.q, &layer.k, &layer.v, &layer.o, &layer.ffn1, &layer.ffn2})
            lora_merge_layer(*proj);
    model.lora_wrapped = false;
}

// Trainable adapter parameter count: sum over targets of r * (in + out).
template <typename T>
std::size_t lora_trainable_count(EncoderModel<T>& model) {
    std::size_t count = 0;
    for (auto& r : model.registry())
        if (r.trainable) count += r.tensor.numel();
    return count;
}

}  // namespace stg
