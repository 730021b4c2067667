#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stg/batch.hpp"
#include "stg/nn.hpp"
#include "stg/optim.hpp"

namespace stg {

struct EncoderConfig {
    std::size_t d_model = 128;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t ffn_dim = 256;
    std::size_t max_len = 64;
    std::size_t vocab_size = 0;
    double dropout_rate = 0.1;
    enum class Pooling { mean, cls };
    Pooling pooling = Pooling::mean;

    void validate() const {
        if (d_model == 0 || num_heads == 0 || d_model % num_heads != 0)
            throw ConfigError("encoder: d_model must be divisible by num_heads");
        if (max_len < 2) throw ConfigError("encoder: max_len must be at least 2");
        if (num_layers == 0) throw ConfigError("encoder: need at least one layer");
        if (vocab_size == 0) throw ConfigError("encoder: vocab_size not set");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ConfigError("encoder: dropout must be in [0, 1)");
    }
};

template <typename T>
struct EncoderLayer {
    Linear<T> q, k, v, o;
    Linear<T> ffn1, ffn2;
    Tensor<T> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

// Pre-layer-norm transformer encoder with learned position embeddings and a
// masked-LM output head. Pad key positions are excluded from attention, so
// extending a batch with extra pad columns does not change valid outputs.
template <typename T>
struct EncoderModel {
    EncoderConfig cfg;
    Tensor<T> token_embedding;     // [vocab x d]
    Tensor<T> position_embedding;  // [max_len x d]
    std::vector<EncoderLayer<T>> layers;
    Tensor<T> final_ln_gain, final_ln_bias;
    Linear<T> mlm_head;  // [d x vocab]
    bool lora_wrapped = false;
    bool training_mode = false;

    static EncoderModel init(const EncoderConfig& cfg, RngState& rng) {
        cfg.validate();
        EncoderModel m;
        m.cfg = cfg;
        m.token_embedding = Tensor<T>({cfg.vocab_size, cfg.d_model});
        fill_normal(m.token_embedding, 0.02, rng);
        m.position_embedding = Tensor<T>({cfg.max_len, cfg.d_model});
        fill_normal(m.position_embedding, 0.02, rng);
        for (std::size_t i = 0; i < cfg.num_layers; ++i) {
            EncoderLayer<T> layer;
            layer.q = Linear<T>::init(cfg.d_model, cfg.d_model, rng);
            layer.k = Linear<T>::init(cfg.d_model, cfg.d_model, rng);
            layer.v = Linear<T>::init(cfg.d_model, cfg.d_model, rng);
            layer.o = Linear<T>::init(cfg.d_model, cfg.d_model, rng);
            layer.ffn1 = Linear<T>::init(cfg.d_model, cfg.ffn_dim, rng);
            layer.ffn2 = Linear<T>::init(cfg.ffn_dim, cfg.d_model, rng);
            layer.ln1_gain = Tensor<T>::full({cfg.d_model}, T(1));
            layer.ln1_bias = Tensor<T>({cfg.d_model});
            layer.ln2_gain = Tensor<T>::full({cfg.d_model}, T(1));
            layer.ln2_bias = Tensor<T>({cfg.d_model});
            m.layers.push_back(std::move(layer));
        }
        m.final_ln_gain = Tensor<T>::full({cfg.d_model}, T(1));
        m.final_ln_bias = Tensor<T>({cfg.d_model});
        m.mlm_head = Linear<T>::init(cfg.d_model, cfg.vocab_size, rng);
        return m;
    }

    // Every parameter exactly once, in a fixed order shared by checkpoints.
    // Trainable flags reflect the finetuning partition: with adapters
    // installed only {A, B} train; otherwise every body parameter does. The
    // MLM head is listed untrainable here and handled by the MLM step.
    std::vector<ParamRef<T>> registry() {
        std::vector<ParamRef<T>> refs;
        const bool base_trainable = !lora_wrapped;
        refs.push_back({"tok_emb", token_embedding, base_trainable});
        refs.push_back({"pos_emb", position_embedding, base_trainable});
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto& l = layers[i];
            const std::string p = "layer" + std::to_string(i) + ".";
            auto lin = [&](const std::string& name, Linear<T>& mod) {
                refs.push_back({p + name + ".w", mod.weight, base_trainable});
                refs.push_back({p + name + ".b", mod.bias, base_trainable});
            };
            lin("q", l.q);
            lin("k", l.k);
            lin("v", l.v);
            lin("o", l.o);
            lin("ffn1", l.ffn1);
            lin("ffn2", l.ffn2);
            refs.push_back({p + "ln1.g", l.ln1_gain, base_trainable});
            refs.push_back({p + "ln1.b", l.ln1_bias, base_trainable});
            refs.push_back({p + "ln2.g", l.ln2_gain, base_trainable});
            refs.push_back({p + "ln2.b", l.ln2_bias, base_trainable});
        }
        refs.push_back({"final_ln.g", final_ln_gain, base_trainable});
        refs.push_back({"final_ln.b", final_ln_bias, base_trainable});
        refs.push_back({"mlm.w", mlm_head.weight, false});
        refs.push_back({"mlm.b", mlm_head.bias, false});
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto& l = layers[i];
            const std::string p = "layer" + std::to_string(i) + ".";
            auto adapter = [&](const std::string& name, Linear<T>& mod) {
                if (mod.adapter) {
                    refs.push_back({p + name + ".lora_a", mod.adapter->a, true});
                    refs.push_back({p + name + ".lora_b", mod.adapter->b, true});
                }
            };
            adapter("q", l.q);
            adapter("k", l.k);
            adapter("v", l.v);
            adapter("o", l.o);
            adapter("ffn1", l.ffn1);
            adapter("ffn2", l.ffn2);
        }
        return refs;
    }

    std::vector<Tensor<T>> trainable_params() { return tensors_of(registry(), true); }

    std::vector<Tensor<T>> all_params() { return tensors_of(registry(), false); }

    // The set the MLM pretraining step optimizes: every parameter including
    // the MLM head. Pretraining happens before any adapter wrapping.
    std::vector<Tensor<T>> mlm_params() {
        if (lora_wrapped) throw StateError("mlm_params: model already wrapped with adapters");
        return all_params();
    }

    void set_requires_grad_from_partition() {
        for (auto& r : registry()) r.tensor.set_requires_grad(r.trainable);
    }
};

// Full transformer stack over one tokenized batch; returns the final hidden
// states as a [b*L x d] matrix.
template <typename T>
Tensor<T> encoder_forward(const EncoderModel<T>& model, const TokenBatch& batch, bool training,
                          RngState* rng = nullptr) {
    const EncoderConfig& cfg = model.cfg;
    const std::size_t b = batch.batch_size, L = batch.max_len;
    if (L > cfg.max_len)
        throw DimensionError("encoder_forward: batch length " + std::to_string(L) +
                             " exceeds max_len " + std::to_string(cfg.max_len));
    if (training && cfg.dropout_rate > 0.0 && rng == nullptr)
        throw ParameterError("encoder_forward: training mode needs an rng");
    std::vector<std::int64_t> tok_idx(b * L), pos_idx(b * L);
    for (std::size_t i = 0; i < b * L; ++i) {
        const std::int32_t id = batch.input_ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
            throw IndexError("encoder_forward: token id " + std::to_string(id) +
                             " out of vocabulary");
        tok_idx[i] = id;
        pos_idx[i] = static_cast<std::int64_t>(i % L);
    }
    auto drop = [&](Tensor<T> x) {
        return training && cfg.dropout_rate > 0.0 ? dropout(x, cfg.dropout_rate, *rng, true) : x;
    };

    Tensor<T> x = add(gather_rows(model.token_embedding, tok_idx),
                      gather_rows(model.position_embedding, pos_idx));
    x = drop(x);
    const std::size_t nh = cfg.num_heads;
    const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg.d_model / nh)));
    for (const auto& layer : model.layers) {
        Tensor<T> h = layer_norm(x, layer.ln1_gain, layer.ln1_bias, T(1e-5));
        Tensor<T> qh = split_heads(layer.q.forward(h, rng, training), b, L, nh);
        Tensor<T> kh = split_heads(layer.k.forward(h, rng, training), b, L, nh);
        Tensor<T> vh = split_heads(layer.v.forward(h, rng, training), b, L, nh);
        Tensor<T> weights = attention_softmax(bmm_nt(qh, kh), batch.attention_mask, nh, att_scale);
        Tensor<T> context = merge_heads(bmm(weights, vh), b, L, nh);
        x = add(x, drop(layer.o.forward(context, rng, training)));
        Tensor<T> h2 = layer_norm(x, layer.ln2_gain, layer.ln2_bias, T(1e-5));
        Tensor<T> f = layer.ffn2.forward(gelu(layer.ffn1.forward(h2, rng, training)), rng, training);
        x = add(x, drop(f));
    }
    return layer_norm(x, model.final_ln_gain, model.final_ln_bias, T(1e-5));
}

// Sentence embeddings for a batch under the configured pooling mode.
template <typename T>
Tensor<T> encode_batch(const EncoderModel<T>& model, const TokenBatch& batch, bool training,
                       RngState* rng = nullptr) {
    Tensor<T> hidden = encoder_forward(model, batch, training, rng);
    if (model.cfg.pooling == EncoderConfig::Pooling::cls)
        return cls_pool(hidden, batch.batch_size, batch.max_len);
    return mean_pool(hidden, batch.attention_mask, batch.batch_size, batch.max_len);
}

// One masked-LM pretraining step: corrupt a fraction of valid non-cls
// positions with unk, predict the original ids at those positions, and step
// the optimizer over every encoder parameter. Returns the loss, or nullopt
// when no position was selected.
template <typename T>
std::optional<double> mlm_pretrain_step(EncoderModel<T>& model, const TokenBatch& batch,
                                        double mask_rate, RngState& rng,
                                        std::vector<Tensor<T>>& params, AdamWState<T>& opt) {
    if (mask_rate <= 0.0 || mask_rate >= 1.0)
        throw ParameterError("mlm_pretrain_step: mask_rate must be in (0, 1)");
    TokenBatch corrupted = batch;
    std::vector<std::int64_t> positions;
    std::vector<std::int32_t> original;
    for (std::size_t i = 0; i < batch.input_ids.size(); ++i) {
        const bool maskable = batch.attention_mask[i] && batch.input_ids[i] != Vocab::kCls;
        const bool chosen = rng.next_double() < mask_rate;  // one draw per position
        if (maskable && chosen) {
            positions.push_back(static_cast<std::int64_t>(i));
            original.push_back(batch.input_ids[i]);
            corrupted.input_ids[i] = Vocab::kUnk;
        }
    }
    if (positions.empty()) return std::nullopt;

    Tape<T> tape;
    double loss_value = 0.0;
    {
        TapeScope<T> scope(tape);
        Tensor<T> hidden = encoder_forward(model, corrupted, true, &rng);
        Tensor<T> picked = gather_rows(hidden, positions);
        Tensor<T> logits = model.mlm_head.forward(picked);
        Tensor<T> loss = cross_entropy_smoothed(logits, original, 0.0);
        loss_value = static_cast<double>(loss.item());
        tape.backward(loss);
    }
    adamw_step(params, opt);
    zero_grads(params);
    return loss_value;
}

}  // namespace stg
