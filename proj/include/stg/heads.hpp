#pragma once

#include "stg/nn.hpp"

namespace stg {

// Node-classification head: dropout followed by a linear map to K logits.
template <typename T>
struct NodeClsHead {
    Linear<T> out;
    double dropout_rate = 0.1;

    static NodeClsHead init(std::size_t d, std::size_t num_classes, double dropout, RngState& rng) {
        NodeClsHead h;
        h.out = Linear<T>::init(d, num_classes, rng);
        h.dropout_rate = dropout;
        return h;
    }

    Tensor<T> forward(const Tensor<T>& h, RngState* rng = nullptr, bool training = false) const {
        Tensor<T> x = h;
        if (training && dropout_rate > 0.0) {
            if (rng == nullptr) throw ParameterError("cls head: training mode needs an rng");
            x = dropout(x, dropout_rate, *rng, true);
        }
        return out.forward(x);
    }

    std::vector<Tensor<T>> params() { return {out.weight, out.bias}; }
};

// Pair scorer for link prediction: a two-layer MLP over
// [h_src (+) h_dst (+) h_src*h_dst], one logit per pair.
template <typename T>
struct LinkHead {
    Linear<T> fc1;  // 3d -> hidden
    Linear<T> fc2;  // hidden -> 1
    double dropout_rate = 0.1;

    static LinkHead init(std::size_t d, std::size_t hidden, double dropout, RngState& rng) {
        LinkHead h;
        h.fc1 = Linear<T>::init(3 * d, hidden, rng);
        h.fc2 = Linear<T>::init(hidden, 1, rng);
        h.dropout_rate = dropout;
        return h;
    }

    Tensor<T> forward(const Tensor<T>& h_src, const Tensor<T>& h_dst, RngState* rng = nullptr,
                      bool training = false) const {
        if (h_src.shape() != h_dst.shape())
            throw DimensionError("link head: endpoint embedding shapes disagree");
        Tensor<T> z = concat_cols<T>({h_src, h_dst, mul(h_src, h_dst)});
        Tensor<T> a = gelu(fc1.forward(z));
        if (training && dropout_rate > 0.0) {
            if (rng == nullptr) throw ParameterError("link head: training mode needs an rng");
            a = dropout(a, dropout_rate, *rng, true);
        }
        return reshape(fc2.forward(a), {h_src.dim(0)});
    }

    std::vector<Tensor<T>> params() { return {fc1.weight, fc1.bias, fc2.weight, fc2.bias}; }
};

}  // namespace stg
