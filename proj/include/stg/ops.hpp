#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "stg/tensor.hpp"

namespace stg {

namespace kernel {

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k x n] += A[m x k]^T * B[m x n]
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T(0)) continue;
            T* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace kernel

namespace detail {

template <typename T, typename F>
void record_if_needed(Tensor<T>& out, bool any_input_requires_grad, F&& backward_fn) {
    auto* tape = Tape<T>::active();
    if (tape != nullptr && any_input_requires_grad) {
        out.set_requires_grad(true);
        out.mark_non_leaf();
        tape->record(out.node(), std::forward<F>(backward_fn));
    }
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw DimensionError("matmul: expects 2-D tensors, got " + detail::shape_str(a.shape()) +
                             " and " + detail::shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw DimensionError("matmul: inner dimensions disagree, " + detail::shape_str(a.shape()) +
                             " vs " + detail::shape_str(b.shape()));
    Tensor<T> out({m, n});
    kernel::gemm_nn_acc(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    auto an = a.node(), bn = b.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad() || b.requires_grad(), [an, bn, on, m, k, n] {
        if (an->requires_grad) {
            an->ensure_grad();
            kernel::gemm_nt_acc(on->grad.data(), bn->value.data(), an->grad.data(), m, n, k);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            kernel::gemm_tn_acc(an->value.data(), on->grad.data(), bn->grad.data(), m, k, n);
        }
    });
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add: shape mismatch " + detail::shape_str(a.shape()) + " vs " +
                             detail::shape_str(b.shape()));
    Tensor<T> out(a.shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    auto an = a.node(), bn = b.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad() || b.requires_grad(), [an, bn, on, n] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
        }
    });
    return out;
}

// a[n x d] + row vector b[d], broadcast over rows.
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 1 || b.dim(0) != a.dim(1))
        throw DimensionError("add_rowvec: want [n x d] + [d], got " +
                             detail::shape_str(a.shape()) + " and " + detail::shape_str(b.shape()));
    const std::size_t n = a.dim(0), d = a.dim(1);
    Tensor<T> out({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.data()[i * d + j] = a.data()[i * d + j] + b.data()[j];
    auto an = a.node(), bn = b.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad() || b.requires_grad(), [an, bn, on, n, d] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < n * d; ++i) an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) bn->grad[j] += on->grad[i * d + j];
        }
    });
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("mul: shape mismatch " + detail::shape_str(a.shape()) + " vs " +
                             detail::shape_str(b.shape()));
    Tensor<T> out(a.shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad() || b.requires_grad(), [an, bn, on, n] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i] * an->value[i];
        }
    });
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    Tensor<T> out(a.shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
    auto an = a.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad(), [an, on, n, c] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * c;
    });
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
    auto an = a.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad(), [an, on, n] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
            if (an->value[i] > T(0)) an->grad[i] += on->grad[i];
    });
    return out;
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(a.data()[i]);
    auto an = a.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad(), [an, on, n] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            T y = on->value[i];
            an->grad[i] += on->grad[i] * (T(1) - y * y);
        }
    });
    return out;
}

// Gaussian error linear unit, tanh approximation.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double kA = 0.044715;
    Tensor<T> out(a.shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(a.data()[i]);
        double u = kC * (x + kA * x * x * x);
        out.data()[i] = static_cast<T>(0.5 * x * (1.0 + std::tanh(u)));
    }
    auto an = a.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad(), [an, on, n] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            double x = static_cast<double>(an->value[i]);
            double u = kC * (x + kA * x * x * x);
            double t = std::tanh(u);
            double sech2 = 1.0 - t * t;
            double d = 0.5 * (1.0 + t) + 0.5 * x * sech2 * kC * (1.0 + 3.0 * kA * x * x);
            an->grad[i] += on->grad[i] * static_cast<T>(d);
        }
    });
    return out;
}

// Inverted dropout. Training mode zeroes entries with probability `rate` and
// scales survivors by 1/(1-rate); eval mode is the identity.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double rate, RngState& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0)
        throw ParameterError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return a;
    const std::size_t n = a.numel();
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<T>>(n);
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < n; ++i) {
        T m = rng.next_double() >= rate ? keep_scale : T(0);
        (*mask)[i] = m;
        out.data()[i] = a.data()[i] * m;
    }
    auto an = a.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad(), [an, on, mask, n] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * (*mask)[i];
    });
    return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<std::size_t> new_shape) {
    Tensor<T> out = Tensor<T>::from_data(std::move(new_shape), a.data());
    if (out.numel() != a.numel()) throw DimensionError("reshape: element count must not change");
    auto an = a.node(), on = out.node();
    const std::size_t n = a.numel();
    detail::record_if_needed(out, a.requires_grad(), [an, on, n] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
    });
    return out;
}

// Column-wise concatenation of 2-D tensors with equal row counts.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t rows = parts[0].dim(0);
    std::size_t total = 0;
    bool any_grad = false;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.dim(0) != rows)
            throw DimensionError("concat_cols: row counts disagree");
        total += p.dim(1);
        any_grad = any_grad || p.requires_grad();
    }
    Tensor<T> out({rows, total});
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t d = p.dim(1);
        for (std::size_t i = 0; i < rows; ++i)
            std::copy_n(p.data().data() + i * d, d, out.data().data() + i * total + off);
        off += d;
    }
    std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) nodes.push_back(p.node());
    auto on = out.node();
    detail::record_if_needed(out, any_grad, [nodes, on, rows, total] {
        std::size_t off = 0;
        for (auto& pn : nodes) {
            const std::size_t d = pn->shape[1];
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                        pn->grad[i * d + j] += on->grad[i * total + off + j];
            }
            off += d;
        }
    });
    return out;
}

// Selects rows of a 2-D tensor; used both for embedding lookup and for
// restricting a full-graph forward to one split. Backward scatter-adds.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::int64_t>& idx) {
    if (x.ndim() != 2) throw DimensionError("gather_rows: expects 2-D input");
    const std::size_t n_in = x.dim(0), d = x.dim(1);
    for (auto i : idx)
        if (i < 0 || static_cast<std::size_t>(i) >= n_in)
            throw IndexError("gather_rows: row index " + std::to_string(i) + " out of range");
    Tensor<T> out({idx.size(), d});
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(x.data().data() + static_cast<std::size_t>(idx[r]) * d, d,
                    out.data().data() + r * d);
    auto xn = x.node(), on = out.node();
    auto ids = std::make_shared<std::vector<std::int64_t>>(idx);
    detail::record_if_needed(out, x.requires_grad(), [xn, on, ids, d] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t r = 0; r < ids->size(); ++r) {
            T* dst = xn->grad.data() + static_cast<std::size_t>((*ids)[r]) * d;
            const T* src = on->grad.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
    return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    T acc = T(0);
    for (T v : a.data()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    auto an = a.node(), on = out.node();
    const std::size_t n = a.numel();
    detail::record_if_needed(out, a.requires_grad(), [an, on, n] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[0];
    });
    return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
    if (a.numel() == 0) throw DimensionError("mean_all: empty tensor");
    T acc = T(0);
    for (T v : a.data()) acc += v;
    const T inv = T(1) / static_cast<T>(a.numel());
    Tensor<T> out = Tensor<T>::scalar(acc * inv);
    auto an = a.node(), on = out.node();
    const std::size_t n = a.numel();
    detail::record_if_needed(out, a.requires_grad(), [an, on, n, inv] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[0] * inv;
    });
    return out;
}

// [b*L x d] -> [(b*h) x L x dh] with slice index bi*h + hi.
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t b, std::size_t L, std::size_t h) {
    const std::size_t d = x.dim(1);
    if (x.dim(0) != b * L || d % h != 0) throw DimensionError("split_heads: bad shape");
    const std::size_t dh = d / h;
    Tensor<T> out({b * h, L, dh});
    for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t l = 0; l < L; ++l)
            for (std::size_t hi = 0; hi < h; ++hi)
                std::copy_n(x.data().data() + (bi * L + l) * d + hi * dh, dh,
                            out.data().data() + ((bi * h + hi) * L + l) * dh);
    auto xn = x.node(), on = out.node();
    detail::record_if_needed(out, x.requires_grad(), [xn, on, b, L, h, d, dh] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t hi = 0; hi < h; ++hi) {
                    const T* src = on->grad.data() + ((bi * h + hi) * L + l) * dh;
                    T* dst = xn->grad.data() + (bi * L + l) * d + hi * dh;
                    for (std::size_t c = 0; c < dh; ++c) dst[c] += src[c];
                }
    });
    return out;
}

// Inverse of split_heads: [(b*h) x L x dh] -> [b*L x d].
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t b, std::size_t L, std::size_t h) {
    if (x.ndim() != 3 || x.dim(0) != b * h || x.dim(1) != L)
        throw DimensionError("merge_heads: bad shape");
    const std::size_t dh = x.dim(2), d = h * dh;
    Tensor<T> out({b * L, d});
    for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t l = 0; l < L; ++l)
            for (std::size_t hi = 0; hi < h; ++hi)
                std::copy_n(x.data().data() + ((bi * h + hi) * L + l) * dh, dh,
                            out.data().data() + (bi * L + l) * d + hi * dh);
    auto xn = x.node(), on = out.node();
    detail::record_if_needed(out, x.requires_grad(), [xn, on, b, L, h, d, dh] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t hi = 0; hi < h; ++hi) {
                    const T* src = on->grad.data() + (bi * L + l) * d + hi * dh;
                    T* dst = xn->grad.data() + ((bi * h + hi) * L + l) * dh;
                    for (std::size_t c = 0; c < dh; ++c) dst[c] += src[c];
                }
    });
    return out;
}

// Batched C[s] = A[s] * B[s] over leading slice dimension.
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
        throw DimensionError("bmm: bad shapes " + detail::shape_str(a.shape()) + " and " +
                             detail::shape_str(b.shape()));
    const std::size_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    Tensor<T> out({B, m, n});
    for (std::size_t s = 0; s < B; ++s)
        kernel::gemm_nn_acc(a.data().data() + s * m * k, b.data().data() + s * k * n,
                            out.data().data() + s * m * n, m, k, n);
    auto an = a.node(), bn = b.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad() || b.requires_grad(), [an, bn, on, B, m, k, n] {
        for (std::size_t s = 0; s < B; ++s) {
            const T* g = on->grad.data() + s * m * n;
            if (an->requires_grad) {
                an->ensure_grad();
                kernel::gemm_nt_acc(g, bn->value.data() + s * k * n, an->grad.data() + s * m * k, m,
                                    n, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kernel::gemm_tn_acc(an->value.data() + s * m * k, g, bn->grad.data() + s * k * n, m,
                                    k, n);
            }
        }
    });
    return out;
}

// Batched C[s] = A[s] * B[s]^T; B is [B x n x k].
template <typename T>
Tensor<T> bmm_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2))
        throw DimensionError("bmm_nt: bad shapes " + detail::shape_str(a.shape()) + " and " +
                             detail::shape_str(b.shape()));
    const std::size_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
    Tensor<T> out({B, m, n});
    for (std::size_t s = 0; s < B; ++s)
        kernel::gemm_nt_acc(a.data().data() + s * m * k, b.data().data() + s * n * k,
                            out.data().data() + s * m * n, m, k, n);
    auto an = a.node(), bn = b.node(), on = out.node();
    detail::record_if_needed(out, a.requires_grad() || b.requires_grad(), [an, bn, on, B, m, k, n] {
        for (std::size_t s = 0; s < B; ++s) {
            const T* g = on->grad.data() + s * m * n;
            if (an->requires_grad) {
                an->ensure_grad();
                kernel::gemm_nn_acc(g, bn->value.data() + s * n * k, an->grad.data() + s * m * k, m,
                                    n, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kernel::gemm_tn_acc(g, an->value.data() + s * m * k, bn->grad.data() + s * n * k, m,
                                    n, k);
            }
        }
    });
    return out;
}

// Scaled softmax over the last axis of [bh x Lq x Lk] attention scores.
// Key positions with mask 0 receive exactly zero weight. The mask has one
// row of Lk entries per batch element; slice s belongs to batch s / h.
template <typename T>
Tensor<T> attention_softmax(const Tensor<T>& scores, const std::vector<std::uint8_t>& key_mask,
                            std::size_t num_heads, T scale_factor) {
    if (scores.ndim() != 3) throw DimensionError("attention_softmax: expects 3-D scores");
    const std::size_t bh = scores.dim(0), lq = scores.dim(1), lk = scores.dim(2);
    if (bh % num_heads != 0) throw DimensionError("attention_softmax: slice count not divisible");
    const std::size_t b = bh / num_heads;
    if (key_mask.size() != b * lk) throw DimensionError("attention_softmax: mask size mismatch");
    Tensor<T> out({bh, lq, lk});
    for (std::size_t s = 0; s < bh; ++s) {
        const std::uint8_t* mrow = key_mask.data() + (s / num_heads) * lk;
        for (std::size_t q = 0; q < lq; ++q) {
            const T* in = scores.data().data() + (s * lq + q) * lk;
            T* o = out.data().data() + (s * lq + q) * lk;
            T maxv = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j < lk; ++j)
                if (mrow[j] && in[j] * scale_factor > maxv) maxv = in[j] * scale_factor;
            if (maxv == -std::numeric_limits<T>::infinity())
                throw ValueError("attention_softmax: row with no valid key positions");
            T denom = T(0);
            for (std::size_t j = 0; j < lk; ++j) {
                if (mrow[j]) {
                    o[j] = std::exp(in[j] * scale_factor - maxv);
                    denom += o[j];
                } else {
                    o[j] = T(0);
                }
            }
            for (std::size_t j = 0; j < lk; ++j) o[j] /= denom;
        }
    }
    auto sn = scores.node(), on = out.node();
    detail::record_if_needed(out, scores.requires_grad(), [sn, on, bh, lq, lk, scale_factor] {
        if (!sn->requires_grad) return;
        sn->ensure_grad();
        for (std::size_t s = 0; s < bh; ++s)
            for (std::size_t q = 0; q < lq; ++q) {
                const T* y = on->value.data() + (s * lq + q) * lk;
                const T* g = on->grad.data() + (s * lq + q) * lk;
                T* ds = sn->grad.data() + (s * lq + q) * lk;
                T dot = T(0);
                for (std::size_t j = 0; j < lk; ++j) dot += g[j] * y[j];
                for (std::size_t j = 0; j < lk; ++j)
                    ds[j] += scale_factor * y[j] * (g[j] - dot);
            }
    });
    return out;
}

// Per-row normalization to zero mean / unit variance, then affine transform.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
    if (x.ndim() != 2) throw DimensionError("layer_norm: expects 2-D input");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (d == 0) throw DimensionError("layer_norm: feature dimension is zero");
    if (gain.numel() != d || bias.numel() != d)
        throw DimensionError("layer_norm: gain/bias length mismatch");
    if (eps < T(0)) throw ParameterError("layer_norm: eps must be nonnegative");
    Tensor<T> out({n, d});
    auto xhat = std::make_shared<std::vector<T>>(n * d);
    auto inv_std = std::make_shared<std::vector<T>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = x.data().data() + i * d;
        T mean = T(0);
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<T>(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<T>(d);
        // Degenerate zero-variance rows normalize to zero rather than NaN.
        T inv = (var + eps) > T(0) ? T(1) / std::sqrt(var + eps) : T(0);
        (*inv_std)[i] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            T xh = (row[j] - mean) * inv;
            (*xhat)[i * d + j] = xh;
            out.data()[i * d + j] = xh * gain.data()[j] + bias.data()[j];
        }
    }
    auto xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node();
    bool needs = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
    detail::record_if_needed(out, needs, [xn, gn, bn, on, xhat, inv_std, n, d] {
        for (std::size_t i = 0; i < n; ++i) {
            const T* g = on->grad.data() + i * d;
            const T* xh = xhat->data() + i * d;
            if (gn->requires_grad) {
                gn->ensure_grad();
                for (std::size_t j = 0; j < d; ++j) gn->grad[j] += g[j] * xh[j];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t j = 0; j < d; ++j) bn->grad[j] += g[j];
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                // dxhat_j = g_j * gain_j; dx = inv/d * (d*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
                T sum_dxh = T(0), sum_dxh_xh = T(0);
                for (std::size_t j = 0; j < d; ++j) {
                    T dxh = g[j] * gn->value[j];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh[j];
                }
                const T inv = (*inv_std)[i];
                for (std::size_t j = 0; j < d; ++j) {
                    T dxh = g[j] * gn->value[j];
                    xn->grad[i * d + j] +=
                        inv / static_cast<T>(d) *
                        (static_cast<T>(d) * dxh - sum_dxh - xh[j] * sum_dxh_xh);
                }
            }
        }
    });
    return out;
}

// Attention-mask-weighted average of token states: hidden is [b*L x d], mask
// has one byte per (batch, position). Rows with no valid token are an error.
template <typename T>
Tensor<T> mean_pool(const Tensor<T>& hidden, const std::vector<std::uint8_t>& mask, std::size_t b,
                    std::size_t L) {
    if (hidden.ndim() != 2 || hidden.dim(0) != b * L)
        throw DimensionError("mean_pool: hidden must be [b*L x d]");
    if (mask.size() != b * L) throw DimensionError("mean_pool: mask size mismatch");
    const std::size_t d = hidden.dim(1);
    Tensor<T> out({b, d});
    auto counts = std::make_shared<std::vector<T>>(b, T(0));
    for (std::size_t bi = 0; bi < b; ++bi) {
        T cnt = T(0);
        T* o = out.data().data() + bi * d;
        for (std::size_t l = 0; l < L; ++l) {
            if (!mask[bi * L + l]) continue;
            cnt += T(1);
            const T* row = hidden.data().data() + (bi * L + l) * d;
            for (std::size_t j = 0; j < d; ++j) o[j] += row[j];
        }
        if (cnt == T(0))
            throw ValueError("mean_pool: batch row " + std::to_string(bi) + " has no valid tokens");
        for (std::size_t j = 0; j < d; ++j) o[j] /= cnt;
        (*counts)[bi] = cnt;
    }
    auto hn = hidden.node(), on = out.node();
    auto mk = std::make_shared<std::vector<std::uint8_t>>(mask);
    detail::record_if_needed(out, hidden.requires_grad(), [hn, on, mk, counts, b, L, d] {
        if (!hn->requires_grad) return;
        hn->ensure_grad();
        for (std::size_t bi = 0; bi < b; ++bi) {
            const T* g = on->grad.data() + bi * d;
            const T inv = T(1) / (*counts)[bi];
            for (std::size_t l = 0; l < L; ++l) {
                if (!(*mk)[bi * L + l]) continue;
                T* dst = hn->grad.data() + (bi * L + l) * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += g[j] * inv;
            }
        }
    });
    return out;
}

// First-position embedding per batch row; position 0 must hold the cls token.
template <typename T>
Tensor<T> cls_pool(const Tensor<T>& hidden, std::size_t b, std::size_t L) {
    if (hidden.ndim() != 2 || hidden.dim(0) != b * L)
        throw DimensionError("cls_pool: hidden must be [b*L x d]");
    std::vector<std::int64_t> idx(b);
    for (std::size_t bi = 0; bi < b; ++bi) idx[bi] = static_cast<std::int64_t>(bi * L);
    return gather_rows(hidden, idx);
}

// Mean over rows of -sum_c q_c log softmax(logits)_c, with the smoothed
// target q = (1-eps)*onehot + eps/K.
template <typename T>
Tensor<T> cross_entropy_smoothed(const Tensor<T>& logits, const std::vector<std::int32_t>& labels,
                                 double eps) {
    if (logits.ndim() != 2) throw DimensionError("cross_entropy_smoothed: expects 2-D logits");
    const std::size_t n = logits.dim(0), K = logits.dim(1);
    if (labels.size() != n) throw DimensionError("cross_entropy_smoothed: label count mismatch");
    if (n == 0) throw ValueError("cross_entropy_smoothed: empty batch");
    if (eps < 0.0 || eps >= 1.0)
        throw ParameterError("cross_entropy_smoothed: epsilon must be in [0, 1)");
    for (auto y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= K)
            throw IndexError("cross_entropy_smoothed: label " + std::to_string(y) +
                             " out of range for K=" + std::to_string(K));
    const T unif = static_cast<T>(eps / static_cast<double>(K));
    const T hot = static_cast<T>(1.0 - eps);
    T total = T(0);
    auto probs = std::make_shared<std::vector<T>>(n * K);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits.data().data() + i * K;
        T maxv = row[0];
        for (std::size_t c = 1; c < K; ++c) maxv = std::max(maxv, row[c]);
        T denom = T(0);
        for (std::size_t c = 0; c < K; ++c) denom += std::exp(row[c] - maxv);
        const T lse = maxv + std::log(denom);
        T row_loss = T(0);
        for (std::size_t c = 0; c < K; ++c) {
            T q = unif + (static_cast<std::size_t>(labels[i]) == c ? hot : T(0));
            row_loss += q * (lse - row[c]);
            (*probs)[i * K + c] = std::exp(row[c] - maxv) / denom;
        }
        total += row_loss;
    }
    Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
    auto ln = logits.node(), on = out.node();
    auto lbl = std::make_shared<std::vector<std::int32_t>>(labels);
    detail::record_if_needed(out, logits.requires_grad(), [ln, on, probs, lbl, n, K, unif, hot] {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const T g = on->grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < K; ++c) {
                T q = unif + (static_cast<std::size_t>((*lbl)[i]) == c ? hot : T(0));
                ln->grad[i * K + c] += g * ((*probs)[i * K + c] - q);
            }
    });
    return out;
}

// Mean binary cross entropy on logits; stable for |s| well beyond 100.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const std::vector<std::uint8_t>& targets) {
    const std::size_t n = logits.numel();
    if (targets.size() != n) throw DimensionError("bce_with_logits: target count mismatch");
    if (n == 0) throw ValueError("bce_with_logits: empty batch");
    for (auto t : targets)
        if (t != 0 && t != 1) throw ValueError("bce_with_logits: targets must be 0 or 1");
    auto softplus = [](T x) { return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x))); };
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        T s = logits.data()[i];
        total += targets[i] ? softplus(-s) : softplus(s);
    }
    Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
    auto ln = logits.node(), on = out.node();
    auto tg = std::make_shared<std::vector<std::uint8_t>>(targets);
    detail::record_if_needed(out, logits.requires_grad(), [ln, on, tg, n] {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const T g = on->grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
            T s = ln->value[i];
            T sig = s >= T(0) ? T(1) / (T(1) + std::exp(-s))
                              : std::exp(s) / (T(1) + std::exp(s));
            ln->grad[i] += g * (sig - static_cast<T>((*tg)[i]));
        }
    });
    return out;
}

// y = x W + b as a convenience composition.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    return add_rowvec(matmul(x, w), b);
}

}  // namespace stg
