#pragma once

#include <memory>

#include "stg/graph.hpp"
#include "stg/ops.hpp"

namespace stg {

// Weighted CSR matrix with a precomputed transpose so spmm can backpropagate
// through arbitrary (non-symmetric) weightings.
template <typename T>
struct SparseMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<std::int64_t> row_ptr, col_idx;
    std::vector<T> vals;
    std::vector<std::int64_t> t_row_ptr, t_col_idx;
    std::vector<T> t_vals;

    void build_transpose() {
        t_row_ptr.assign(cols + 1, 0);
        t_col_idx.assign(vals.size(), 0);
        t_vals.assign(vals.size(), T(0));
        for (auto c : col_idx) ++t_row_ptr[c + 1];
        for (std::size_t i = 0; i < cols; ++i) t_row_ptr[i + 1] += t_row_ptr[i];
        std::vector<std::int64_t> cursor(t_row_ptr.begin(), t_row_ptr.end() - 1);
        for (std::size_t r = 0; r < rows; ++r)
            for (auto e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
                auto& slot = cursor[col_idx[e]];
                t_col_idx[slot] = static_cast<std::int64_t>(r);
                t_vals[slot] = vals[e];
                ++slot;
            }
    }
};

template <typename T>
std::shared_ptr<const SparseMatrix<T>> sparse_from_normalized(const NormalizedAdjacency& norm) {
    auto m = std::make_shared<SparseMatrix<T>>();
    m->rows = m->cols = norm.num_nodes;
    m->row_ptr = norm.row_ptr;
    m->col_idx = norm.col_idx;
    m->vals.reserve(norm.weights.size());
    for (double w : norm.weights) m->vals.push_back(static_cast<T>(w));
    m->build_transpose();
    return m;
}

// Row-stochastic neighbor averaging: row v holds 1/deg(v) per neighbor.
// Isolated nodes get an empty row (their aggregated term is zero).
template <typename T>
std::shared_ptr<const SparseMatrix<T>> mean_aggregator(const CsrAdjacency& adj) {
    auto m = std::make_shared<SparseMatrix<T>>();
    m->rows = m->cols = adj.num_nodes;
    m->row_ptr = adj.row_ptr;
    m->col_idx = adj.col_idx;
    m->vals.resize(adj.col_idx.size());
    for (std::int64_t v = 0; v < static_cast<std::int64_t>(adj.num_nodes); ++v) {
        const std::size_t deg = adj.degree(v);
        for (auto e = adj.row_ptr[v]; e < adj.row_ptr[v + 1]; ++e)
            m->vals[e] = static_cast<T>(1.0 / static_cast<double>(deg));
    }
    m->build_transpose();
    return m;
}

// Block-local mean aggregator over sampled neighbors: rows index targets,
// columns index sources.
template <typename T>
std::shared_ptr<const SparseMatrix<T>> mean_aggregator_from_block(const SampledBlock& block) {
    auto m = std::make_shared<SparseMatrix<T>>();
    m->rows = block.targets.size();
    m->cols = block.sources.size();
    m->row_ptr = block.row_ptr;
    m->col_idx = block.col_local;
    m->vals.resize(block.col_local.size());
    for (std::size_t t = 0; t < block.targets.size(); ++t) {
        const auto deg = block.row_ptr[t + 1] - block.row_ptr[t];
        for (auto e = block.row_ptr[t]; e < block.row_ptr[t + 1]; ++e)
            m->vals[e] = static_cast<T>(1.0 / static_cast<double>(deg));
    }
    m->build_transpose();
    return m;
}

// Sparse-dense product out = A H with reverse-mode support for H.
template <typename T>
Tensor<T> spmm(std::shared_ptr<const SparseMatrix<T>> a, const Tensor<T>& h) {
    if (h.ndim() != 2 || h.dim(0) != a->cols)
        throw DimensionError("spmm: dense rows do not match sparse columns");
    const std::size_t d = h.dim(1);
    Tensor<T> out({a->rows, d});
    for (std::size_t r = 0; r < a->rows; ++r) {
        T* dst = out.data().data() + r * d;
        for (auto e = a->row_ptr[r]; e < a->row_ptr[r + 1]; ++e) {
            const T w = a->vals[e];
            const T* src = h.data().data() + static_cast<std::size_t>(a->col_idx[e]) * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += w * src[j];
        }
    }
    auto hn = h.node(), on = out.node();
    detail::record_if_needed(out, h.requires_grad(), [a, hn, on, d] {
        if (!hn->requires_grad) return;
        hn->ensure_grad();
        for (std::size_t c = 0; c < a->cols; ++c) {
            T* dst = hn->grad.data() + c * d;
            for (auto e = a->t_row_ptr[c]; e < a->t_row_ptr[c + 1]; ++e) {
                const T w = a->t_vals[e];
                const T* src = on->grad.data() + static_cast<std::size_t>(a->t_col_idx[e]) * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += w * src[j];
            }
        }
    });
    return out;
}

}  // namespace stg
