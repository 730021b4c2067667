#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "stg/error.hpp"
#include "stg/rng.hpp"

namespace stg {

using Edge = std::pair<std::int64_t, std::int64_t>;

// Compressed sparse rows over an undirected, deduplicated, self-loop-free
// adjacency. Symmetric pairs are stored in both directions and each row's
// column indices are strictly increasing.
struct CsrAdjacency {
    std::size_t num_nodes = 0;
    std::vector<std::int64_t> row_ptr;  // size num_nodes + 1
    std::vector<std::int64_t> col_idx;

    std::size_t num_directed_edges() const { return col_idx.size(); }
    std::size_t num_undirected_edges() const { return col_idx.size() / 2; }

    std::size_t degree(std::int64_t v) const {
        return static_cast<std::size_t>(row_ptr[v + 1] - row_ptr[v]);
    }
    std::span<const std::int64_t> neighbors(std::int64_t v) const {
        return {col_idx.data() + row_ptr[v], degree(v)};
    }
    bool has_edge(std::int64_t u, std::int64_t v) const;

    // Unique undirected pairs with u < v, in row order.
    std::vector<Edge> undirected_edges() const;
};

CsrAdjacency build_csr(const std::vector<Edge>& edges, std::size_t num_nodes);

// CSR structure plus per-edge weights 1/sqrt(d^_i d^_j) with self-loops
// added and d^ the self-loop-augmented degree.
struct NormalizedAdjacency {
    std::size_t num_nodes = 0;
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int64_t> col_idx;
    std::vector<double> weights;
};

NormalizedAdjacency gcn_normalize(const CsrAdjacency& adj);

// One bipartite layer of a sampled computation graph. Outputs are computed
// for `targets`; their sampled neighbors live in `sources` (which also
// contains every target, at position self_index[t]). Neighbor lists use
// local source indices and are sorted so aggregation order matches the
// full-batch path.
struct SampledBlock {
    std::vector<std::int64_t> targets;
    std::vector<std::int64_t> sources;
    std::vector<std::int64_t> row_ptr;     // size targets.size() + 1
    std::vector<std::int64_t> col_local;   // local indices into sources
    std::vector<std::int64_t> self_index;  // local index of each target
};

// Uniform neighbor sampling without replacement, min(fanout, degree) per
// target. Blocks are returned input-most first; blocks.back().targets are
// the seeds.
std::vector<SampledBlock> sample_neighbors(const CsrAdjacency& adj,
                                           const std::vector<std::int64_t>& seed_nodes,
                                           const std::vector<std::size_t>& fanouts, RngState& rng);

// Held-out edge protocol for link prediction. Eval positives are ranked
// against fixed per-positive tables of uniformly sampled non-edges.
struct EdgeSplits {
    std::vector<Edge> train_edges;  // u < v
    std::vector<Edge> valid_edges;
    std::vector<Edge> test_edges;
    std::vector<std::vector<Edge>> valid_negatives;  // one table per valid positive
    std::vector<std::vector<Edge>> test_negatives;
    std::size_t num_eval_negatives = 0;
    CsrAdjacency message_graph;  // train edges only; never contains eval positives
};

EdgeSplits split_edges(const CsrAdjacency& adj, double valid_frac, double test_frac,
                       std::size_t num_eval_negatives, RngState& rng);

}  // namespace stg
