#include "stg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace stg {

bool CsrAdjacency::has_edge(std::int64_t u, std::int64_t v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<Edge> CsrAdjacency::undirected_edges() const {
    std::vector<Edge> out;
    out.reserve(num_undirected_edges());
    for (std::int64_t u = 0; u < static_cast<std::int64_t>(num_nodes); ++u)
        for (std::int64_t v : neighbors(u))
            if (u < v) out.emplace_back(u, v);
    return out;
}

CsrAdjacency build_csr(const std::vector<Edge>& edges, std::size_t num_nodes) {
    std::vector<Edge> directed;
    directed.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || u >= static_cast<std::int64_t>(num_nodes) ||
            v >= static_cast<std::int64_t>(num_nodes))
            throw IndexError("build_csr: edge endpoint out of range: (" + std::to_string(u) +
                             ", " + std::to_string(v) + ")");
        if (u == v) continue;  // self-loops dropped
        directed.emplace_back(u, v);
        directed.emplace_back(v, u);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    CsrAdjacency adj;
    adj.num_nodes = num_nodes;
    adj.row_ptr.assign(num_nodes + 1, 0);
    adj.col_idx.reserve(directed.size());
    for (auto [u, v] : directed) ++adj.row_ptr[u + 1];
    for (std::size_t i = 0; i < num_nodes; ++i) adj.row_ptr[i + 1] += adj.row_ptr[i];
    for (auto [u, v] : directed) adj.col_idx.push_back(v);
    return adj;
}

NormalizedAdjacency gcn_normalize(const CsrAdjacency& adj) {
    const std::size_t n = adj.num_nodes;
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t v = 0; v < n; ++v)
        inv_sqrt_deg[v] = 1.0 / std::sqrt(static_cast<double>(adj.degree(v) + 1));

    NormalizedAdjacency out;
    out.num_nodes = n;
    out.row_ptr.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v)
        out.row_ptr[v + 1] = out.row_ptr[v] + static_cast<std::int64_t>(adj.degree(v)) + 1;
    out.col_idx.reserve(out.row_ptr[n]);
    out.weights.reserve(out.row_ptr[n]);
    for (std::int64_t v = 0; v < static_cast<std::int64_t>(n); ++v) {
        bool self_emitted = false;
        auto emit = [&](std::int64_t u) {
            out.col_idx.push_back(u);
            out.weights.push_back(inv_sqrt_deg[v] * inv_sqrt_deg[u]);
        };
        for (std::int64_t u : adj.neighbors(v)) {
            if (!self_emitted && u > v) {
                emit(v);
                self_emitted = true;
            }
            emit(u);
        }
        if (!self_emitted) emit(v);
    }
    return out;
}

std::vector<SampledBlock> sample_neighbors(const CsrAdjacency& adj,
                                           const std::vector<std::int64_t>& seed_nodes,
                                           const std::vector<std::size_t>& fanouts,
                                           RngState& rng) {
    if (seed_nodes.empty()) throw DataError("sample_neighbors: empty seed set");
    for (auto v : seed_nodes)
        if (v < 0 || v >= static_cast<std::int64_t>(adj.num_nodes))
            throw IndexError("sample_neighbors: seed out of range");

    std::vector<SampledBlock> blocks(fanouts.size());
    std::vector<std::int64_t> frontier = seed_nodes;
    // Build output-most block first, then walk toward the inputs.
    for (std::size_t li = fanouts.size(); li-- > 0;) {
        SampledBlock& block = blocks[li];
        block.targets = frontier;
        block.row_ptr.assign(block.targets.size() + 1, 0);
        std::vector<std::vector<std::int64_t>> sampled(block.targets.size());
        for (std::size_t t = 0; t < block.targets.size(); ++t) {
            auto nb = adj.neighbors(block.targets[t]);
            const std::size_t take = std::min(fanouts[li], nb.size());
            if (take == nb.size()) {
                sampled[t].assign(nb.begin(), nb.end());
            } else {
                // partial Fisher-Yates over a scratch copy
                std::vector<std::int64_t> scratch(nb.begin(), nb.end());
                for (std::size_t i = 0; i < take; ++i) {
                    std::size_t j = i + static_cast<std::size_t>(
                                            rng.next_below(scratch.size() - i));
                    std::swap(scratch[i], scratch[j]);
                }
                scratch.resize(take);
                std::sort(scratch.begin(), scratch.end());
                sampled[t] = std::move(scratch);
            }
        }
        // sources = sorted unique targets plus sampled neighbors
        std::vector<std::int64_t> sources = block.targets;
        for (auto& s : sampled) sources.insert(sources.end(), s.begin(), s.end());
        std::sort(sources.begin(), sources.end());
        sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
        block.sources = sources;
        auto local = [&](std::int64_t v) {
            return static_cast<std::int64_t>(
                std::lower_bound(sources.begin(), sources.end(), v) - sources.begin());
        };
        block.self_index.resize(block.targets.size());
        for (std::size_t t = 0; t < block.targets.size(); ++t) {
            block.self_index[t] = local(block.targets[t]);
            for (auto v : sampled[t]) block.col_local.push_back(local(v));
            block.row_ptr[t + 1] = static_cast<std::int64_t>(block.col_local.size());
        }
        frontier = block.sources;
    }
    return blocks;
}

EdgeSplits split_edges(const CsrAdjacency& adj, double valid_frac, double test_frac,
                       std::size_t num_eval_negatives, RngState& rng) {
    if (valid_frac < 0 || test_frac < 0 || valid_frac + test_frac >= 1.0)
        throw ParameterError("split_edges: fractions must be nonnegative and sum below 1");
    const std::size_t n = adj.num_nodes;
    std::vector<Edge> edges = adj.undirected_edges();
    const std::size_t num_edges = edges.size();

    // shuffle, then slice off the held-out sets
    for (std::size_t i = num_edges; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(edges[i - 1], edges[j]);
    }
    const std::size_t n_valid = static_cast<std::size_t>(valid_frac * num_edges);
    const std::size_t n_test = static_cast<std::size_t>(test_frac * num_edges);

    EdgeSplits out;
    out.num_eval_negatives = num_eval_negatives;
    out.valid_edges.assign(edges.begin(), edges.begin() + n_valid);
    out.test_edges.assign(edges.begin() + n_valid, edges.begin() + n_valid + n_test);
    out.train_edges.assign(edges.begin() + n_valid + n_test, edges.end());
    out.message_graph = build_csr(out.train_edges, n);

    if (num_eval_negatives > 0 && (n_valid + n_test) > 0) {
        const std::size_t possible = n * (n - 1) / 2;
        if (possible <= num_edges + num_eval_negatives)
            throw ParameterError("split_edges: graph too dense for requested negatives");
        auto sample_table = [&](std::size_t count) {
            std::vector<std::vector<Edge>> tables(count);
            for (auto& table : tables) {
                std::set<Edge> seen;
                table.reserve(num_eval_negatives);
                std::size_t attempts = 0;
                const std::size_t max_attempts = 1000 * num_eval_negatives + 1000;
                while (table.size() < num_eval_negatives) {
                    if (++attempts > max_attempts)
                        throw ParameterError("split_edges: negative sampling exhausted retries");
                    std::int64_t a = static_cast<std::int64_t>(rng.next_below(n));
                    std::int64_t b = static_cast<std::int64_t>(rng.next_below(n));
                    if (a == b) continue;
                    if (a > b) std::swap(a, b);
                    if (adj.has_edge(a, b)) continue;
                    if (!seen.insert({a, b}).second) continue;
                    table.emplace_back(a, b);
                }
            }
            return tables;
        };
        out.valid_negatives = sample_table(out.valid_edges.size());
        out.test_negatives = sample_table(out.test_edges.size());
    }
    return out;
}

}  // namespace stg
