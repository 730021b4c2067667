#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "stg/graph.hpp"
#include "stg/rng.hpp"

using namespace stg;

namespace {

// Dense adjacency oracle for CSR construction.
std::vector<std::vector<int>> dense_from_edges(const std::vector<Edge>& edges, std::size_t n) {
    std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
    for (auto [u, v] : edges) {
        if (u == v) continue;
        a[u][v] = 1;
        a[v][u] = 1;
    }
    return a;
}

// Dense D^-1/2 (A+I) D^-1/2 oracle.
std::vector<std::vector<double>> dense_gcn_norm(const std::vector<std::vector<int>>& a) {
    const std::size_t n = a.size();
    std::vector<double> deg(n, 1.0);  // self-loop augmented
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
    std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double aij = (i == j) ? 1.0 : static_cast<double>(a[i][j]);
            c[i][j] = aij / std::sqrt(deg[i] * deg[j]);
        }
    return c;
}

std::vector<Edge> random_edges(std::size_t n, std::size_t count, RngState& rng) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < count; ++i) {
        auto u = static_cast<std::int64_t>(rng.next_below(n));
        auto v = static_cast<std::int64_t>(rng.next_below(n));
        edges.emplace_back(u, v);
    }
    return edges;
}

}  // namespace

TEST_CASE("build_csr basic examples") {
    auto adj = build_csr({{0, 1}}, 2);
    CHECK(adj.row_ptr == std::vector<std::int64_t>{0, 1, 2});
    CHECK(adj.col_idx == std::vector<std::int64_t>{1, 0});

    auto dup = build_csr({{0, 1}, {1, 0}, {0, 1}}, 2);
    CHECK(dup.col_idx == std::vector<std::int64_t>{1, 0});

    auto self = build_csr({{1, 1}, {0, 1}}, 2);
    CHECK(self.col_idx == std::vector<std::int64_t>{1, 0});

    CHECK_THROWS_AS(build_csr({{0, 5}}, 2), IndexError);
}

TEST_CASE("build_csr matches dense oracle on random input") {
    RngState rng(1);
    auto edges = random_edges(30, 200, rng);
    auto adj = build_csr(edges, 30);
    auto dense = dense_from_edges(edges, 30);
    for (std::int64_t u = 0; u < 30; ++u) {
        std::set<std::int64_t> row(adj.neighbors(u).begin(), adj.neighbors(u).end());
        for (std::int64_t v = 0; v < 30; ++v)
            CHECK(static_cast<int>(row.count(v)) == dense[u][v]);
    }
}

TEST_CASE("gcn_normalize examples") {
    auto isolated = gcn_normalize(build_csr({}, 1));
    REQUIRE(isolated.col_idx.size() == 1);
    CHECK(isolated.col_idx[0] == 0);
    CHECK(isolated.weights[0] == doctest::Approx(1.0));

    auto path2 = gcn_normalize(build_csr({{0, 1}}, 2));
    REQUIRE(path2.weights.size() == 4);
    for (double w : path2.weights) CHECK(w == doctest::Approx(0.5));
}

TEST_CASE("gcn_normalize matches dense oracle and is symmetric") {
    RngState rng(2);
    auto edges = random_edges(10, 25, rng);
    auto adj = build_csr(edges, 10);
    auto norm = gcn_normalize(adj);
    auto want = dense_gcn_norm(dense_from_edges(edges, 10));
    std::vector<std::vector<double>> got(10, std::vector<double>(10, 0.0));
    for (std::int64_t u = 0; u < 10; ++u)
        for (auto e = norm.row_ptr[u]; e < norm.row_ptr[u + 1]; ++e)
            got[u][norm.col_idx[e]] = norm.weights[e];
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            CHECK(std::abs(got[i][j] - want[i][j]) < 1e-7);
            CHECK(std::abs(got[i][j] - got[j][i]) < 1e-9);
        }
}

TEST_CASE("gcn_normalize spectral radius at most one") {
    RngState rng(3);
    auto edges = random_edges(200, 800, rng);
    auto norm = gcn_normalize(build_csr(edges, 200));
    // power iteration on the sparse normalized matrix
    std::vector<double> x(200, 1.0), y(200);
    double lambda = 0.0;
    for (int it = 0; it < 300; ++it) {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::int64_t u = 0; u < 200; ++u)
            for (auto e = norm.row_ptr[u]; e < norm.row_ptr[u + 1]; ++e)
                y[u] += norm.weights[e] * x[norm.col_idx[e]];
        double nrm = 0;
        for (double v : y) nrm += v * v;
        nrm = std::sqrt(nrm);
        lambda = nrm;
        for (std::size_t i = 0; i < y.size(); ++i) x[i] = y[i] / nrm;
    }
    CHECK(lambda <= 1.0 + 1e-9);
}

TEST_CASE("sample_neighbors exhaustive fanout is complete and deterministic") {
    RngState rng(4);
    auto adj = build_csr(random_edges(20, 60, rng), 20);
    std::size_t max_deg = 0;
    for (std::int64_t v = 0; v < 20; ++v) max_deg = std::max(max_deg, adj.degree(v));

    RngState s1(9), s2(9);
    auto blocks1 = sample_neighbors(adj, {0, 3, 7}, {max_deg, max_deg}, s1);
    auto blocks2 = sample_neighbors(adj, {0, 3, 7}, {max_deg, max_deg}, s2);
    REQUIRE(blocks1.size() == 2);
    CHECK(blocks1[0].col_local == blocks2[0].col_local);
    CHECK(blocks1[0].sources == blocks2[0].sources);

    // with exhaustive fanout every true neighbor of each target appears
    for (const auto& block : blocks1)
        for (std::size_t t = 0; t < block.targets.size(); ++t) {
            auto nb = adj.neighbors(block.targets[t]);
            CHECK(static_cast<std::size_t>(block.row_ptr[t + 1] - block.row_ptr[t]) == nb.size());
            for (auto e = block.row_ptr[t]; e < block.row_ptr[t + 1]; ++e) {
                auto global = block.sources[block.col_local[e]];
                CHECK(adj.has_edge(block.targets[t], global));
            }
        }
}

TEST_CASE("sample_neighbors isolated seed and containment property") {
    auto adj = build_csr({{0, 1}}, 3);  // node 2 isolated
    RngState rng(5);
    auto blocks = sample_neighbors(adj, {2}, {4}, rng);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].row_ptr == std::vector<std::int64_t>{0, 0});
    CHECK(blocks[0].targets == std::vector<std::int64_t>{2});

    CHECK_THROWS_AS(sample_neighbors(adj, {}, {2}, rng), DataError);

    // sampled multiset is a subset of true neighbors; seeds present as targets
    RngState big(6);
    auto badj = build_csr(random_edges(50, 300, big), 50);
    for (int trial = 0; trial < 100; ++trial) {
        RngState trng(100 + trial);
        std::vector<std::int64_t> seeds = {static_cast<std::int64_t>(trng.next_below(50)),
                                           static_cast<std::int64_t>(trng.next_below(50))};
        auto bl = sample_neighbors(badj, seeds, {3, 2}, trng);
        CHECK(bl.back().targets == seeds);
        for (const auto& block : bl)
            for (std::size_t t = 0; t < block.targets.size(); ++t) {
                std::set<std::int64_t> seen;
                for (auto e = block.row_ptr[t]; e < block.row_ptr[t + 1]; ++e) {
                    auto global = block.sources[block.col_local[e]];
                    CHECK(badj.has_edge(block.targets[t], global));
                    CHECK(seen.insert(global).second);  // without replacement
                }
            }
    }
}

TEST_CASE("split_edges protocol") {
    RngState rng(7);
    auto adj = build_csr(random_edges(60, 500, rng), 60);

    SUBCASE("zero fractions keep the full message graph") {
        RngState r(1);
        auto splits = split_edges(adj, 0.0, 0.0, 0, r);
        CHECK(splits.valid_edges.empty());
        CHECK(splits.test_edges.empty());
        CHECK(splits.message_graph.col_idx == adj.col_idx);
        CHECK(splits.message_graph.row_ptr == adj.row_ptr);
    }

    SUBCASE("negatives absent from original edges, splits partition") {
        RngState r(2);
        auto splits = split_edges(adj, 0.1, 0.1, 20, r);
        std::set<Edge> all_edges;
        for (auto e : adj.undirected_edges()) all_edges.insert(e);

        std::set<Edge> seen;
        std::size_t total = 0;
        for (const auto* part : {&splits.train_edges, &splits.valid_edges, &splits.test_edges}) {
            total += part->size();
            for (auto e : *part) {
                CHECK(all_edges.count(e) == 1);
                CHECK(seen.insert(e).second);
            }
        }
        CHECK(total == adj.num_undirected_edges());

        for (const auto* tables : {&splits.valid_negatives, &splits.test_negatives})
            for (const auto& table : *tables) {
                CHECK(table.size() == 20);
                for (auto e : table) CHECK(all_edges.count(e) == 0);
            }

        // message graph contains no held-out positive
        for (const auto* part : {&splits.valid_edges, &splits.test_edges})
            for (auto e : *part) CHECK_FALSE(splits.message_graph.has_edge(e.first, e.second));
    }

    SUBCASE("bad fractions rejected") {
        RngState r(3);
        CHECK_THROWS_AS(split_edges(adj, 0.6, 0.5, 10, r), ParameterError);
    }

    SUBCASE("reproducible bit for bit") {
        RngState r1(4), r2(4);
        auto a = split_edges(adj, 0.1, 0.1, 5, r1);
        auto b = split_edges(adj, 0.1, 0.1, 5, r2);
        CHECK(a.train_edges == b.train_edges);
        CHECK(a.valid_negatives == b.valid_negatives);
    }
}
