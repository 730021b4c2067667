#include "stg/synthetic.hpp"

#include <algorithm>
#include <string>

namespace stg {

namespace {

std::string padded(std::size_t value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

void SyntheticTgConfig::validate() const {
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (num_nodes < 2) throw ParameterError("synthetic: need at least 2 nodes");
    if (num_classes < 2) throw ParameterError("synthetic: need at least 2 classes");
    if (!in01(intra_edge_prob) || !in01(inter_edge_prob))
        throw ParameterError("synthetic: edge probabilities must be in [0, 1]");
    if (!in01(semantic_correlation))
        throw ParameterError("synthetic: semantic correlation must be in [0, 1]");
    if (intra_edge_prob == 0.0 && inter_edge_prob == 0.0)
        throw DataError("synthetic: p = q = 0 generates a degenerate edgeless graph");
    if (words_per_doc == 0) throw ParameterError("synthetic: words_per_doc must be positive");
    if (class_vocab_size == 0 || shared_vocab_size == 0)
        throw ParameterError("synthetic: vocabulary blocks must be non-empty");
}

TextualGraph generate_synthetic_tg(const SyntheticTgConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.num_nodes;
    const auto K = static_cast<std::size_t>(cfg.num_classes);
    RngState root(cfg.seed);

    TextualGraph graph;
    graph.num_classes = cfg.num_classes;
    graph.labels.resize(n);
    RngState class_rng = root.substream("classes");
    for (std::size_t v = 0; v < n; ++v)
        graph.labels[v] = static_cast<std::int32_t>(class_rng.next_below(K));

    RngState edge_rng = root.substream("edges");
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p =
                graph.labels[i] == graph.labels[j] ? cfg.intra_edge_prob : cfg.inter_edge_prob;
            if (edge_rng.next_double() < p)
                edges.emplace_back(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j));
        }
    graph.adj = build_csr(edges, n);

    RngState text_rng = root.substream("text");
    graph.texts.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto cls = static_cast<std::size_t>(graph.labels[v]);
        std::string doc;
        for (std::size_t w = 0; w < cfg.words_per_doc; ++w) {
            if (!doc.empty()) doc += ' ';
            if (text_rng.next_double() < cfg.semantic_correlation) {
                doc += 'c' + std::to_string(cls) + 'w' +
                       padded(text_rng.next_below(cfg.class_vocab_size), 4);
            } else {
                doc += 's' + padded(text_rng.next_below(cfg.shared_vocab_size), 4);
            }
        }
        graph.texts[v] = std::move(doc);
    }

    // 60/20/20 node splits by seeded shuffle
    RngState split_rng = root.substream("splits");
    std::vector<std::int64_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::int64_t>(i);
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[split_rng.next_below(i)]);
    const std::size_t n_train = (n * 6) / 10;
    const std::size_t n_valid = (n * 2) / 10;
    graph.train_nodes.assign(order.begin(), order.begin() + n_train);
    graph.valid_nodes.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
    graph.test_nodes.assign(order.begin() + n_train + n_valid, order.end());
    std::sort(graph.train_nodes.begin(), graph.train_nodes.end());
    std::sort(graph.valid_nodes.begin(), graph.valid_nodes.end());
    std::sort(graph.test_nodes.begin(), graph.test_nodes.end());

    if (cfg.make_edge_splits) {
        RngState esplit_rng = root.substream("edge-splits");
        graph.edge_splits = split_edges(graph.adj, cfg.edge_valid_frac, cfg.edge_test_frac,
                                        cfg.num_eval_negatives, esplit_rng);
    }
    graph.validate();
    return graph;
}

}  // namespace stg
