#pragma once

#include <cstdint>

#include "stg/textgraph.hpp"

namespace stg {

// Stochastic-block-model textual graph with a controllable correlation
// between document words and node labels. Each document draws words_per_doc
// words; a word comes from the node class's private vocabulary block with
// probability semantic_correlation and from the shared block otherwise.
struct SyntheticTgConfig {
    std::size_t num_nodes = 1000;
    std::int32_t num_classes = 4;
    double intra_edge_prob = 0.2;   // same-class pair
    double inter_edge_prob = 0.02;  // cross-class pair
    std::size_t words_per_doc = 40;
    std::size_t class_vocab_size = 200;
    std::size_t shared_vocab_size = 500;
    double semantic_correlation = 0.8;  // rho in [0, 1]
    std::uint64_t seed = 1;

    // Link-task extras: hold out edges and sample fixed eval negatives.
    bool make_edge_splits = false;
    double edge_valid_frac = 0.1;
    double edge_test_frac = 0.1;
    std::size_t num_eval_negatives = 100;

    void validate() const;
};

TextualGraph generate_synthetic_tg(const SyntheticTgConfig& cfg);

}  // namespace stg
