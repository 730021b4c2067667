#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stg/rng.hpp"
#include "stg/textgraph.hpp"
#include "stg/vocab.hpp"

namespace stg {

// One tokenized minibatch. input_ids and attention_mask are row-major
// [batch_size x max_len]; the mask is 1 on a prefix and 0 on the pad suffix
// of each row, and every row has at least the cls token.
struct TokenBatch {
    std::vector<std::int32_t> input_ids;
    std::vector<std::uint8_t> attention_mask;
    std::vector<std::int64_t> node_ids;
    std::size_t batch_size = 0;
    std::size_t max_len = 0;
};

// Tokenizes and batches node texts. When a shuffle rng is supplied the epoch
// order is a seeded permutation; otherwise nodes are batched in the given
// order. Each epoch covers every node exactly once; the last batch may be
// short. Batches are trimmed to their longest row (pad-invariance makes this
// equivalent to fixed-length batches).
std::vector<TokenBatch> batch_texts(const TextualGraph& graph,
                                    const std::vector<std::int64_t>& node_ids, const Vocab& vocab,
                                    std::size_t max_len, std::size_t batch_size,
                                    RngState* shuffle_rng = nullptr);

}  // namespace stg
