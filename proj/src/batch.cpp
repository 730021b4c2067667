#include "stg/batch.hpp"

#include <algorithm>

namespace stg {

std::vector<TokenBatch> batch_texts(const TextualGraph& graph,
                                    const std::vector<std::int64_t>& node_ids, const Vocab& vocab,
                                    std::size_t max_len, std::size_t batch_size,
                                    RngState* shuffle_rng) {
    if (node_ids.empty()) throw DataError("batch_texts: empty node set");
    if (batch_size == 0) throw ParameterError("batch_texts: batch_size must be positive");
    for (auto v : node_ids)
        if (v < 0 || v >= static_cast<std::int64_t>(graph.num_nodes()))
            throw IndexError("batch_texts: node id " + std::to_string(v) + " out of range");

    std::vector<std::int64_t> order = node_ids;
    if (shuffle_rng != nullptr)
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng->next_below(i)]);

    std::vector<TokenBatch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t b = std::min(batch_size, order.size() - start);
        std::vector<std::vector<std::int32_t>> ids(b);
        std::vector<std::vector<std::uint8_t>> masks(b);
        std::size_t longest = 1;
        for (std::size_t i = 0; i < b; ++i) {
            auto [row_ids, row_mask] = tokenize(graph.texts[order[start + i]], vocab, max_len);
            std::size_t valid = 0;
            while (valid < max_len && row_mask[valid]) ++valid;
            longest = std::max(longest, valid);
            ids[i] = std::move(row_ids);
            masks[i] = std::move(row_mask);
        }
        TokenBatch batch;
        batch.batch_size = b;
        batch.max_len = longest;
        batch.node_ids.assign(order.begin() + start, order.begin() + start + b);
        batch.input_ids.resize(b * longest);
        batch.attention_mask.resize(b * longest);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t l = 0; l < longest; ++l) {
                batch.input_ids[i * longest + l] = ids[i][l];
                batch.attention_mask[i * longest + l] = masks[i][l];
            }
        batches.push_back(std::move(batch));
    }
    return batches;
}

}  // namespace stg
