#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stg/batch.hpp"
#include "stg/encoder.hpp"
#include "stg/heads.hpp"
#include "stg/lora.hpp"
#include "stg/metrics.hpp"

namespace stg {

// Encoder finetuning knobs. validate() enforces the search-space ranges and
// is called when a config enters through the CLI; programmatic callers may
// construct degenerate configs (e.g. zero learning rate) for tests.
struct Stage1Config {
    double learning_rate = 1e-4;
    double weight_decay = 1e-6;
    double label_smoothing = 0.1;  // node classification only
    double header_dropout = 0.3;
    bool use_lora = true;
    LoraConfig lora;
    std::size_t epochs = 5;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    std::size_t max_len = 64;
    // link task
    std::size_t link_pairs_per_epoch = 0;  // 0 = every train edge each epoch
    std::size_t link_negatives_per_pos = 1;
    std::size_t link_head_hidden = 64;

    void validate(bool link_task = false) const;
};

struct Stage1EpochRow {
    std::size_t epoch = 0;
    double loss = 0.0;
    double train_metric = 0.0;
    double valid_metric = 0.0;
};

struct Stage1Result {
    std::vector<Stage1EpochRow> epochs;
    std::size_t best_epoch = 0;
    double best_valid = 0.0;
};

// Supervised finetuning on node classification: pooled embeddings feed a
// dropout+linear head trained with smoothed cross entropy. Only the
// trainable partition steps; the model is left at its best-valid epoch.
Stage1Result finetune_cls(const TextualGraph& graph, EncoderModel<float>& model,
                          NodeClsHead<float>& head, const Vocab& vocab, const Stage1Config& cfg);

// Supervised finetuning on link prediction: each step scores an equal number
// of train edges and uniformly sampled non-edges through the pair head with
// the logit BCE loss. Valid MRR drives best-epoch selection.
Stage1Result finetune_link(const TextualGraph& graph, EncoderModel<float>& model,
                           LinkHead<float>& head, const Vocab& vocab, const Stage1Config& cfg);

// Eval-mode split accuracy of encoder+head (node classification).
double encoder_cls_accuracy(const TextualGraph& graph, EncoderModel<float>& model,
                            NodeClsHead<float>& head, const Vocab& vocab,
                            const std::vector<std::int64_t>& nodes, std::size_t max_len,
                            std::size_t batch_size);

// Eval-mode MRR of encoder+head pair scores over an edge split.
double encoder_link_mrr(const TextualGraph& graph, EncoderModel<float>& model,
                        LinkHead<float>& head, const Vocab& vocab,
                        const std::vector<Edge>& positives,
                        const std::vector<std::vector<Edge>>& negative_tables,
                        std::size_t max_len, std::size_t batch_size);

}  // namespace stg
