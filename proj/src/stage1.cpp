#include "stg/stage1.hpp"

#include <algorithm>
#include <cmath>

#include "stg/optim.hpp"

namespace stg {

namespace {

bool discrete_ok(double v, std::initializer_list<double> allowed) {
    for (double a : allowed)
        if (v == a) return true;
    return false;
}

std::vector<Tensor<float>> snapshot(const std::vector<Tensor<float>>& params) {
    std::vector<Tensor<float>> out;
    out.reserve(params.size());
    for (auto& p : params) out.push_back(p.clone());
    return out;
}

void restore(std::vector<Tensor<float>>& params, const std::vector<Tensor<float>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].data() = snap[i].data();
}

// Eval-mode pooled embeddings for the listed nodes, row per node-id order.
std::vector<float> embed_nodes(const TextualGraph& graph, const EncoderModel<float>& model,
                               const Vocab& vocab, const std::vector<std::int64_t>& nodes,
                               std::size_t max_len, std::size_t batch_size, std::size_t* d_out) {
    NoGradScope<float> inference;
    const std::size_t d = model.cfg.d_model;
    *d_out = d;
    std::vector<float> rows(nodes.size() * d, 0.0f);
    std::size_t cursor = 0;
    for (const auto& batch : batch_texts(graph, nodes, vocab, max_len, batch_size)) {
        Tensor<float> pooled = encode_batch(model, batch, false);
        for (std::size_t bi = 0; bi < batch.batch_size; ++bi)
            std::copy_n(pooled.data().data() + bi * d, d, rows.data() + (cursor + bi) * d);
        cursor += batch.batch_size;
    }
    return rows;
}

}  // namespace

void Stage1Config::validate(bool link_task) const {
    if (learning_rate < 1e-6 || learning_rate > 1e-4)
        throw ConfigError("stage1: learning rate must be in [1e-6, 1e-4]");
    if (weight_decay < 1e-7 || weight_decay > 1e-4)
        throw ConfigError("stage1: weight decay must be in [1e-7, 1e-4]");
    if (!link_task && (label_smoothing < 0.1 || label_smoothing > 0.7))
        throw ConfigError("stage1: label smoothing must be in [0.1, 0.7]");
    if (header_dropout < 0.1 || header_dropout > 0.8)
        throw ConfigError("stage1: header dropout must be in [0.1, 0.8]");
    if (use_lora) {
        lora.validate();
        if (!discrete_ok(static_cast<double>(lora.rank), {1, 2, 4, 8}))
            throw ConfigError("stage1: lora rank must be one of {1,2,4,8}");
        if (!discrete_ok(lora.alpha, {4, 8, 16, 32}))
            throw ConfigError("stage1: lora alpha must be one of {4,8,16,32}");
        if (lora.adapter_dropout < 0.1 || lora.adapter_dropout > 0.8)
            throw ConfigError("stage1: lora dropout must be in [0.1, 0.8]");
    }
    if (epochs == 0 || batch_size == 0) throw ConfigError("stage1: epochs/batch_size positive");
    if (max_len < 2) throw ConfigError("stage1: max_len must be at least 2");
    if (link_negatives_per_pos == 0)
        throw ParameterError("stage1: need at least one negative per positive");
}

Stage1Result finetune_cls(const TextualGraph& graph, EncoderModel<float>& model,
                          NodeClsHead<float>& head, const Vocab& vocab, const Stage1Config& cfg) {
    if (!graph.has_labels()) throw DataError("finetune_cls: graph has no labels");
    if (graph.train_nodes.empty()) throw DataError("finetune_cls: empty train split");
    for (auto v : graph.train_nodes)
        if (graph.labels[v] < 0) throw DataError("finetune_cls: unlabeled train node");

    RngState root(cfg.seed);
    RngState shuffle_rng = root.substream("s1-shuffle");
    RngState drop_rng = root.substream("s1-dropout");

    model.training_mode = true;
    model.set_requires_grad_from_partition();
    auto trainable = model.trainable_params();
    for (auto& p : head.params()) {
        p.set_requires_grad(true);
        trainable.push_back(p);
    }
    const bool frozen = cfg.learning_rate == 0.0;
    AdamWState<float> opt(frozen ? 1e-9 : cfg.learning_rate, cfg.weight_decay);
    opt.init(trainable);

    Stage1Result result;
    std::vector<Tensor<float>> best;
    double best_valid = -1.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Stage1EpochRow row;
        row.epoch = epoch;
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (const auto& batch :
             batch_texts(graph, graph.train_nodes, vocab, cfg.max_len, cfg.batch_size,
                         &shuffle_rng)) {
            std::vector<std::int32_t> labels;
            labels.reserve(batch.batch_size);
            for (auto v : batch.node_ids) labels.push_back(graph.labels[v]);
            Tape<float> tape;
            {
                TapeScope<float> scope(tape);
                Tensor<float> pooled = encode_batch(model, batch, true, &drop_rng);
                Tensor<float> logits = head.forward(pooled, &drop_rng, true);
                Tensor<float> loss = cross_entropy_smoothed(logits, labels, cfg.label_smoothing);
                loss_sum += loss.item();
                ++steps;
                tape.backward(loss);
            }
            if (!frozen) adamw_step(trainable, opt);
            zero_grads(trainable);
        }
        row.loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
        row.train_metric = encoder_cls_accuracy(graph, model, head, vocab, graph.train_nodes,
                                                cfg.max_len, cfg.batch_size);
        row.valid_metric = encoder_cls_accuracy(graph, model, head, vocab, graph.valid_nodes,
                                                cfg.max_len, cfg.batch_size);
        if (row.valid_metric > best_valid) {
            best_valid = row.valid_metric;
            best = snapshot(trainable);
            result.best_epoch = epoch;
        }
        result.epochs.push_back(row);
    }
    if (!best.empty()) restore(trainable, best);
    result.best_valid = best_valid;
    model.training_mode = false;
    return result;
}

Stage1Result finetune_link(const TextualGraph& graph, EncoderModel<float>& model,
                           LinkHead<float>& head, const Vocab& vocab, const Stage1Config& cfg) {
    if (!graph.edge_splits) throw DataError("finetune_link: graph has no edge splits");
    if (cfg.link_negatives_per_pos == 0)
        throw ParameterError("finetune_link: need at least one negative per positive");
    const auto& splits = *graph.edge_splits;
    if (splits.train_edges.empty()) throw DataError("finetune_link: empty train edge set");
    const std::size_t n = graph.num_nodes();

    RngState root(cfg.seed);
    RngState shuffle_rng = root.substream("s1-shuffle");
    RngState drop_rng = root.substream("s1-dropout");
    RngState neg_rng = root.substream("s1-negatives");

    model.training_mode = true;
    model.set_requires_grad_from_partition();
    auto trainable = model.trainable_params();
    for (auto& p : head.params()) {
        p.set_requires_grad(true);
        trainable.push_back(p);
    }
    const bool frozen = cfg.learning_rate == 0.0;
    AdamWState<float> opt(frozen ? 1e-9 : cfg.learning_rate, cfg.weight_decay);
    opt.init(trainable);

    Stage1Result result;
    std::vector<Tensor<float>> best;
    double best_valid = -1.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Stage1EpochRow row;
        row.epoch = epoch;
        std::vector<Edge> order = splits.train_edges;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
        if (cfg.link_pairs_per_epoch > 0 && order.size() > cfg.link_pairs_per_epoch)
            order.resize(cfg.link_pairs_per_epoch);

        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t p = std::min(cfg.batch_size, order.size() - start);
            std::vector<std::int64_t> endpoints;  // [src..., dst...]
            std::vector<std::uint8_t> targets;
            std::vector<std::int64_t> srcs, dsts;
            for (std::size_t i = 0; i < p; ++i) {
                srcs.push_back(order[start + i].first);
                dsts.push_back(order[start + i].second);
                targets.push_back(1);
            }
            for (std::size_t i = 0; i < p * cfg.link_negatives_per_pos; ++i) {
                std::size_t attempts = 0;
                for (;;) {
                    if (++attempts > 1000)
                        throw DataError("finetune_link: negative sampling exhausted retries");
                    auto a = static_cast<std::int64_t>(neg_rng.next_below(n));
                    auto b = static_cast<std::int64_t>(neg_rng.next_below(n));
                    if (a == b || graph.adj.has_edge(a, b)) continue;
                    srcs.push_back(a);
                    dsts.push_back(b);
                    targets.push_back(0);
                    break;
                }
            }
            endpoints = srcs;
            endpoints.insert(endpoints.end(), dsts.begin(), dsts.end());
            const std::size_t pairs = srcs.size();

            auto batches = batch_texts(graph, endpoints, vocab, cfg.max_len, endpoints.size());
            Tape<float> tape;
            {
                TapeScope<float> scope(tape);
                Tensor<float> pooled = encode_batch(model, batches.front(), true, &drop_rng);
                std::vector<std::int64_t> src_rows(pairs), dst_rows(pairs);
                for (std::size_t i = 0; i < pairs; ++i) {
                    src_rows[i] = static_cast<std::int64_t>(i);
                    dst_rows[i] = static_cast<std::int64_t>(pairs + i);
                }
                Tensor<float> logits = head.forward(gather_rows(pooled, src_rows),
                                                    gather_rows(pooled, dst_rows), &drop_rng,
                                                    true);
                Tensor<float> loss = bce_with_logits(logits, targets);
                loss_sum += loss.item();
                ++steps;
                tape.backward(loss);
            }
            if (!frozen) adamw_step(trainable, opt);
            zero_grads(trainable);
        }
        row.loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
        row.valid_metric = encoder_link_mrr(graph, model, head, vocab, splits.valid_edges,
                                            splits.valid_negatives, cfg.max_len, cfg.batch_size);
        row.train_metric = row.valid_metric;
        if (row.valid_metric > best_valid) {
            best_valid = row.valid_metric;
            best = snapshot(trainable);
            result.best_epoch = epoch;
        }
        result.epochs.push_back(row);
    }
    if (!best.empty()) restore(trainable, best);
    result.best_valid = best_valid;
    model.training_mode = false;
    return result;
}

double encoder_cls_accuracy(const TextualGraph& graph, EncoderModel<float>& model,
                            NodeClsHead<float>& head, const Vocab& vocab,
                            const std::vector<std::int64_t>& nodes, std::size_t max_len,
                            std::size_t batch_size) {
    if (nodes.empty()) throw ValueError("encoder_cls_accuracy: empty node set");
    NoGradScope<float> inference;
    std::vector<std::int32_t> preds, labels;
    for (const auto& batch : batch_texts(graph, nodes, vocab, max_len, batch_size)) {
        Tensor<float> logits = head.forward(encode_batch(model, batch, false));
        const std::size_t k = logits.cols();
        for (std::size_t bi = 0; bi < batch.batch_size; ++bi) {
            std::size_t bestc = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (logits.at(bi, c) > logits.at(bi, bestc)) bestc = c;
            preds.push_back(static_cast<std::int32_t>(bestc));
            labels.push_back(graph.labels[batch.node_ids[bi]]);
        }
    }
    return accuracy(preds, labels);
}

double encoder_link_mrr(const TextualGraph& graph, EncoderModel<float>& model,
                        LinkHead<float>& head, const Vocab& vocab,
                        const std::vector<Edge>& positives,
                        const std::vector<std::vector<Edge>>& negative_tables,
                        std::size_t max_len, std::size_t batch_size) {
    NoGradScope<float> inference;
    std::vector<std::int64_t> all_nodes(graph.num_nodes());
    for (std::size_t i = 0; i < all_nodes.size(); ++i)
        all_nodes[i] = static_cast<std::int64_t>(i);
    std::size_t d = 0;
    std::vector<float> emb = embed_nodes(graph, model, vocab, all_nodes, max_len, batch_size, &d);

    auto score_pairs = [&](const std::vector<Edge>& pairs) {
        Tensor<float> hs({pairs.size(), d}), hd({pairs.size(), d});
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            std::copy_n(emb.data() + static_cast<std::size_t>(pairs[i].first) * d, d,
                        hs.data().data() + i * d);
            std::copy_n(emb.data() + static_cast<std::size_t>(pairs[i].second) * d, d,
                        hd.data().data() + i * d);
        }
        Tensor<float> logits = head.forward(hs, hd);
        std::vector<double> out;
        out.reserve(pairs.size());
        for (float v : logits.data()) out.push_back(static_cast<double>(v));
        return out;
    };
    std::vector<double> pos = score_pairs(positives);
    std::vector<std::vector<double>> negs;
    negs.reserve(negative_tables.size());
    for (const auto& table : negative_tables) negs.push_back(score_pairs(table));
    return mrr(pos, negs);
}

}  // namespace stg
