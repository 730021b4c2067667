#include "stg/gnn.hpp"

#include <algorithm>
#include <cmath>

#include "stg/io_util.hpp"
#include "stg/optim.hpp"

namespace stg {

GnnArch gnn_arch_from_name(const std::string& name) {
    if (name == "mlp") return GnnArch::mlp;
    if (name == "gcn") return GnnArch::gcn;
    if (name == "sage") return GnnArch::sage;
    throw ConfigError("gnn: unknown arch '" + name + "'");
}

std::string gnn_arch_name(GnnArch arch) {
    switch (arch) {
        case GnnArch::mlp: return "mlp";
        case GnnArch::gcn: return "gcn";
        case GnnArch::sage: return "sage";
    }
    throw ParameterError("gnn_arch_name: bad arch");
}

void GnnConfig::validate() const {
    const bool layers_ok = num_layers == 2 || num_layers == 3 || num_layers == 4 ||
                           num_layers == 6 || num_layers == 8;
    if (!layers_ok) throw ConfigError("gnn: num_layers must be one of {2,3,4,6,8}");
    if (hidden_dim == 0) throw ConfigError("gnn: hidden_dim must be positive");
    if (dropout < 0.1 || dropout > 0.8) throw ConfigError("gnn: dropout must be in [0.1, 0.8]");
    if (learning_rate < 1e-4 || learning_rate > 1e-2)
        throw ConfigError("gnn: learning rate must be in [1e-4, 1e-2]");
    if (weight_decay < 1e-7 || weight_decay > 1e-4)
        throw ConfigError("gnn: weight decay must be in [1e-7, 1e-4]");
    if (label_smoothing < 0.1 || label_smoothing > 0.7)
        throw ConfigError("gnn: label smoothing must be in [0.1, 0.7]");
    if (epochs == 0) throw ConfigError("gnn: epochs must be positive");
    if (!full_batch && fanouts.size() != num_layers)
        throw ConfigError("gnn: fanouts length must equal num_layers");
}

GnnModel GnnModel::init(const GnnConfig& cfg, Task task, std::size_t in_dim,
                        std::int32_t num_classes, RngState& rng) {
    GnnModel m;
    m.cfg = cfg;
    m.task = task;
    m.num_classes = num_classes;
    m.in_dim = in_dim;
    std::size_t d = in_dim;
    for (std::size_t i = 0; i < cfg.num_layers; ++i) {
        GnnLayer<float> layer;
        layer.self = Linear<float>::init(d, cfg.hidden_dim, rng);
        if (cfg.arch == GnnArch::sage)
            layer.neigh = Linear<float>::init(d, cfg.hidden_dim, rng);
        m.layers.push_back(std::move(layer));
        d = cfg.hidden_dim;
    }
    if (task == Task::nodecls) {
        if (num_classes < 2) throw ConfigError("gnn: node classification needs K >= 2");
        m.cls_head = NodeClsHead<float>::init(cfg.hidden_dim, num_classes, cfg.dropout, rng);
    } else {
        m.link_head = LinkHead<float>::init(cfg.hidden_dim, cfg.link_head_hidden, cfg.dropout, rng);
    }
    return m;
}

std::vector<Tensor<float>> GnnModel::params() {
    std::vector<Tensor<float>> out;
    for (auto& l : layers) {
        out.push_back(l.self.weight);
        out.push_back(l.self.bias);
        if (l.neigh) {
            out.push_back(l.neigh->weight);
            out.push_back(l.neigh->bias);
        }
    }
    if (cls_head)
        for (auto& p : cls_head->params()) out.push_back(p);
    if (link_head)
        for (auto& p : link_head->params()) out.push_back(p);
    return out;
}

namespace {

struct GraphOps {
    std::shared_ptr<const SparseMatrix<float>> norm;      // gcn
    std::shared_ptr<const SparseMatrix<float>> mean_agg;  // sage
};

GraphOps build_graph_ops(const GnnModel& model, const CsrAdjacency& adj) {
    GraphOps ops;
    if (model.cfg.arch == GnnArch::gcn) ops.norm = sparse_from_normalized<float>(gcn_normalize(adj));
    if (model.cfg.arch == GnnArch::sage) ops.mean_agg = mean_aggregator<float>(adj);
    return ops;
}

Tensor<float> forward_full(const GnnModel& model, const GraphOps& ops, const Tensor<float>& x,
                           bool training, RngState* rng) {
    Tensor<float> h = x;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (training && model.cfg.dropout > 0.0) h = dropout(h, model.cfg.dropout, *rng, true);
        const Activation act =
            i + 1 < model.layers.size() ? Activation::relu : Activation::identity;
        const auto& layer = model.layers[i];
        switch (model.cfg.arch) {
            case GnnArch::mlp: {
                Tensor<float> out = layer.self.forward(h);
                h = act == Activation::relu ? relu(out) : out;
                break;
            }
            case GnnArch::gcn:
                h = gcn_layer(ops.norm, h, layer.self, act);
                break;
            case GnnArch::sage:
                h = sage_layer(ops.mean_agg, h, h, layer.self, *layer.neigh, act);
                break;
        }
    }
    return h;
}

// Sampled-block forward for sage/mlp; blocks come input-most first.
Tensor<float> forward_blocks(const GnnModel& model, const std::vector<SampledBlock>& blocks,
                             const FeatureMatrix& fm, bool training, RngState* rng) {
    const auto& sources = blocks.front().sources;
    Tensor<float> h({sources.size(), fm.d});
    for (std::size_t i = 0; i < sources.size(); ++i)
        std::copy_n(fm.row(static_cast<std::size_t>(sources[i])), fm.d,
                    h.data().data() + i * fm.d);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (training && model.cfg.dropout > 0.0) h = dropout(h, model.cfg.dropout, *rng, true);
        const Activation act =
            i + 1 < model.layers.size() ? Activation::relu : Activation::identity;
        const auto& layer = model.layers[i];
        const auto& block = blocks[i];
        Tensor<float> h_self = gather_rows(h, block.self_index);
        if (model.cfg.arch == GnnArch::mlp) {
            Tensor<float> out = layer.self.forward(h_self);
            h = act == Activation::relu ? relu(out) : out;
        } else {
            h = sage_layer(mean_aggregator_from_block<float>(block), h, h_self, layer.self,
                           *layer.neigh, act);
        }
    }
    return h;
}

std::vector<float> softmax_rows(const Tensor<float>& logits) {
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    std::vector<float> probs(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        float maxv = logits.at(i, 0);
        for (std::size_t c = 1; c < k; ++c) maxv = std::max(maxv, logits.at(i, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < k; ++c) denom += std::exp(logits.at(i, c) - maxv);
        for (std::size_t c = 0; c < k; ++c)
            probs[i * k + c] = static_cast<float>(std::exp(logits.at(i, c) - maxv) / denom);
    }
    return probs;
}

std::vector<Tensor<float>> snapshot(std::vector<Tensor<float>>& params) {
    std::vector<Tensor<float>> out;
    for (auto& p : params) out.push_back(p.clone());
    return out;
}

void restore(std::vector<Tensor<float>>& params, const std::vector<Tensor<float>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].data() = snap[i].data();
}

long epochs_to_95_of_final(const std::vector<GnnEpochRow>& rows) {
    if (rows.empty()) return -1;
    const double target = 0.95 * rows.back().valid_metric;
    for (const auto& r : rows)
        if (r.valid_metric >= target) return static_cast<long>(r.epoch);
    return static_cast<long>(rows.back().epoch);
}

double link_valid_mrr(const GnnModel& model, const TextualGraph& graph, const FeatureMatrix& fm) {
    const auto& splits = *graph.edge_splits;
    std::vector<double> pos = predict_pair_scores(model, graph, fm, splits.valid_edges);
    std::vector<std::vector<double>> negs;
    negs.reserve(splits.valid_negatives.size());
    for (const auto& table : splits.valid_negatives)
        negs.push_back(predict_pair_scores(model, graph, fm, table));
    return mrr(pos, negs);
}

}  // namespace

GnnTrainResult train_gnn(const TextualGraph& graph, const FeatureMatrix& fm, const GnnConfig& cfg,
                         Task task, GnnModel& model, bool instrument) {
    if (fm.n != graph.num_nodes())
        throw CacheError("train_gnn: feature cache rows (" + std::to_string(fm.n) +
                         ") do not match graph nodes (" + std::to_string(graph.num_nodes()) + ")");
    if (fm.d != model.in_dim) throw CacheError("train_gnn: feature width does not match model");
    if (task == Task::nodecls && !graph.has_labels())
        throw DataError("train_gnn: node classification needs labels");
    if (task == Task::link && !graph.edge_splits)
        throw DataError("train_gnn: link task needs edge splits");
    if (!cfg.full_batch && cfg.arch == GnnArch::gcn)
        throw ConfigError("train_gnn: gcn trains full-batch only");

    RngState root(cfg.seed);
    RngState drop_rng = root.substream("gnn-dropout");
    RngState neg_rng = root.substream("gnn-negatives");
    RngState batch_rng = root.substream("gnn-batches");

    const CsrAdjacency& message_adj =
        task == Task::link ? graph.edge_splits->message_graph : graph.adj;
    GraphOps ops = build_graph_ops(model, message_adj);
    Tensor<float> x = fm.as_tensor();

    auto params = model.params();
    for (auto& p : params) p.set_requires_grad(true);
    AdamWState<float> opt(cfg.learning_rate == 0.0 ? 1e-9 : cfg.learning_rate, cfg.weight_decay);
    const bool frozen = cfg.learning_rate == 0.0;
    opt.init(params);

    GnnTrainResult result;
    std::vector<Tensor<float>> best;
    double best_valid = -1.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        GnnEpochRow row;
        row.epoch = epoch;

        if (task == Task::nodecls) {
            std::vector<std::int32_t> train_labels;
            for (auto v : graph.train_nodes) train_labels.push_back(graph.labels[v]);
            auto run_step = [&](const std::vector<std::int64_t>& seeds,
                                const std::vector<std::int32_t>& seed_labels) {
                Tape<float> tape;
                TapeScope<float> scope(tape);
                Tensor<float> logits;
                if (cfg.full_batch) {
                    Tensor<float> h = forward_full(model, ops, x, true, &drop_rng);
                    logits = model.cls_head->forward(gather_rows(h, seeds), &drop_rng, true);
                } else {
                    auto blocks = sample_neighbors(message_adj, seeds, cfg.fanouts, batch_rng);
                    Tensor<float> h = forward_blocks(model, blocks, fm, true, &drop_rng);
                    logits = model.cls_head->forward(h, &drop_rng, true);
                }
                Tensor<float> loss = cross_entropy_smoothed(logits, seed_labels,
                                                            cfg.label_smoothing);
                row.loss += loss.item();
                tape.backward(loss);
                if (!frozen) adamw_step(params, opt);
                zero_grads(params);
            };
            if (cfg.full_batch) {
                run_step(graph.train_nodes, train_labels);
            } else {
                std::vector<std::int64_t> order = graph.train_nodes;
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[batch_rng.next_below(i)]);
                for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
                    const std::size_t b = std::min(cfg.batch_size, order.size() - s);
                    std::vector<std::int64_t> seeds(order.begin() + s, order.begin() + s + b);
                    std::vector<std::int32_t> seed_labels;
                    for (auto v : seeds) seed_labels.push_back(graph.labels[v]);
                    run_step(seeds, seed_labels);
                }
            }
            auto probs = predict_cls_probs(model, graph, fm);
            auto preds = argmax_rows(probs, graph.num_nodes(),
                                     static_cast<std::size_t>(model.num_classes));
            std::vector<std::int32_t> p_train, y_train, p_valid, y_valid;
            for (auto v : graph.train_nodes) {
                p_train.push_back(preds[v]);
                y_train.push_back(graph.labels[v]);
            }
            for (auto v : graph.valid_nodes) {
                p_valid.push_back(preds[v]);
                y_valid.push_back(graph.labels[v]);
            }
            row.train_metric = accuracy(p_train, y_train);
            row.valid_metric = accuracy(p_valid, y_valid);
        } else {
            const auto& splits = *graph.edge_splits;
            const std::size_t n = graph.num_nodes();
            std::vector<std::int64_t> src_ids, dst_ids;
            std::vector<std::uint8_t> targets;
            for (auto [u, v] : splits.train_edges) {
                src_ids.push_back(u);
                dst_ids.push_back(v);
                targets.push_back(1);
                if (instrument) result.train_positives_used.emplace_back(u, v);
            }
            for (std::size_t i = 0; i < splits.train_edges.size(); ++i) {
                std::size_t attempts = 0;
                for (;;) {
                    if (++attempts > 1000)
                        throw DataError("train_gnn: negative sampling exhausted retries");
                    auto a = static_cast<std::int64_t>(neg_rng.next_below(n));
                    auto b = static_cast<std::int64_t>(neg_rng.next_below(n));
                    if (a == b || message_adj.has_edge(a, b)) continue;
                    src_ids.push_back(a);
                    dst_ids.push_back(b);
                    targets.push_back(0);
                    break;
                }
            }
            Tape<float> tape;
            {
                TapeScope<float> scope(tape);
                Tensor<float> h = forward_full(model, ops, x, true, &drop_rng);
                Tensor<float> logits = model.link_head->forward(
                    gather_rows(h, src_ids), gather_rows(h, dst_ids), &drop_rng, true);
                Tensor<float> loss = bce_with_logits(logits, targets);
                row.loss = loss.item();
                tape.backward(loss);
            }
            if (!frozen) adamw_step(params, opt);
            zero_grads(params);
            row.valid_metric = link_valid_mrr(model, graph, fm);
            row.train_metric = row.valid_metric;  // link training tracked by valid MRR
        }

        if (row.valid_metric > best_valid) {
            best_valid = row.valid_metric;
            best = snapshot(params);
            result.best_epoch = epoch;
        }
        result.epochs.push_back(row);
    }
    if (!best.empty()) restore(params, best);
    result.best_valid = best_valid;
    result.epochs_to_95 = epochs_to_95_of_final(result.epochs);
    return result;
}

std::vector<float> predict_cls_probs(const GnnModel& model, const TextualGraph& graph,
                                     const FeatureMatrix& fm) {
    if (fm.n != graph.num_nodes()) throw CacheError("predict: feature cache/graph mismatch");
    if (!model.cls_head) throw StateError("predict_cls_probs: model has no classification head");
    NoGradScope<float> inference;
    GraphOps ops = build_graph_ops(model, graph.adj);
    Tensor<float> h = forward_full(model, ops, fm.as_tensor(), false, nullptr);
    Tensor<float> logits = model.cls_head->forward(h);
    return softmax_rows(logits);
}

std::vector<float> predict_cls_probs_sampled(const GnnModel& model, const TextualGraph& graph,
                                             const FeatureMatrix& fm,
                                             const std::vector<std::int64_t>& nodes,
                                             const std::vector<std::size_t>& fanouts,
                                             RngState& rng) {
    NoGradScope<float> inference;
    auto blocks = sample_neighbors(graph.adj, nodes, fanouts, rng);
    Tensor<float> h = forward_blocks(model, blocks, fm, false, nullptr);
    Tensor<float> logits = model.cls_head->forward(h);
    return softmax_rows(logits);
}

std::vector<double> predict_pair_scores(const GnnModel& model, const TextualGraph& graph,
                                        const FeatureMatrix& fm, const std::vector<Edge>& pairs) {
    if (!model.link_head) throw StateError("predict_pair_scores: model has no link head");
    NoGradScope<float> inference;
    const CsrAdjacency& adj =
        graph.edge_splits ? graph.edge_splits->message_graph : graph.adj;
    GraphOps ops = build_graph_ops(model, adj);
    Tensor<float> h = forward_full(model, ops, fm.as_tensor(), false, nullptr);
    std::vector<std::int64_t> src, dst;
    for (auto [u, v] : pairs) {
        if (u < 0 || v < 0 || u >= static_cast<std::int64_t>(graph.num_nodes()) ||
            v >= static_cast<std::int64_t>(graph.num_nodes()))
            throw IndexError("predict_pair_scores: node id out of range");
        src.push_back(u);
        dst.push_back(v);
    }
    Tensor<float> logits = model.link_head->forward(gather_rows(h, src), gather_rows(h, dst));
    std::vector<double> out;
    out.reserve(pairs.size());
    for (float v : logits.data()) out.push_back(static_cast<double>(v));
    return out;
}

namespace {

constexpr std::uint32_t kGnnVersion = 1;

void put_f64_bits(std::vector<std::uint8_t>& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(buf, bits);
}

double get_f64_bits(ByteReader& r) {
    std::uint64_t bits = r.u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_blob(std::vector<std::uint8_t>& buf, const Tensor<float>& t) {
    put_u64(buf, t.numel());
    for (float v : t.data()) put_f32(buf, v);
}

void get_blob(ByteReader& r, Tensor<float>& t) {
    if (r.u64() != t.numel()) throw CacheError("gnn checkpoint: blob size mismatch");
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = r.f32();
}

}  // namespace

void save_gnn(const std::string& path, GnnModel& model) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), {'S', 'T', 'G', 'G'});
    put_u32(buf, kGnnVersion);
    put_u8(buf, static_cast<std::uint8_t>(model.cfg.arch));
    put_u8(buf, model.task == Task::link ? 1 : 0);
    put_u32(buf, static_cast<std::uint32_t>(model.cfg.num_layers));
    put_u32(buf, static_cast<std::uint32_t>(model.cfg.hidden_dim));
    put_u32(buf, static_cast<std::uint32_t>(model.cfg.link_head_hidden));
    put_u32(buf, static_cast<std::uint32_t>(model.in_dim));
    put_u32(buf, static_cast<std::uint32_t>(model.num_classes));
    put_f64_bits(buf, model.cfg.dropout);
    for (auto& p : model.params()) put_blob(buf, p);
    atomic_write_bytes(path, buf);
}

GnnModel load_gnn(const std::string& path) {
    auto bytes = read_file_bytes(path);
    ByteReader r(bytes);
    r.need(4);
    if (!(bytes[0] == 'S' && bytes[1] == 'T' && bytes[2] == 'G' && bytes[3] == 'G'))
        throw CacheError("gnn checkpoint: bad magic in " + path);
    r.pos = 4;
    if (r.u32() != kGnnVersion) throw CacheError("gnn checkpoint: unsupported version");
    GnnConfig cfg;
    cfg.arch = static_cast<GnnArch>(r.u8());
    const Task task = r.u8() == 1 ? Task::link : Task::nodecls;
    cfg.num_layers = r.u32();
    cfg.hidden_dim = r.u32();
    cfg.link_head_hidden = r.u32();
    const std::size_t in_dim = r.u32();
    const auto num_classes = static_cast<std::int32_t>(r.u32());
    cfg.dropout = get_f64_bits(r);
    RngState scratch(0);
    GnnModel model = GnnModel::init(cfg, task, in_dim, num_classes, scratch);
    for (auto& p : model.params()) get_blob(r, p);
    if (!r.done()) throw CacheError("gnn checkpoint: trailing bytes");
    return model;
}

}  // namespace stg
