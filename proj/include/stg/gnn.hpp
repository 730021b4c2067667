#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stg/features.hpp"
#include "stg/heads.hpp"
#include "stg/metrics.hpp"
#include "stg/sparse.hpp"
#include "stg/textgraph.hpp"

namespace stg {

enum class GnnArch { mlp, gcn, sage };
enum class Task { nodecls, link };

GnnArch gnn_arch_from_name(const std::string& name);
std::string gnn_arch_name(GnnArch arch);

enum class Activation { relu, tanh, identity };

struct GnnConfig {
    GnnArch arch = GnnArch::sage;
    std::size_t num_layers = 2;
    std::size_t hidden_dim = 256;
    double dropout = 0.5;
    double learning_rate = 5e-3;
    double weight_decay = 1e-6;
    double label_smoothing = 0.1;
    std::size_t epochs = 100;
    bool full_batch = true;
    std::vector<std::size_t> fanouts = {10, 10};
    std::size_t batch_size = 256;  // mini-batch seeds per step
    std::uint64_t seed = 1;
    std::size_t link_head_hidden = 64;

    void validate() const;
};

// One message-passing transform. GraphSAGE keeps separate self and neighbor
// maps; GCN and MLP use only `self`.
template <typename T>
struct GnnLayer {
    Linear<T> self;
    std::optional<Linear<T>> neigh;
};

// H' = act(transform(C H)); C is the symmetric-normalized adjacency.
template <typename T>
Tensor<T> gcn_layer(std::shared_ptr<const SparseMatrix<T>> c, const Tensor<T>& h,
                    const Linear<T>& transform, Activation act) {
    Tensor<T> out = transform.forward(spmm(c, h));
    switch (act) {
        case Activation::relu: return relu(out);
        case Activation::tanh: return tanh_op(out);
        case Activation::identity: return out;
    }
    throw ParameterError("gcn_layer: bad activation");
}

// out_v = act(W_self h_v + W_neigh mean_{u in N(v)} h_u); isolated nodes use
// a zero neighbor term. h_self rows correspond to aggregator rows.
template <typename T>
Tensor<T> sage_layer(std::shared_ptr<const SparseMatrix<T>> mean_agg, const Tensor<T>& h_sources,
                     const Tensor<T>& h_self, const Linear<T>& w_self, const Linear<T>& w_neigh,
                     Activation act) {
    Tensor<T> out = add(w_self.forward(h_self), w_neigh.forward(spmm(mean_agg, h_sources)));
    switch (act) {
        case Activation::relu: return relu(out);
        case Activation::tanh: return tanh_op(out);
        case Activation::identity: return out;
    }
    throw ParameterError("sage_layer: bad activation");
}

struct GnnModel {
    GnnConfig cfg;
    Task task = Task::nodecls;
    std::int32_t num_classes = 0;
    std::size_t in_dim = 0;
    std::vector<GnnLayer<float>> layers;
    std::optional<NodeClsHead<float>> cls_head;
    std::optional<LinkHead<float>> link_head;

    static GnnModel init(const GnnConfig& cfg, Task task, std::size_t in_dim,
                         std::int32_t num_classes, RngState& rng);
    std::vector<Tensor<float>> params();
};

struct GnnEpochRow {
    std::size_t epoch = 0;
    double loss = 0.0;
    double train_metric = 0.0;
    double valid_metric = 0.0;
};

struct GnnTrainResult {
    std::vector<GnnEpochRow> epochs;
    std::size_t best_epoch = 0;
    double best_valid = 0.0;
    long epochs_to_95 = -1;  // epochs until 95% of the final valid metric
    std::vector<Edge> train_positives_used;  // filled when instrumented
};

// Trains on cached features. Node classification uses smoothed cross
// entropy on the train split with best-epoch selection by valid accuracy;
// link prediction draws fresh uniform negatives each epoch against the
// leakage-safe message graph and selects by valid MRR. When `instrument` is
// set, every positive edge that enters the training loss is logged.
GnnTrainResult train_gnn(const TextualGraph& graph, const FeatureMatrix& fm, const GnnConfig& cfg,
                         Task task, GnnModel& model, bool instrument = false);

// Eval-mode class probabilities for every node, softmax rows summing to 1.
std::vector<float> predict_cls_probs(const GnnModel& model, const TextualGraph& graph,
                                     const FeatureMatrix& fm);

// Eval-mode class probabilities via sampled-neighbor forward for the given
// nodes (GraphSAGE path).
std::vector<float> predict_cls_probs_sampled(const GnnModel& model, const TextualGraph& graph,
                                             const FeatureMatrix& fm,
                                             const std::vector<std::int64_t>& nodes,
                                             const std::vector<std::size_t>& fanouts,
                                             RngState& rng);

// Eval-mode pair scores for link prediction over the message graph.
std::vector<double> predict_pair_scores(const GnnModel& model, const TextualGraph& graph,
                                        const FeatureMatrix& fm, const std::vector<Edge>& pairs);

// GNN checkpoint: magic "STGG" + config + weights, f32 little-endian.
void save_gnn(const std::string& path, GnnModel& model);
GnnModel load_gnn(const std::string& path);

}  // namespace stg
