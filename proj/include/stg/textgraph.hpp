#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stg/graph.hpp"

namespace stg {

// A graph whose nodes carry text documents, with node-level labels and
// train/valid/test splits. Link tasks additionally carry edge splits.
struct TextualGraph {
    CsrAdjacency adj;
    std::vector<std::string> texts;           // one per node
    std::vector<std::int32_t> labels;         // empty when unlabeled
    std::int32_t num_classes = 0;
    std::vector<std::int64_t> train_nodes;
    std::vector<std::int64_t> valid_nodes;
    std::vector<std::int64_t> test_nodes;
    std::optional<EdgeSplits> edge_splits;

    std::size_t num_nodes() const { return adj.num_nodes; }
    bool has_labels() const { return !labels.empty(); }

    // Throws if CSR, labels or splits violate their invariants.
    void validate() const;

    std::vector<std::string> train_texts() const {
        std::vector<std::string> out;
        out.reserve(train_nodes.size());
        for (auto v : train_nodes) out.push_back(texts[v]);
        return out;
    }
};

// node_id <TAB> text, one line per node, UTF-8/LF. Every node in
// [0, expected_num_nodes) must appear exactly once.
std::vector<std::string> load_tsv(const std::string& path, std::size_t expected_num_nodes);
void save_tsv(const std::string& path, const std::vector<std::string>& texts);

// u <TAB> v per line, undirected, 0-based.
std::vector<Edge> load_edge_list(const std::string& path);
void save_edge_list(const std::string& path, const std::vector<Edge>& edges);

// node_id <TAB> class per line.
std::vector<std::int32_t> load_labels(const std::string& path, std::size_t expected_num_nodes);
void save_labels(const std::string& path, const std::vector<std::int32_t>& labels);

// node_id <TAB> {train|valid|test} per line.
void save_node_splits(const std::string& path, const TextualGraph& graph);
void load_node_splits(const std::string& path, TextualGraph& graph);

// u <TAB> v <TAB> {t|v|s} per line (train/valid/test edges).
void save_edge_split_file(const std::string& path, const EdgeSplits& splits);

}  // namespace stg
