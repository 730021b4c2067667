#include "stg/textgraph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "stg/io_util.hpp"

namespace stg {

namespace {

std::int64_t parse_int(std::string_view field, const std::string& path, std::size_t line_no) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed integer field '" +
                        std::string(field) + "'");
    return value;
}

}  // namespace

void TextualGraph::validate() const {
    const std::size_t n = num_nodes();
    if (adj.row_ptr.size() != n + 1) throw DataError("graph: row_ptr size mismatch");
    if (adj.row_ptr[0] != 0) throw DataError("graph: row_ptr[0] != 0");
    for (std::size_t i = 0; i < n; ++i)
        if (adj.row_ptr[i] > adj.row_ptr[i + 1]) throw DataError("graph: row_ptr not monotone");
    if (adj.row_ptr[n] != static_cast<std::int64_t>(adj.col_idx.size()))
        throw DataError("graph: row_ptr[n] != nnz");
    for (std::int64_t v = 0; v < static_cast<std::int64_t>(n); ++v) {
        auto nb = adj.neighbors(v);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            if (nb[i] < 0 || nb[i] >= static_cast<std::int64_t>(n))
                throw DataError("graph: column index out of range");
            if (nb[i] == v) throw DataError("graph: self-loop present");
            if (i > 0 && nb[i] <= nb[i - 1]) throw DataError("graph: row not strictly increasing");
            if (!adj.has_edge(nb[i], v)) throw DataError("graph: adjacency not symmetric");
        }
    }
    if (texts.size() != n) throw DataError("graph: text count mismatch");
    if (!labels.empty()) {
        if (labels.size() != n) throw DataError("graph: label count mismatch");
        for (auto y : labels)
            if (y < 0 || y >= num_classes) throw DataError("graph: label out of range");
        std::set<std::int64_t> seen;
        for (const auto* split : {&train_nodes, &valid_nodes, &test_nodes})
            for (auto v : *split)
                if (!seen.insert(v).second) throw DataError("graph: splits overlap");
        if (seen.size() != n) throw DataError("graph: splits do not cover all labeled nodes");
    }
    if (edge_splits) {
        std::set<Edge> all;
        for (const auto* split :
             {&edge_splits->train_edges, &edge_splits->valid_edges, &edge_splits->test_edges})
            for (auto e : *split) {
                if (!adj.has_edge(e.first, e.second))
                    throw DataError("graph: split edge missing from adjacency");
                if (!all.insert(e).second) throw DataError("graph: edge splits overlap");
            }
    }
}

std::vector<std::string> load_tsv(const std::string& path, std::size_t expected_num_nodes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError("load_tsv: cannot open " + path);
    std::vector<std::string> texts(expected_num_nodes);
    std::vector<bool> seen(expected_num_nodes, false);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": missing tab separator");
        std::int64_t id = parse_int(std::string_view(line).substr(0, tab), path, line_no);
        if (id < 0 || id >= static_cast<std::int64_t>(expected_num_nodes))
            throw DataError(path + ":" + std::to_string(line_no) + ": node id " +
                            std::to_string(id) + " out of range");
        if (seen[id])
            throw DataError(path + ":" + std::to_string(line_no) + ": duplicate node id " +
                            std::to_string(id));
        seen[id] = true;
        texts[id] = line.substr(tab + 1);
    }
    for (std::size_t i = 0; i < expected_num_nodes; ++i)
        if (!seen[i]) throw DataError(path + ": missing text for node " + std::to_string(i));
    return texts;
}

void save_tsv(const std::string& path, const std::vector<std::string>& texts) {
    std::string body;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        body += std::to_string(i);
        body += '\t';
        body += texts[i];
        body += '\n';
    }
    atomic_write_text(path, body);
}

std::vector<Edge> load_edge_list(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError("load_edge_list: cannot open " + path);
    std::vector<Edge> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": missing tab separator");
        std::int64_t u = parse_int(std::string_view(line).substr(0, tab), path, line_no);
        std::int64_t v = parse_int(std::string_view(line).substr(tab + 1), path, line_no);
        edges.emplace_back(u, v);
    }
    return edges;
}

void save_edge_list(const std::string& path, const std::vector<Edge>& edges) {
    std::string body;
    for (auto [u, v] : edges) {
        body += std::to_string(u);
        body += '\t';
        body += std::to_string(v);
        body += '\n';
    }
    atomic_write_text(path, body);
}

std::vector<std::int32_t> load_labels(const std::string& path, std::size_t expected_num_nodes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError("load_labels: cannot open " + path);
    std::vector<std::int32_t> labels(expected_num_nodes, -1);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": missing tab separator");
        std::int64_t id = parse_int(std::string_view(line).substr(0, tab), path, line_no);
        std::int64_t y = parse_int(std::string_view(line).substr(tab + 1), path, line_no);
        if (id < 0 || id >= static_cast<std::int64_t>(expected_num_nodes))
            throw DataError(path + ":" + std::to_string(line_no) + ": node id out of range");
        labels[id] = static_cast<std::int32_t>(y);
    }
    for (std::size_t i = 0; i < expected_num_nodes; ++i)
        if (labels[i] < 0) throw DataError(path + ": missing label for node " + std::to_string(i));
    return labels;
}

void save_labels(const std::string& path, const std::vector<std::int32_t>& labels) {
    std::string body;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        body += std::to_string(i);
        body += '\t';
        body += std::to_string(labels[i]);
        body += '\n';
    }
    atomic_write_text(path, body);
}

void save_node_splits(const std::string& path, const TextualGraph& graph) {
    std::vector<const char*> tag(graph.num_nodes(), nullptr);
    for (auto v : graph.train_nodes) tag[v] = "train";
    for (auto v : graph.valid_nodes) tag[v] = "valid";
    for (auto v : graph.test_nodes) tag[v] = "test";
    std::string body;
    for (std::size_t i = 0; i < tag.size(); ++i) {
        if (!tag[i]) throw DataError("save_node_splits: node without split");
        body += std::to_string(i);
        body += '\t';
        body += tag[i];
        body += '\n';
    }
    atomic_write_text(path, body);
}

void load_node_splits(const std::string& path, TextualGraph& graph) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError("load_node_splits: cannot open " + path);
    graph.train_nodes.clear();
    graph.valid_nodes.clear();
    graph.test_nodes.clear();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": missing tab separator");
        std::int64_t id = parse_int(std::string_view(line).substr(0, tab), path, line_no);
        std::string split = line.substr(tab + 1);
        if (split == "train")
            graph.train_nodes.push_back(id);
        else if (split == "valid")
            graph.valid_nodes.push_back(id);
        else if (split == "test")
            graph.test_nodes.push_back(id);
        else
            throw DataError(path + ":" + std::to_string(line_no) + ": unknown split '" + split +
                            "'");
    }
}

void save_edge_split_file(const std::string& path, const EdgeSplits& splits) {
    std::string body;
    auto emit = [&](const std::vector<Edge>& edges, char tag) {
        for (auto [u, v] : edges) {
            body += std::to_string(u);
            body += '\t';
            body += std::to_string(v);
            body += '\t';
            body += tag;
            body += '\n';
        }
    };
    emit(splits.train_edges, 't');
    emit(splits.valid_edges, 'v');
    emit(splits.test_edges, 's');
    atomic_write_text(path, body);
}

}  // namespace stg
