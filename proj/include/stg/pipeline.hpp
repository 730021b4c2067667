#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stg/gnn.hpp"
#include "stg/metrics.hpp"
#include "stg/runconfig.hpp"

namespace stg {

// Artifact layout under one output directory. Every writer goes through an
// atomic rename, so a file either exists complete or not at all.
struct ArtifactPaths {
    std::string dir;
    explicit ArtifactPaths(std::string d) : dir(std::move(d)) {}

    std::string texts() const { return dir + "/graph.texts.tsv"; }
    std::string edges() const { return dir + "/graph.edges.tsv"; }
    std::string labels() const { return dir + "/graph.labels.tsv"; }
    std::string node_splits() const { return dir + "/graph.splits.tsv"; }
    std::string edge_split_file() const { return dir + "/graph.edge-splits.tsv"; }
    std::string vocab() const { return dir + "/vocab.txt"; }
    std::string mlm_ckpt() const { return dir + "/encoder.mlm.stgm"; }
    std::string finetuned_ckpt() const { return dir + "/encoder.finetuned.stgm"; }
    std::string cache(const std::string& provenance) const {
        return dir + "/features." + provenance + ".stgx";
    }
    std::string gnn_ckpt(const std::string& arch, const std::string& prov) const {
        return dir + "/gnn." + arch + "." + prov + ".stgg";
    }
    std::string report_kv(const std::string& arch, const std::string& prov) const {
        return dir + "/report." + arch + "." + prov + ".txt";
    }
    std::string preds(const std::string& arch, const std::string& prov) const {
        return dir + "/preds." + arch + "." + prov + ".stgp";
    }
    std::string comparison() const { return dir + "/comparison.csv"; }
    std::string trial_log(const std::string& stage) const {
        return dir + "/trials." + stage + ".csv";
    }
    std::string projection(const std::string& prov) const {
        return dir + "/projection." + prov + ".csv";
    }
    std::string stage1_log() const { return dir + "/stage1.epochs.csv"; }
};

// Class-probability prediction file: "STGP" + version + n + k + f32 rows.
void save_predictions(const std::string& path, const std::vector<float>& probs, std::size_t n,
                      std::size_t k);
std::vector<float> load_predictions(const std::string& path, std::size_t* n, std::size_t* k);

void cmd_gen_data(const RunConfig& cfg, const std::string& dir);

// Rebuilds the TextualGraph from the gen-data artifacts. For link tasks the
// edge splits (and their fixed negative tables) are re-derived from the data
// substream, which reproduces gen-data's splits exactly.
TextualGraph load_graph_artifacts(const RunConfig& cfg, const std::string& dir);

void cmd_pretrain_mlm(const RunConfig& cfg, const std::string& dir);
void cmd_finetune(const RunConfig& cfg, const std::string& dir);
void cmd_embed(const RunConfig& cfg, const std::string& dir, const std::string& ckpt_path,
               const std::string& out_path, Provenance provenance);
void cmd_bow(const RunConfig& cfg, const std::string& dir);

EvalReport cmd_train_gnn(const RunConfig& cfg, const std::string& dir, GnnArch arch,
                         const std::string& features_path);

EvalReport cmd_evaluate(const RunConfig& cfg, const std::string& dir,
                        const std::string& gnn_ckpt_path, const std::string& features_path);

EvalReport cmd_ensemble(const RunConfig& cfg, const std::string& dir,
                        const std::vector<std::string>& pred_paths,
                        const std::vector<double>& weights);

void cmd_search(const RunConfig& cfg, const std::string& dir, const std::string& stage,
                std::size_t trials, const std::string& features_path);

void cmd_project(const RunConfig& cfg, const std::string& dir,
                 const std::string& features_path);

// Full chain: gen-data, MLM pretraining, fixed/simteg/bow caches, one GNN
// per requested arch and feature source, reports and the comparison table.
void cmd_pipeline(const RunConfig& cfg, const std::string& dir);

}  // namespace stg
