#include "stg/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "stg/checkpoint.hpp"
#include "stg/hpo.hpp"
#include "stg/io_util.hpp"
#include "stg/sha256.hpp"
#include "stg/stage1.hpp"

namespace stg {

namespace {

namespace fs = std::filesystem;

void require_artifact(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw DependencyError("missing artifact " + path + " (run `" + producer + "` first)");
}

std::array<std::uint8_t, 32> config_hash_bytes(const RunConfig& cfg) {
    return Sha256::hash(cfg.canonical_string());
}

void echo(const std::string& what, const std::string& path) {
    std::cout << what << ": " << path << "\n";
}

SyntheticTgConfig data_config(const RunConfig& cfg) {
    SyntheticTgConfig data = cfg.data;
    data.seed = RngState(cfg.seed).substream("data").seed;
    data.make_edge_splits = cfg.link_task();
    return data;
}

std::vector<std::int64_t> all_nodes(const TextualGraph& g) {
    std::vector<std::int64_t> ids(g.num_nodes());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
    return ids;
}

// Split metrics of a trained GNN on one feature cache.
EvalReport evaluate_gnn_model(const RunConfig& cfg, GnnModel& model, const TextualGraph& graph,
                              const FeatureMatrix& fm, const GnnTrainResult* train_result) {
    EvalReport report;
    report.task = cfg.task;
    report.arch = gnn_arch_name(model.cfg.arch);
    report.feature_source = provenance_name(fm.provenance);
    report.seeds = {cfg.seed};
    report.config_hash = cfg.config_hash_hex();
    if (train_result) report.epochs_to_95 = train_result->epochs_to_95;

    if (model.task == Task::nodecls) {
        report.metric_name = "accuracy";
        auto probs = predict_cls_probs(model, graph, fm);
        auto preds = argmax_rows(probs, graph.num_nodes(),
                                 static_cast<std::size_t>(model.num_classes));
        auto split_acc = [&](const std::vector<std::int64_t>& nodes) {
            std::vector<std::int32_t> p, y;
            for (auto v : nodes) {
                p.push_back(preds[v]);
                y.push_back(graph.labels[v]);
            }
            return accuracy(p, y);
        };
        report.train_metric = split_acc(graph.train_nodes);
        report.valid_metric = split_acc(graph.valid_nodes);
        report.test_metric = split_acc(graph.test_nodes);
    } else {
        report.metric_name = "mrr";
        const auto& splits = *graph.edge_splits;
        report.num_eval_negatives = splits.num_eval_negatives;
        auto split_mrr = [&](const std::vector<Edge>& pos,
                             const std::vector<std::vector<Edge>>& neg_tables, const char* tag) {
            std::vector<double> pos_scores = predict_pair_scores(model, graph, fm, pos);
            std::vector<std::vector<double>> neg_scores;
            neg_scores.reserve(neg_tables.size());
            for (const auto& table : neg_tables)
                neg_scores.push_back(predict_pair_scores(model, graph, fm, table));
            double m = mrr(pos_scores, neg_scores);
            for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{10}})
                if (k <= splits.num_eval_negatives + 1)
                    report.extra.emplace_back(std::string(tag) + "_hits@" + std::to_string(k),
                                              hits_at_k(pos_scores, neg_scores, k));
            return m;
        };
        report.valid_metric = split_mrr(splits.valid_edges, splits.valid_negatives, "valid");
        report.test_metric = split_mrr(splits.test_edges, splits.test_negatives, "test");
        report.train_metric = train_result ? train_result->best_valid : report.valid_metric;
    }
    report.delta_overfit = report.train_metric - report.test_metric;
    report.mean = report.test_metric;
    return report;
}

}  // namespace

void save_predictions(const std::string& path, const std::vector<float>& probs, std::size_t n,
                      std::size_t k) {
    if (probs.size() != n * k) throw DimensionError("save_predictions: shape mismatch");
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), {'S', 'T', 'G', 'P'});
    put_u32(buf, 1);
    put_u64(buf, n);
    put_u32(buf, static_cast<std::uint32_t>(k));
    for (float v : probs) put_f32(buf, v);
    atomic_write_bytes(path, buf);
}

std::vector<float> load_predictions(const std::string& path, std::size_t* n, std::size_t* k) {
    auto bytes = read_file_bytes(path);
    ByteReader r(bytes);
    r.need(4);
    if (!(bytes[0] == 'S' && bytes[1] == 'T' && bytes[2] == 'G' && bytes[3] == 'P'))
        throw CacheError("predictions: bad magic in " + path);
    r.pos = 4;
    if (r.u32() != 1) throw CacheError("predictions: unsupported version");
    *n = r.u64();
    *k = r.u32();
    std::vector<float> probs(*n * *k);
    for (auto& v : probs) v = r.f32();
    if (!r.done()) throw CacheError("predictions: trailing bytes");
    return probs;
}

void cmd_gen_data(const RunConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    ArtifactPaths paths(dir);
    TextualGraph graph = generate_synthetic_tg(data_config(cfg));
    save_tsv(paths.texts(), graph.texts);
    save_edge_list(paths.edges(), graph.adj.undirected_edges());
    save_labels(paths.labels(), graph.labels);
    save_node_splits(paths.node_splits(), graph);
    echo("texts", paths.texts());
    echo("edges", paths.edges());
    echo("labels", paths.labels());
    echo("node splits", paths.node_splits());
    if (graph.edge_splits) {
        save_edge_split_file(paths.edge_split_file(), *graph.edge_splits);
        echo("edge splits", paths.edge_split_file());
    }
}

TextualGraph load_graph_artifacts(const RunConfig& cfg, const std::string& dir) {
    ArtifactPaths paths(dir);
    require_artifact(paths.edges(), "gen-data");
    require_artifact(paths.texts(), "gen-data");
    require_artifact(paths.labels(), "gen-data");
    require_artifact(paths.node_splits(), "gen-data");

    TextualGraph graph;
    auto edges = load_edge_list(paths.edges());
    auto labels_file = paths.labels();
    // node count comes from the label file
    {
        std::ifstream in(labels_file);
        std::size_t lines = 0;
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) ++lines;
        graph.adj = build_csr(edges, lines);
    }
    graph.labels = load_labels(labels_file, graph.num_nodes());
    graph.num_classes = cfg.data.num_classes;
    graph.texts = load_tsv(paths.texts(), graph.num_nodes());
    load_node_splits(paths.node_splits(), graph);
    if (cfg.link_task()) {
        SyntheticTgConfig data = data_config(cfg);
        RngState esplit_rng = RngState(data.seed).substream("edge-splits");
        graph.edge_splits = split_edges(graph.adj, data.edge_valid_frac, data.edge_test_frac,
                                        data.num_eval_negatives, esplit_rng);
    }
    graph.validate();
    return graph;
}

void cmd_pretrain_mlm(const RunConfig& cfg, const std::string& dir) {
    ArtifactPaths paths(dir);
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    Vocab vocab = build_vocab(graph.train_texts(), cfg.min_freq);
    save_vocab(paths.vocab(), vocab);
    echo("vocab", paths.vocab());

    EncoderConfig ecfg = cfg.encoder;
    ecfg.vocab_size = static_cast<std::size_t>(vocab.size());
    RngState root(cfg.seed);
    RngState init_rng = root.substream("lm-init");
    auto model = EncoderModel<float>::init(ecfg, init_rng);

    auto params = model.mlm_params();
    for (auto& p : params) p.set_requires_grad(true);
    AdamWState<float> opt(cfg.mlm_learning_rate, 0.0);
    opt.init(params);
    RngState mlm_rng = root.substream("mlm");
    RngState shuffle_rng = root.substream("mlm-shuffle");
    for (std::size_t epoch = 0; epoch < cfg.mlm_epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (const auto& batch : batch_texts(graph, all_nodes(graph), vocab, cfg.encoder.max_len,
                                             cfg.mlm_batch_size, &shuffle_rng)) {
            auto loss = mlm_pretrain_step(model, batch, cfg.mlm_mask_rate, mlm_rng, params, opt);
            if (loss) {
                loss_sum += *loss;
                ++steps;
            }
        }
        std::cout << "mlm epoch " << epoch << " loss "
                  << (steps ? loss_sum / static_cast<double>(steps) : 0.0) << "\n";
    }
    for (auto& p : params) p.set_requires_grad(false);
    save_encoder(paths.mlm_ckpt(), model);
    echo("mlm checkpoint", paths.mlm_ckpt());
}

void cmd_finetune(const RunConfig& cfg, const std::string& dir) {
    ArtifactPaths paths(dir);
    require_artifact(paths.vocab(), "pretrain-mlm");
    require_artifact(paths.mlm_ckpt(), "pretrain-mlm");
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    Vocab vocab = load_vocab(paths.vocab());
    auto model = load_encoder(paths.mlm_ckpt());

    Stage1Config s1 = cfg.stage1;
    s1.max_len = cfg.encoder.max_len;
    s1.seed = RngState(cfg.seed).substream("lm").seed;
    RngState head_rng = RngState(cfg.seed).substream("lm-head");
    if (s1.use_lora) {
        RngState wrap_rng = RngState(cfg.seed).substream("lm-lora");
        lora_wrap(model, s1.lora, wrap_rng);
    }

    Stage1Result result;
    if (cfg.link_task()) {
        auto head = LinkHead<float>::init(model.cfg.d_model, s1.link_head_hidden,
                                          s1.header_dropout, head_rng);
        result = finetune_link(graph, model, head, vocab, s1);
    } else {
        auto head = NodeClsHead<float>::init(model.cfg.d_model, graph.num_classes,
                                             s1.header_dropout, head_rng);
        result = finetune_cls(graph, model, head, vocab, s1);
    }
    std::string log = "epoch,loss,train_metric,valid_metric\n";
    for (auto& row : result.epochs)
        log += std::to_string(row.epoch) + "," + std::to_string(row.loss) + "," +
               std::to_string(row.train_metric) + "," + std::to_string(row.valid_metric) + "\n";
    atomic_write_text(paths.stage1_log(), log);
    save_encoder(paths.finetuned_ckpt(), model);
    echo("finetuned checkpoint", paths.finetuned_ckpt());
    echo("stage1 log", paths.stage1_log());
    std::cout << "best epoch " << result.best_epoch << " valid " << result.best_valid << "\n";
}

void cmd_embed(const RunConfig& cfg, const std::string& dir, const std::string& ckpt_path,
               const std::string& out_path, Provenance provenance) {
    ArtifactPaths paths(dir);
    require_artifact(paths.vocab(), "pretrain-mlm");
    require_artifact(ckpt_path, "pretrain-mlm or finetune");
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    Vocab vocab = load_vocab(paths.vocab());
    auto model = load_encoder(ckpt_path);
    if (model.lora_wrapped) lora_merge(model);
    FeatureMatrix fm = extract_embeddings(graph, model, vocab, cfg.stage1.batch_size);
    fm.provenance = provenance;
    fm.config_hash = config_hash_bytes(cfg);
    cache_write(out_path, fm);
    echo("feature cache", out_path);
}

void cmd_bow(const RunConfig& cfg, const std::string& dir) {
    ArtifactPaths paths(dir);
    require_artifact(paths.vocab(), "pretrain-mlm");
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    Vocab vocab = load_vocab(paths.vocab());
    FeatureMatrix fm = bow_features(graph, vocab, cfg.bow_dim);
    fm.config_hash = config_hash_bytes(cfg);
    cache_write(paths.cache("bow"), fm);
    echo("feature cache", paths.cache("bow"));
}

EvalReport cmd_train_gnn(const RunConfig& cfg, const std::string& dir, GnnArch arch,
                         const std::string& features_path) {
    ArtifactPaths paths(dir);
    require_artifact(features_path, "embed or bow");
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    FeatureMatrix fm = cache_read(features_path);

    GnnConfig gcfg = cfg.gnn;
    gcfg.arch = arch;
    gcfg.seed = RngState(cfg.seed).substream("gnn").seed;
    const Task task = cfg.link_task() ? Task::link : Task::nodecls;
    RngState init_rng = RngState(cfg.seed).substream("gnn-init");
    GnnModel model = GnnModel::init(gcfg, task, fm.d, graph.num_classes, init_rng);
    auto result = train_gnn(graph, fm, gcfg, task, model);

    EvalReport report = evaluate_gnn_model(cfg, model, graph, fm, &result);
    const std::string arch_name = gnn_arch_name(arch);
    const std::string prov = provenance_name(fm.provenance);
    save_gnn(paths.gnn_ckpt(arch_name, prov), model);
    save_report_kv(paths.report_kv(arch_name, prov), report);
    if (task == Task::nodecls) {
        auto probs = predict_cls_probs(model, graph, fm);
        save_predictions(paths.preds(arch_name, prov), probs, graph.num_nodes(),
                         static_cast<std::size_t>(model.num_classes));
        echo("predictions", paths.preds(arch_name, prov));
    }
    echo("gnn checkpoint", paths.gnn_ckpt(arch_name, prov));
    echo("report", paths.report_kv(arch_name, prov));
    return report;
}

EvalReport cmd_evaluate(const RunConfig& cfg, const std::string& dir,
                        const std::string& gnn_ckpt_path, const std::string& features_path) {
    require_artifact(gnn_ckpt_path, "train-gnn");
    require_artifact(features_path, "embed or bow");
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    FeatureMatrix fm = cache_read(features_path);
    GnnModel model = load_gnn(gnn_ckpt_path);
    EvalReport report = evaluate_gnn_model(cfg, model, graph, fm, nullptr);
    std::cout << report_csv_header() << "\n" << report_csv_row(report) << "\n";
    return report;
}

EvalReport cmd_ensemble(const RunConfig& cfg, const std::string& dir,
                        const std::vector<std::string>& pred_paths,
                        const std::vector<double>& weights) {
    if (pred_paths.size() < 2) throw ValueError("ensemble: need at least two member predictions");
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    std::vector<std::vector<float>> members;
    std::size_t n = 0, k = 0;
    for (const auto& path : pred_paths) {
        require_artifact(path, "train-gnn");
        std::size_t ni = 0, ki = 0;
        members.push_back(load_predictions(path, &ni, &ki));
        if (n == 0) {
            n = ni;
            k = ki;
        } else if (ni != n || ki != k) {
            throw DimensionError("ensemble: member prediction shapes disagree");
        }
    }
    EnsembleSpec spec;
    spec.weights = weights.empty() ? std::vector<double>(members.size(), 1.0) : weights;
    auto combined = ensemble(members, spec);
    auto preds = argmax_rows(combined, n, k);

    EvalReport report;
    report.task = cfg.task;
    report.arch = "ensemble";
    report.feature_source = "ensemble";
    report.metric_name = "accuracy";
    report.seeds = {cfg.seed};
    report.config_hash = cfg.config_hash_hex();
    auto split_acc = [&](const std::vector<std::int64_t>& nodes) {
        std::vector<std::int32_t> p, y;
        for (auto v : nodes) {
            p.push_back(preds[v]);
            y.push_back(graph.labels[v]);
        }
        return accuracy(p, y);
    };
    report.train_metric = split_acc(graph.train_nodes);
    report.valid_metric = split_acc(graph.valid_nodes);
    report.test_metric = split_acc(graph.test_nodes);
    report.delta_overfit = report.train_metric - report.test_metric;
    report.mean = report.test_metric;
    ArtifactPaths paths(dir);
    save_predictions(paths.preds("ensemble", "mixed"), combined, n, k);
    save_report_kv(paths.report_kv("ensemble", "mixed"), report);
    echo("ensemble predictions", paths.preds("ensemble", "mixed"));
    echo("ensemble report", paths.report_kv("ensemble", "mixed"));
    return report;
}

void cmd_search(const RunConfig& cfg, const std::string& dir, const std::string& stage,
                std::size_t trials, const std::string& features_path) {
    ArtifactPaths paths(dir);
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    if (stage == "lm") {
        require_artifact(paths.vocab(), "pretrain-mlm");
        require_artifact(paths.mlm_ckpt(), "pretrain-mlm");
        Vocab vocab = load_vocab(paths.vocab());
        SearchSpace space = SearchSpace::lm_space(cfg.link_task());
        auto objective = [&](const TrialConfig& trial) {
            auto model = load_encoder(paths.mlm_ckpt());
            Stage1Config s1 = cfg.stage1;
            s1.max_len = cfg.encoder.max_len;
            s1.learning_rate = trial.get("learning_rate");
            s1.weight_decay = trial.get("weight_decay");
            if (trial.has("label_smoothing")) s1.label_smoothing = trial.get("label_smoothing");
            s1.header_dropout = trial.get("header_dropout");
            s1.use_lora = true;
            s1.lora.rank = static_cast<std::size_t>(trial.get("lora_r"));
            s1.lora.alpha = trial.get("lora_alpha");
            s1.lora.adapter_dropout = trial.get("lora_dropout");
            s1.seed = RngState(cfg.seed).substream("lm").seed;
            RngState wrap_rng = RngState(cfg.seed).substream("lm-lora");
            lora_wrap(model, s1.lora, wrap_rng);
            RngState head_rng = RngState(cfg.seed).substream("lm-head");
            if (cfg.link_task()) {
                auto head = LinkHead<float>::init(model.cfg.d_model, s1.link_head_hidden,
                                                  s1.header_dropout, head_rng);
                return finetune_link(graph, model, head, vocab, s1).best_valid;
            }
            auto head = NodeClsHead<float>::init(model.cfg.d_model, graph.num_classes,
                                                 s1.header_dropout, head_rng);
            return finetune_cls(graph, model, head, vocab, s1).best_valid;
        };
        auto result = run_search(space, trials, objective,
                                 RngState(cfg.seed).substream("hpo-lm").seed);
        save_trial_log_csv(paths.trial_log("lm"), space, result);
        echo("trial log", paths.trial_log("lm"));
        std::cout << "best trial " << result.best().id << " objective "
                  << result.best().objective << "\n";
        return;
    }
    if (stage == "gnn") {
        require_artifact(features_path, "embed or bow");
        FeatureMatrix fm = cache_read(features_path);
        SearchSpace space = SearchSpace::gnn_space();
        const Task task = cfg.link_task() ? Task::link : Task::nodecls;
        auto objective = [&](const TrialConfig& trial) {
            GnnConfig gcfg = cfg.gnn;
            gcfg.learning_rate = trial.get("learning_rate");
            gcfg.weight_decay = trial.get("weight_decay");
            gcfg.label_smoothing = trial.get("label_smoothing");
            gcfg.dropout = trial.get("dropout");
            gcfg.num_layers = static_cast<std::size_t>(trial.get("num_layers"));
            if (!gcfg.full_batch) gcfg.fanouts.assign(gcfg.num_layers, 10);
            gcfg.seed = RngState(cfg.seed).substream("gnn").seed;
            RngState init_rng = RngState(cfg.seed).substream("gnn-init");
            GnnModel model = GnnModel::init(gcfg, task, fm.d, graph.num_classes, init_rng);
            return train_gnn(graph, fm, gcfg, task, model).best_valid;
        };
        auto result = run_search(space, trials, objective,
                                 RngState(cfg.seed).substream("hpo-gnn").seed);
        save_trial_log_csv(paths.trial_log("gnn"), space, result);
        echo("trial log", paths.trial_log("gnn"));
        std::cout << "best trial " << result.best().id << " objective "
                  << result.best().objective << "\n";
        return;
    }
    throw ConfigError("search: stage must be lm or gnn");
}

void cmd_project(const RunConfig& cfg, const std::string& dir,
                 const std::string& features_path) {
    ArtifactPaths paths(dir);
    require_artifact(features_path, "embed or bow");
    TextualGraph graph = load_graph_artifacts(cfg, dir);
    FeatureMatrix fm = cache_read(features_path);
    RngState rng = RngState(cfg.seed).substream("eval");
    auto proj = project_2d(fm, graph.labels, cfg.projection_sample_per_class, rng);
    const std::string out = paths.projection(provenance_name(fm.provenance));
    save_projection_csv(out, proj);
    echo("projection", out);
}

void cmd_pipeline(const RunConfig& cfg, const std::string& dir) {
    ArtifactPaths paths(dir);
    cmd_gen_data(cfg, dir);
    cmd_pretrain_mlm(cfg, dir);
    cmd_embed(cfg, dir, paths.mlm_ckpt(), paths.cache("fixed"), Provenance::fixed);
    cmd_finetune(cfg, dir);
    const Provenance ft_prov =
        cfg.stage1.use_lora ? Provenance::simteg : Provenance::simteg_full;
    const std::string ft_name = provenance_name(ft_prov);
    cmd_embed(cfg, dir, paths.finetuned_ckpt(), paths.cache(ft_name), ft_prov);
    cmd_bow(cfg, dir);

    std::vector<EvalReport> reports;
    for (GnnArch arch : cfg.pipeline_archs)
        for (const std::string& prov : {std::string("bow"), std::string("fixed"), ft_name})
            reports.push_back(cmd_train_gnn(cfg, dir, arch, paths.cache(prov)));

    std::string table = report_csv_header() + ",delta_mlp,delta_gnn\n";
    for (const auto& r : reports) {
        table += report_csv_row(r);
        // comparison deltas when the designate, mlp and sage rows coexist
        const EvalReport* designate = nullptr;
        const EvalReport* mlp = nullptr;
        const EvalReport* sage = nullptr;
        for (const auto& other : reports) {
            if (other.feature_source != r.feature_source) continue;
            if (other.arch == cfg.designate_arch) designate = &other;
            if (other.arch == "mlp") mlp = &other;
            if (other.arch == "sage") sage = &other;
        }
        if (designate && mlp && sage && r.arch == cfg.designate_arch) {
            auto deltas = compare_report(*designate, *mlp, *sage);
            table += "," + std::to_string(deltas.delta_mlp) + "," +
                     std::to_string(deltas.delta_gnn);
        } else {
            table += ",,";
        }
        table += "\n";
    }
    atomic_write_text(paths.comparison(), table);
    echo("comparison table", paths.comparison());
}

}  // namespace stg
