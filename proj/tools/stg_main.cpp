#include <CLI11.hpp>
#include <functional>
#include <iostream>

#include "stg/pipeline.hpp"

namespace {

// Exit codes: 0 ok, 2 config error, 3 dependency error, 4 numeric error.
int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const stg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const stg::DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return 3;
    } catch (const stg::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage textual-graph learning: encoder finetuning, feature extraction, "
                 "and GNN training on synthetic textual graphs"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    double rho_flag = 0.0;
    bool rho_set = false;
    std::string task_flag;

    app.add_option("--config", config_path, "Run configuration file (INI format)");
    app.add_option("--out", out_dir, "Artifact directory");
    app.add_option("--set", overrides, "Override: section.key=value (repeatable)");
    app.add_option("--seed", seed_flag, "Global seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--rho", rho_flag, "Semantic correlation override")
        ->each([&](const std::string&) { rho_set = true; });
    app.add_option("--task", task_flag, "Task override: nodecls | link");

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic textual graph");
    auto* mlm = app.add_subcommand("pretrain-mlm", "Masked-LM pretraining of the encoder");
    auto* ft = app.add_subcommand("finetune", "Stage-1 supervised finetuning");
    std::string ft_peft;
    ft->add_option("--peft", ft_peft, "lora | full");

    auto* embed = app.add_subcommand("embed", "Extract node embeddings from a checkpoint");
    std::string embed_ckpt, embed_out, embed_prov = "simteg";
    embed->add_option("--ckpt", embed_ckpt, "Encoder checkpoint");
    embed->add_option("--out-cache", embed_out, "Output cache path");
    embed->add_option("--provenance", embed_prov, "bow|fixed|simteg|simteg-full");

    auto* bow = app.add_subcommand("bow", "Bag-of-words baseline features");

    auto* tg = app.add_subcommand("train-gnn", "Stage-2 GNN training on cached features");
    std::string tg_arch = "sage", tg_features;
    tg->add_option("--arch", tg_arch, "mlp | gcn | sage");
    tg->add_option("--features", tg_features, "Feature cache path");

    auto* ev = app.add_subcommand("evaluate", "Evaluate a trained GNN checkpoint");
    std::string ev_ckpt, ev_features;
    ev->add_option("--gnn", ev_ckpt, "GNN checkpoint")->required();
    ev->add_option("--features", ev_features, "Feature cache path")->required();

    auto* ens = app.add_subcommand("ensemble", "Weighted average of prediction files");
    std::vector<std::string> ens_preds;
    std::vector<double> ens_weights;
    ens->add_option("--preds", ens_preds, "Prediction files (two or more)")->required();
    ens->add_option("--weights", ens_weights, "Member weights (default uniform)");

    auto* search = app.add_subcommand("search", "Random hyperparameter search");
    std::string search_stage = "lm", search_features;
    std::size_t search_trials = 0;
    search->add_option("--stage", search_stage, "lm | gnn")->required();
    search->add_option("--trials", search_trials, "Trial budget (default per config)");
    search->add_option("--features", search_features, "Feature cache for gnn stage");

    auto* proj = app.add_subcommand("project-features", "Top-2 PCA projection CSV");
    std::string proj_features;
    proj->add_option("--features", proj_features, "Feature cache path")->required();

    auto* pipe = app.add_subcommand("pipeline", "Full chain from data generation to comparison");

    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        stg::RunConfig cfg =
            config_path.empty() ? stg::RunConfig{} : stg::load_run_config(config_path);
        for (const auto& o : overrides) stg::apply_override(cfg, o);
        if (seed_set) cfg.seed = seed_flag;
        if (rho_set) cfg.data.semantic_correlation = rho_flag;
        if (!task_flag.empty()) cfg.apply("", "task", task_flag);
        if (!ft_peft.empty()) cfg.apply("stage1", "peft", ft_peft);
        cfg.validate();

        stg::ArtifactPaths paths(out_dir);
        if (gen->parsed()) {
            stg::cmd_gen_data(cfg, out_dir);
        } else if (mlm->parsed()) {
            stg::cmd_pretrain_mlm(cfg, out_dir);
        } else if (ft->parsed()) {
            stg::cmd_finetune(cfg, out_dir);
        } else if (embed->parsed()) {
            const auto prov = stg::provenance_from_name(embed_prov);
            if (embed_ckpt.empty())
                embed_ckpt = prov == stg::Provenance::fixed ? paths.mlm_ckpt()
                                                            : paths.finetuned_ckpt();
            if (embed_out.empty()) embed_out = paths.cache(embed_prov);
            stg::cmd_embed(cfg, out_dir, embed_ckpt, embed_out, prov);
        } else if (bow->parsed()) {
            stg::cmd_bow(cfg, out_dir);
        } else if (tg->parsed()) {
            if (tg_features.empty()) tg_features = paths.cache("simteg");
            stg::cmd_train_gnn(cfg, out_dir, stg::gnn_arch_from_name(tg_arch), tg_features);
        } else if (ev->parsed()) {
            stg::cmd_evaluate(cfg, out_dir, ev_ckpt, ev_features);
        } else if (ens->parsed()) {
            stg::cmd_ensemble(cfg, out_dir, ens_preds, ens_weights);
        } else if (search->parsed()) {
            if (search_trials == 0)
                search_trials = search_stage == "lm" ? cfg.hpo_lm_trials : cfg.hpo_gnn_trials;
            if (search_features.empty()) search_features = paths.cache("simteg");
            stg::cmd_search(cfg, out_dir, search_stage, search_trials, search_features);
        } else if (proj->parsed()) {
            stg::cmd_project(cfg, out_dir, proj_features);
        } else if (pipe->parsed()) {
            stg::cmd_pipeline(cfg, out_dir);
        }
    });
}
