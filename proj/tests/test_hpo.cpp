#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "stg/hpo.hpp"

using namespace stg;

TEST_CASE("sample bounds and discrete membership") {
    auto space = SearchSpace::lm_space(false);
    RngState rng(1);
    std::set<double> ranks = {1, 2, 4, 8}, alphas = {4, 8, 16, 32};
    for (int i = 0; i < 10000; ++i) {
        auto cfg = sample_trial(space, rng);
        const double lr = cfg.get("learning_rate");
        CHECK(lr >= 1e-6);
        CHECK(lr <= 1e-4);
        CHECK(ranks.count(cfg.get("lora_r")) == 1);
        CHECK(alphas.count(cfg.get("lora_alpha")) == 1);
        const double ls = cfg.get("label_smoothing");
        CHECK(ls >= 0.1);
        CHECK(ls <= 0.7);
    }
}

TEST_CASE("link space omits label smoothing") {
    auto space = SearchSpace::lm_space(true);
    RngState rng(2);
    auto cfg = sample_trial(space, rng);
    CHECK_FALSE(cfg.has("label_smoothing"));
    CHECK(cfg.has("lora_r"));
}

TEST_CASE("log-uniform learning rate splits mass at the geometric midpoint") {
    auto space = SearchSpace::lm_space(false);
    RngState rng(3);
    int below = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto cfg = sample_trial(space, rng);
        if (cfg.get("learning_rate") < 1e-5) ++below;
    }
    const double frac = static_cast<double>(below) / draws;
    CHECK(frac > 0.45);
    CHECK(frac < 0.55);

    // dropout spans less than two decades, so it samples linearly
    int low_dropout = 0;
    RngState rng2(4);
    for (int i = 0; i < draws; ++i)
        if (sample_trial(space, rng2).get("header_dropout") < 0.45) ++low_dropout;
    const double dfrac = static_cast<double>(low_dropout) / draws;
    CHECK(dfrac > 0.45);
    CHECK(dfrac < 0.55);
}

TEST_CASE("gnn space rows") {
    auto space = SearchSpace::gnn_space();
    RngState rng(5);
    std::set<double> layer_choices = {2, 3, 4, 6, 8};
    for (int i = 0; i < 1000; ++i) {
        auto cfg = sample_trial(space, rng);
        CHECK(cfg.get("learning_rate") >= 1e-4);
        CHECK(cfg.get("learning_rate") <= 1e-2);
        CHECK(layer_choices.count(cfg.get("num_layers")) == 1);
    }
}

TEST_CASE("run_search basics") {
    auto space = SearchSpace::gnn_space();
    auto objective = [](const TrialConfig& cfg) {
        // deterministic objective: prefer small lr and few layers
        return -std::log10(cfg.get("learning_rate")) - cfg.get("num_layers") * 0.1;
    };

    SUBCASE("budget one returns the only trial") {
        auto result = run_search(space, 1, objective, 7);
        CHECK(result.trials.size() == 1);
        CHECK(result.best_index == 0);
    }

    SUBCASE("identical seeds give identical trial sequences") {
        auto a = run_search(space, 10, objective, 8);
        auto b = run_search(space, 10, objective, 8);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(a.trials[i].config.values == b.trials[i].config.values);
            CHECK(a.trials[i].objective == b.trials[i].objective);
        }
    }

    SUBCASE("prefix property: best is monotone in budget") {
        auto full = run_search(space, 20, objective, 9);
        double prev_best = -1e300;
        for (std::size_t budget = 1; budget <= 20; ++budget) {
            auto partial = run_search(space, budget, objective, 9);
            // trial i identical across budgets
            CHECK(partial.trials.back().config.values == full.trials[budget - 1].config.values);
            CHECK(partial.best().objective >= prev_best);
            prev_best = partial.best().objective;
        }
    }

    SUBCASE("failures are logged, not fatal") {
        int calls = 0;
        auto flaky = [&](const TrialConfig& cfg) {
            if (++calls % 2 == 0) throw NumericError("boom");
            return cfg.get("dropout");
        };
        auto result = run_search(space, 6, flaky, 10);
        int failed = 0;
        for (auto& t : result.trials)
            if (!t.ok) ++failed;
        CHECK(failed == 3);
        CHECK(result.best().ok);

        auto always_fail = [](const TrialConfig&) -> double { throw NumericError("boom"); };
        CHECK_THROWS_AS(run_search(space, 3, always_fail, 11), DataError);
    }

    SUBCASE("replay reproduces logged objectives") {
        auto result = run_search(space, 10, objective, 12);
        for (auto& t : result.trials) CHECK(objective(t.config) == t.objective);
    }
}
