#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stg/rng.hpp"

namespace stg {

struct ParamSpec {
    enum class Kind { continuous, discrete };
    std::string name;
    Kind kind = Kind::continuous;
    double lo = 0.0, hi = 0.0;     // continuous bounds
    std::vector<double> choices;   // discrete values

    // Log-uniform sampling when the range is positive and spans at least
    // two decades.
    bool log_scale() const { return kind == Kind::continuous && lo > 0.0 && hi / lo >= 100.0; }
};

struct SearchSpace {
    enum class Stage { lm, gnn };
    Stage stage = Stage::lm;
    std::vector<ParamSpec> params;

    // The LM finetuning space; link prediction omits label smoothing.
    static SearchSpace lm_space(bool link_task);
    static SearchSpace gnn_space();
};

struct TrialConfig {
    std::vector<std::pair<std::string, double>> values;
    double get(const std::string& name) const;
    bool has(const std::string& name) const;
};

struct Trial {
    std::size_t id = 0;
    TrialConfig config;
    double objective = 0.0;
    bool ok = false;
    std::string error;
};

struct SearchResult {
    std::vector<Trial> trials;
    std::size_t best_index = 0;
    const Trial& best() const { return trials[best_index]; }
};

TrialConfig sample_trial(const SearchSpace& space, RngState& rng);

// Sequential random search, maximizing the objective. Failed trials are
// logged, not fatal. Trial i's configuration depends only on (seed, i), so
// a longer budget extends the same trial sequence.
SearchResult run_search(const SearchSpace& space, std::size_t budget,
                        const std::function<double(const TrialConfig&)>& objective,
                        std::uint64_t seed);

void save_trial_log_csv(const std::string& path, const SearchSpace& space,
                        const SearchResult& result);

}  // namespace stg
