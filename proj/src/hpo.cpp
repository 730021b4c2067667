#include "stg/hpo.hpp"

#include <cmath>
#include <limits>

#include "stg/error.hpp"
#include "stg/io_util.hpp"

namespace stg {

SearchSpace SearchSpace::lm_space(bool link_task) {
    SearchSpace s;
    s.stage = Stage::lm;
    s.params.push_back({"learning_rate", ParamSpec::Kind::continuous, 1e-6, 1e-4, {}});
    s.params.push_back({"weight_decay", ParamSpec::Kind::continuous, 1e-7, 1e-4, {}});
    if (!link_task)
        s.params.push_back({"label_smoothing", ParamSpec::Kind::continuous, 0.1, 0.7, {}});
    s.params.push_back({"header_dropout", ParamSpec::Kind::continuous, 0.1, 0.8, {}});
    s.params.push_back({"lora_r", ParamSpec::Kind::discrete, 0, 0, {1, 2, 4, 8}});
    s.params.push_back({"lora_alpha", ParamSpec::Kind::discrete, 0, 0, {4, 8, 16, 32}});
    s.params.push_back({"lora_dropout", ParamSpec::Kind::continuous, 0.1, 0.8, {}});
    return s;
}

SearchSpace SearchSpace::gnn_space() {
    SearchSpace s;
    s.stage = Stage::gnn;
    s.params.push_back({"learning_rate", ParamSpec::Kind::continuous, 1e-4, 1e-2, {}});
    s.params.push_back({"weight_decay", ParamSpec::Kind::continuous, 1e-7, 1e-4, {}});
    s.params.push_back({"label_smoothing", ParamSpec::Kind::continuous, 0.1, 0.7, {}});
    s.params.push_back({"dropout", ParamSpec::Kind::continuous, 0.1, 0.8, {}});
    s.params.push_back({"num_layers", ParamSpec::Kind::discrete, 0, 0, {2, 3, 4, 6, 8}});
    return s;
}

double TrialConfig::get(const std::string& name) const {
    for (const auto& [k, v] : values)
        if (k == name) return v;
    throw ParameterError("trial config: no parameter named '" + name + "'");
}

bool TrialConfig::has(const std::string& name) const {
    for (const auto& [k, v] : values)
        if (k == name) return true;
    return false;
}

TrialConfig sample_trial(const SearchSpace& space, RngState& rng) {
    if (space.params.empty()) throw ParameterError("sample_trial: empty search space");
    TrialConfig cfg;
    for (const auto& p : space.params) {
        double value = 0.0;
        if (p.kind == ParamSpec::Kind::discrete) {
            if (p.choices.empty()) throw ParameterError("sample_trial: empty choice list");
            value = p.choices[rng.next_below(p.choices.size())];
        } else {
            if (!(p.lo < p.hi)) throw ParameterError("sample_trial: bad continuous bounds");
            if (p.log_scale())
                value = std::exp(rng.uniform(std::log(p.lo), std::log(p.hi)));
            else
                value = rng.uniform(p.lo, p.hi);
        }
        cfg.values.emplace_back(p.name, value);
    }
    return cfg;
}

SearchResult run_search(const SearchSpace& space, std::size_t budget,
                        const std::function<double(const TrialConfig&)>& objective,
                        std::uint64_t seed) {
    if (budget < 1) throw ParameterError("run_search: budget must be at least 1");
    SearchResult result;
    RngState root(seed);
    double best = -std::numeric_limits<double>::infinity();
    bool any_ok = false;
    for (std::size_t i = 0; i < budget; ++i) {
        Trial trial;
        trial.id = i;
        RngState trial_rng = root.substream(i);
        trial.config = sample_trial(space, trial_rng);
        try {
            trial.objective = objective(trial.config);
            if (!std::isfinite(trial.objective))
                throw NumericError("objective returned a non-finite value");
            trial.ok = true;
        } catch (const std::exception& e) {
            trial.ok = false;
            trial.error = e.what();
        }
        if (trial.ok && trial.objective > best) {
            best = trial.objective;
            result.best_index = i;
            any_ok = true;
        }
        result.trials.push_back(std::move(trial));
    }
    if (!any_ok) throw DataError("run_search: all trials failed");
    return result;
}

void save_trial_log_csv(const std::string& path, const SearchSpace& space,
                        const SearchResult& result) {
    std::string body = "trial_id";
    for (const auto& p : space.params) body += "," + p.name;
    body += ",objective,status\n";
    char buf[64];
    for (const auto& t : result.trials) {
        body += std::to_string(t.id);
        for (const auto& p : space.params) {
            std::snprintf(buf, sizeof(buf), "%.10g", t.config.get(p.name));
            body += ",";
            body += buf;
        }
        std::snprintf(buf, sizeof(buf), "%.10g", t.objective);
        body += ",";
        body += t.ok ? buf : "nan";
        body += ",";
        body += t.ok ? "ok" : "failed";
        body += "\n";
    }
    atomic_write_text(path, body);
}

}  // namespace stg
