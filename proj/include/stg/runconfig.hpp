#pragma once

#include <string>
#include <vector>

#include "stg/encoder.hpp"
#include "stg/gnn.hpp"
#include "stg/stage1.hpp"
#include "stg/synthetic.hpp"

namespace stg {

// The whole-run configuration: a flat INI-style file with [data], [encoder],
// [lora], [stage1], [gnn], [eval] and [hpo] sections plus global keys (seed,
// task). Unknown sections or keys are rejected and every range invariant is
// enforced at parse time. All randomness is derived from the single seed
// through named substreams.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string task = "nodecls";  // nodecls | link

    SyntheticTgConfig data;
    std::size_t min_freq = 1;

    EncoderConfig encoder;  // vocab_size filled after vocabulary construction
    double mlm_mask_rate = 0.15;
    std::size_t mlm_epochs = 3;
    double mlm_learning_rate = 1e-3;
    std::size_t mlm_batch_size = 32;

    Stage1Config stage1;
    GnnConfig gnn;
    std::vector<GnnArch> pipeline_archs = {GnnArch::sage};

    std::size_t bow_dim = 128;
    std::size_t projection_sample_per_class = 100;
    std::string designate_arch = "gcn";  // strong-model column of comparisons

    std::size_t hpo_lm_trials = 10;
    std::size_t hpo_gnn_trials = 20;

    bool link_task() const { return task == "link"; }

    // Applies one "section.key = value" assignment; throws ConfigError on
    // unknown keys or malformed values.
    void apply(const std::string& section, const std::string& key, const std::string& value);

    // Range invariants across all sections.
    void validate() const;

    // Canonical serialization used for config hashing.
    std::string canonical_string() const;
    std::string config_hash_hex() const;
};

RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

// "section.key=value" command-line override.
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace stg
