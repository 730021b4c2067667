#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stg/features.hpp"
#include "stg/rng.hpp"

namespace stg {

// Exact-match fraction.
double accuracy(const std::vector<std::int32_t>& predictions,
                const std::vector<std::int32_t>& labels);

// Rank of a positive among its negatives with average-rank tie handling:
// rank = 1 + #{neg > pos} + #{neg == pos} / 2.
double rank_against(double pos_score, const std::vector<double>& neg_scores);

// Mean reciprocal rank over an evaluation set; one negative table per
// positive.
double mrr(const std::vector<double>& pos_scores,
           const std::vector<std::vector<double>>& neg_scores);

// Fraction of positives ranked at or above k (same tie rule).
double hits_at_k(const std::vector<double>& pos_scores,
                 const std::vector<std::vector<double>>& neg_scores, std::size_t k);

struct EnsembleSpec {
    std::vector<double> weights;  // nonnegative; normalized internally
};

// Elementwise weighted mean of member prediction matrices. For classifiers
// the argmax is taken after averaging.
std::vector<float> ensemble(const std::vector<std::vector<float>>& members,
                            const EnsembleSpec& spec);

std::vector<std::int32_t> argmax_rows(const std::vector<float>& probs, std::size_t n,
                                      std::size_t k);

// Top-2 principal-component projection via iterated power method with
// deflation (tolerance 1e-9). Samples up to sample_per_class rows per class.
struct Projected2d {
    std::vector<double> x, y;
    std::vector<std::int32_t> label;
};
Projected2d project_2d(const FeatureMatrix& fm, const std::vector<std::int32_t>& labels,
                       std::size_t sample_per_class, RngState& rng);
void save_projection_csv(const std::string& path, const Projected2d& proj);

// Between-class to within-class scatter ratio of a feature matrix.
double scatter_ratio(const FeatureMatrix& fm, const std::vector<std::int32_t>& labels);

// Per-run evaluation summary plus the comparison deltas of the report table.
struct EvalReport {
    std::string task;            // nodecls | link
    std::string arch;            // lm | mlp | gcn | sage
    std::string feature_source;  // bow | fixed | simteg | simteg-full
    std::string metric_name;     // accuracy | mrr
    double train_metric = 0.0;
    double valid_metric = 0.0;
    double test_metric = 0.0;
    double delta_overfit = 0.0;  // train - test
    std::vector<std::uint64_t> seeds;
    double mean = 0.0;    // aggregate over runs (test metric)
    double stddev = 0.0;  // reported only when >= 2 runs
    std::string config_hash;
    std::size_t num_eval_negatives = 0;
    long epochs_to_95 = -1;  // epochs to reach 95% of final valid metric
    std::vector<std::pair<std::string, double>> extra;
};

// Aggregates single-run reports that share task/arch/source into mean/std.
EvalReport aggregate_reports(const std::vector<EvalReport>& runs);

struct ComparisonDeltas {
    double delta_mlp = 0.0;  // designate - MLP
    double delta_gnn = 0.0;  // designate - GraphSAGE
};

// The paper-table deltas between a designated strong model and the simple
// baselines; all reports must share task, metric and seeds.
ComparisonDeltas compare_report(const EvalReport& designate, const EvalReport& mlp,
                                const EvalReport& sage);

void save_report_kv(const std::string& path, const EvalReport& report);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

}  // namespace stg
