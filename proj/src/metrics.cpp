#include "stg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stg/io_util.hpp"

namespace stg {

double accuracy(const std::vector<std::int32_t>& predictions,
                const std::vector<std::int32_t>& labels) {
    if (predictions.size() != labels.size())
        throw DimensionError("accuracy: prediction/label count mismatch");
    if (predictions.empty()) throw ValueError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double rank_against(double pos_score, const std::vector<double>& neg_scores) {
    if (neg_scores.empty()) throw ParameterError("rank_against: need at least one negative");
    if (!std::isfinite(pos_score)) throw NumericError("rank_against: non-finite positive score");
    double greater = 0.0, ties = 0.0;
    for (double s : neg_scores) {
        if (!std::isfinite(s)) throw NumericError("rank_against: non-finite negative score");
        if (s > pos_score)
            greater += 1.0;
        else if (s == pos_score)
            ties += 1.0;
    }
    return 1.0 + greater + ties / 2.0;
}

double mrr(const std::vector<double>& pos_scores,
           const std::vector<std::vector<double>>& neg_scores) {
    if (pos_scores.empty()) throw ValueError("mrr: empty evaluation set");
    if (pos_scores.size() != neg_scores.size())
        throw DimensionError("mrr: positives and negative tables disagree");
    double acc = 0.0;
    for (std::size_t i = 0; i < pos_scores.size(); ++i)
        acc += 1.0 / rank_against(pos_scores[i], neg_scores[i]);
    return acc / static_cast<double>(pos_scores.size());
}

double hits_at_k(const std::vector<double>& pos_scores,
                 const std::vector<std::vector<double>>& neg_scores, std::size_t k) {
    if (pos_scores.empty()) throw ValueError("hits_at_k: empty evaluation set");
    if (pos_scores.size() != neg_scores.size())
        throw DimensionError("hits_at_k: positives and negative tables disagree");
    double acc = 0.0;
    for (std::size_t i = 0; i < pos_scores.size(); ++i) {
        if (k < 1 || k > neg_scores[i].size() + 1)
            throw ParameterError("hits_at_k: k out of range");
        if (rank_against(pos_scores[i], neg_scores[i]) <= static_cast<double>(k)) acc += 1.0;
    }
    return acc / static_cast<double>(pos_scores.size());
}

std::vector<float> ensemble(const std::vector<std::vector<float>>& members,
                            const EnsembleSpec& spec) {
    if (members.size() < 2) throw ValueError("ensemble: need at least two members");
    if (spec.weights.size() != members.size())
        throw DimensionError("ensemble: weight count does not match member count");
    const std::size_t len = members[0].size();
    double total = 0.0;
    for (double w : spec.weights) {
        if (w < 0.0) throw ValueError("ensemble: weights must be nonnegative");
        total += w;
    }
    if (total <= 0.0) throw ValueError("ensemble: weights sum to zero");
    for (const auto& m : members)
        if (m.size() != len) throw DimensionError("ensemble: member shapes disagree");
    std::vector<float> out(len, 0.0f);
    for (std::size_t mi = 0; mi < members.size(); ++mi) {
        const auto w = static_cast<float>(spec.weights[mi] / total);
        for (std::size_t i = 0; i < len; ++i) out[i] += w * members[mi][i];
    }
    return out;
}

std::vector<std::int32_t> argmax_rows(const std::vector<float>& probs, std::size_t n,
                                      std::size_t k) {
    if (probs.size() != n * k) throw DimensionError("argmax_rows: shape mismatch");
    std::vector<std::int32_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (probs[i * k + c] > probs[i * k + best]) best = c;
        out[i] = static_cast<std::int32_t>(best);
    }
    return out;
}

namespace {

// Power iteration for the leading eigenvector of X^T X (X centered rows).
std::vector<double> leading_direction(const std::vector<double>& rows, std::size_t n,
                                      std::size_t d, RngState& rng, double tol,
                                      double* out_eigenvalue) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;

    std::vector<double> xv(n), next(d);
    double eigenvalue = 0.0;
    for (int iter = 0; iter < 2000; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += rows[i * d + j] * v[j];
            xv[i] = acc;
        }
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) next[j] += rows[i * d + j] * xv[i];
        double next_norm = 0.0;
        for (double x : next) next_norm += x * x;
        next_norm = std::sqrt(next_norm);
        if (next_norm == 0.0) throw NumericError("project_2d: degenerate rank-deficient input");
        double diff = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            next[j] /= next_norm;
            diff = std::max(diff, std::abs(next[j] - v[j]));
        }
        eigenvalue = next_norm;
        v = next;
        if (diff < tol) break;
    }
    if (out_eigenvalue) *out_eigenvalue = eigenvalue;
    return v;
}

}  // namespace

Projected2d project_2d(const FeatureMatrix& fm, const std::vector<std::int32_t>& labels,
                       std::size_t sample_per_class, RngState& rng) {
    if (fm.n != labels.size()) throw DimensionError("project_2d: label count mismatch");
    if (fm.n < 2) throw ValueError("project_2d: need at least 2 samples");

    std::int32_t num_classes = 0;
    for (auto y : labels) num_classes = std::max(num_classes, y + 1);
    std::vector<std::vector<std::int64_t>> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i]].push_back(static_cast<std::int64_t>(i));

    std::vector<std::int64_t> chosen;
    for (auto& members : by_class) {
        for (std::size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[rng.next_below(i)]);
        const std::size_t take = std::min(sample_per_class, members.size());
        chosen.insert(chosen.end(), members.begin(), members.begin() + take);
    }
    std::sort(chosen.begin(), chosen.end());
    const std::size_t n = chosen.size(), d = fm.d;
    if (n < 2) throw ValueError("project_2d: need at least 2 sampled rows");

    std::vector<double> centered(n * d);
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += fm.row(chosen[i])[j];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered[i * d + j] = fm.row(chosen[i])[j] - mean[j];

    double ev1 = 0.0;
    auto pc1 = leading_direction(centered, n, d, rng, 1e-9, &ev1);
    if (ev1 <= 1e-12) throw NumericError("project_2d: all sampled rows are identical");

    // deflate and find the second component
    std::vector<double> deflated = centered;
    for (std::size_t i = 0; i < n; ++i) {
        double proj = 0.0;
        for (std::size_t j = 0; j < d; ++j) proj += centered[i * d + j] * pc1[j];
        for (std::size_t j = 0; j < d; ++j) deflated[i * d + j] -= proj * pc1[j];
    }
    std::vector<double> pc2(d, 0.0);
    bool have_pc2 = true;
    try {
        pc2 = leading_direction(deflated, n, d, rng, 1e-9, nullptr);
    } catch (const NumericError&) {
        have_pc2 = false;  // exactly rank-1 data: second coordinate is zero
    }

    Projected2d out;
    out.x.resize(n);
    out.y.resize(n);
    out.label.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double px = 0.0, py = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            px += centered[i * d + j] * pc1[j];
            if (have_pc2) py += centered[i * d + j] * pc2[j];
        }
        out.x[i] = px;
        out.y[i] = py;
        out.label[i] = labels[chosen[i]];
    }
    return out;
}

void save_projection_csv(const std::string& path, const Projected2d& proj) {
    std::string body = "x,y,label\n";
    for (std::size_t i = 0; i < proj.x.size(); ++i) {
        body += std::to_string(proj.x[i]);
        body += ',';
        body += std::to_string(proj.y[i]);
        body += ',';
        body += std::to_string(proj.label[i]);
        body += '\n';
    }
    atomic_write_text(path, body);
}

double scatter_ratio(const FeatureMatrix& fm, const std::vector<std::int32_t>& labels) {
    if (fm.n != labels.size()) throw DimensionError("scatter_ratio: label count mismatch");
    if (fm.n == 0) throw ValueError("scatter_ratio: empty input");
    std::int32_t num_classes = 0;
    for (auto y : labels) num_classes = std::max(num_classes, y + 1);
    const std::size_t d = fm.d;
    std::vector<std::vector<double>> class_mean(num_classes, std::vector<double>(d, 0.0));
    std::vector<double> counts(num_classes, 0.0), global(d, 0.0);
    for (std::size_t i = 0; i < fm.n; ++i) {
        counts[labels[i]] += 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            class_mean[labels[i]][j] += fm.row(i)[j];
            global[j] += fm.row(i)[j];
        }
    }
    for (auto& g : global) g /= static_cast<double>(fm.n);
    for (std::int32_t c = 0; c < num_classes; ++c)
        if (counts[c] > 0)
            for (std::size_t j = 0; j < d; ++j) class_mean[c][j] /= counts[c];

    double between = 0.0, within = 0.0;
    for (std::int32_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = class_mean[c][j] - global[j];
            between += counts[c] * diff * diff;
        }
    }
    for (std::size_t i = 0; i < fm.n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = fm.row(i)[j] - class_mean[labels[i]][j];
            within += diff * diff;
        }
    if (within == 0.0) throw NumericError("scatter_ratio: zero within-class scatter");
    return between / within;
}

EvalReport aggregate_reports(const std::vector<EvalReport>& runs) {
    if (runs.empty()) throw ValueError("aggregate_reports: no runs");
    EvalReport out = runs[0];
    out.seeds.clear();
    double sum = 0.0, sq = 0.0;
    for (const auto& r : runs) {
        if (r.task != out.task || r.arch != out.arch || r.feature_source != out.feature_source ||
            r.metric_name != out.metric_name)
            throw ValueError("aggregate_reports: mixed report kinds");
        out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
        sum += r.test_metric;
        sq += r.test_metric * r.test_metric;
    }
    const double n = static_cast<double>(runs.size());
    out.mean = sum / n;
    out.stddev = runs.size() >= 2 ? std::sqrt(std::max(0.0, sq / n - out.mean * out.mean)) : 0.0;
    return out;
}

ComparisonDeltas compare_report(const EvalReport& designate, const EvalReport& mlp,
                                const EvalReport& sage) {
    for (const auto* r : {&mlp, &sage}) {
        if (r->task != designate.task || r->metric_name != designate.metric_name)
            throw ValueError("compare_report: reports do not share task/metric");
        if (r->seeds != designate.seeds)
            throw ValueError("compare_report: reports do not share seeds");
    }
    ComparisonDeltas d;
    d.delta_mlp = designate.test_metric - mlp.test_metric;
    d.delta_gnn = designate.test_metric - sage.test_metric;
    return d;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void save_report_kv(const std::string& path, const EvalReport& r) {
    std::string body;
    body += "task=" + r.task + "\n";
    body += "arch=" + r.arch + "\n";
    body += "feature_source=" + r.feature_source + "\n";
    body += "metric=" + r.metric_name + "\n";
    body += "train=" + fmt(r.train_metric) + "\n";
    body += "valid=" + fmt(r.valid_metric) + "\n";
    body += "test=" + fmt(r.test_metric) + "\n";
    body += "delta_overfit=" + fmt(r.delta_overfit) + "\n";
    body += "mean=" + fmt(r.mean) + "\n";
    body += "stddev=" + fmt(r.stddev) + "\n";
    body += "epochs_to_95=" + std::to_string(r.epochs_to_95) + "\n";
    body += "num_eval_negatives=" + std::to_string(r.num_eval_negatives) + "\n";
    body += "config_hash=" + r.config_hash + "\n";
    std::string seeds;
    for (auto s : r.seeds) {
        if (!seeds.empty()) seeds += ' ';
        seeds += std::to_string(s);
    }
    body += "seeds=" + seeds + "\n";
    for (auto& [k, v] : r.extra) body += k + "=" + fmt(v) + "\n";
    atomic_write_text(path, body);
}

std::string report_csv_header() {
    return "task,arch,feature_source,metric,train,valid,test,delta_overfit,mean,stddev,"
           "epochs_to_95,num_eval_negatives,config_hash,seeds";
}

std::string report_csv_row(const EvalReport& r) {
    std::string seeds;
    for (auto s : r.seeds) {
        if (!seeds.empty()) seeds += ' ';
        seeds += std::to_string(s);
    }
    return r.task + "," + r.arch + "," + r.feature_source + "," + r.metric_name + "," +
           fmt(r.train_metric) + "," + fmt(r.valid_metric) + "," + fmt(r.test_metric) + "," +
           fmt(r.delta_overfit) + "," + fmt(r.mean) + "," + fmt(r.stddev) + "," +
           std::to_string(r.epochs_to_95) + "," + std::to_string(r.num_eval_negatives) + "," +
           r.config_hash + "," + seeds;
}

}  // namespace stg
