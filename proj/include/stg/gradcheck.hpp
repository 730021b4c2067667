#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stg/tensor.hpp"

namespace stg {

// Result of comparing analytic gradients against central finite differences.
struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::string worst_param;
    bool pass(double tol) const { return max_rel_err < tol; }
};

// Compares the tape gradient of a scalar-valued function against central
// differences with step h. Runs in 64-bit mode; the relative error uses a
// unit floor so near-zero gradients compare absolutely. Tensor handles share
// storage, so perturbing the local copies is visible to f.
inline GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                                  std::vector<std::pair<std::string, Tensor<double>>> params,
                                  double h = 1e-5) {
    GradCheckReport report;
    Tape<double> tape;
    std::vector<std::vector<double>> analytic;
    {
        TapeScope<double> scope(tape);
        Tensor<double> loss = f();
        if (!loss.all_finite()) throw NumericError("grad_check: non-finite loss");
        for (auto& [name, p] : params) p.zero_grad();
        tape.backward(loss);
        for (auto& [name, p] : params) analytic.push_back(p.grad());
    }
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi].second;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double orig = p.data()[i];
            p.data()[i] = orig + h;
            double up = f().item();
            p.data()[i] = orig - h;
            double down = f().item();
            p.data()[i] = orig;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NumericError("grad_check: non-finite perturbed output");
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi][i];
            const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = params[pi].first + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

}  // namespace stg
