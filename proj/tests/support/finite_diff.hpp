// Test-only finite-difference oracle. Independent of the tape: it re-runs a
// value-only loss closure under central differences and compares against
// whatever gradients the implementation accumulated.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "futurerec/tensor.hpp"

namespace testsupport {

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::string worst;  // "name[i]" of the worst element
};

/// Central differences on every element of every listed tensor. `loss`
/// must recompute the scalar objective from current tensor values (no tape).
/// Analytic gradients must already be accumulated; missing grad = 0.
inline GradCheck check_gradients(const std::vector<std::pair<std::string, futurerec::Tensor>>& params,
                                 const std::function<double()>& loss, double step = 1e-5) {
    GradCheck result;
    for (const auto& [name, tensor] : params) {
        futurerec::Tensor t = tensor;
        for (int64_t i = 0; i < t.size(); ++i) {
            double& slot = t.data()[static_cast<size_t>(i)];
            const double orig = slot;
            slot = orig + step;
            const double up = loss();
            slot = orig - step;
            const double down = loss();
            slot = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic =
                t.has_grad() ? t.grad()[static_cast<size_t>(i)] : 0.0;
            const double err = rel_err(analytic, numeric);
            if (err > result.max_rel_err) {
                result.max_rel_err = err;
                result.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return result;
}

inline futurerec::Tensor random_tensor(std::vector<int64_t> shape, std::mt19937_64& rng,
                                       double lo = -2.0, double hi = 2.0,
                                       bool requires_grad = true) {
    futurerec::Tensor t = futurerec::Tensor::zeros(std::move(shape), requires_grad);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : t.data()) v = u(rng);
    return t;
}

}  // namespace testsupport
