#include "futurerec/future_supervision.hpp"

#include <cmath>

namespace futurerec {

using namespace ops;

FutureSupParams init_future_sup(int64_t d, int horizon, std::mt19937_64& rng) {
    if (horizon < 2)
        throw contract_error("future supervision needs horizon >= 2, got " +
                             std::to_string(horizon));
    constexpr double kStd = 0.02;
    FutureSupParams p;
    for (int k = 2; k <= horizon; ++k) {
        Tensor w = Tensor::zeros({d, d}, true);
        fill_truncated_normal(w, kStd, rng);
        Tensor b = Tensor::zeros({d}, true);
        fill_truncated_normal(b, kStd, rng);
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

Tensor project_future(const Tensor& h, const FutureSupParams& params) {
    if (params.weights.empty()) throw contract_error("project_future: no projectors");
    const int64_t n = h.dim(0), d = h.dim(1);
    const int64_t steps = static_cast<int64_t>(params.weights.size());
    Tensor w_all = params.weights.size() == 1 ? params.weights[0] : concat_cols(params.weights);
    Tensor b_all = params.biases.size() == 1 ? params.biases[0] : concat_rows(params.biases);
    Tensor projected = relu(linear(h, w_all, b_all));  // [n, steps*d]
    return reshape(projected, {n, steps, d});
}

Tensor future_step_states(const Tensor& projected, int k) {
    if (projected.ndim() != 3)
        throw shape_error("future_step_states: expected [n, K-1, d], got " +
                          shape_str(projected.shape()));
    const int64_t n = projected.dim(0), steps = projected.dim(1), d = projected.dim(2);
    if (k < 2 || k > steps + 1)
        throw contract_error("future_step_states: step " + std::to_string(k) +
                             " outside [2, K]");
    Tensor flat = reshape(projected, {n, steps * d});
    return slice_cols(flat, static_cast<int64_t>(k - 2) * d, d);
}

Tensor confidence_weight(const Tensor& entropy, double tau) {
    if (tau <= 0.0) throw contract_error("confidence_weight: tau must be positive");
    for (double h : entropy.data())
        if (h < 0.0) throw contract_error("confidence_weight: negative entropy");
    return ops::exp(scalar_mul(detach(entropy), -1.0 / tau));
}

Tensor future_supervision_loss(const std::vector<Tensor>& step_logits,
                               const std::vector<std::vector<int64_t>>& step_targets,
                               const Tensor& omega, FsReduction reduction, int64_t batch_rows,
                               std::vector<double>* per_step_ce) {
    const int64_t steps = static_cast<int64_t>(step_logits.size());
    if (steps == 0 || step_logits[0].dim(0) == 0) return Tensor::scalar(0.0);
    if (step_targets.size() != step_logits.size())
        throw contract_error("future_supervision_loss: step count mismatch");
    const int64_t n = step_logits[0].dim(0);
    if (omega.size() != n)
        throw contract_error("future_supervision_loss: omega size mismatch");

    Tensor ce_sum;  // [n], sum over steps of -log yhat^(k)[target]
    for (int64_t s = 0; s < steps; ++s) {
        const Tensor& logits = step_logits[static_cast<size_t>(s)];
        const auto& targets = step_targets[static_cast<size_t>(s)];
        const int64_t v = logits.dim(1) - 1;
        for (int64_t t : targets)
            if (t < 1 || t > v)
                throw contract_error("future_supervision_loss: target " + std::to_string(t) +
                                     " outside [1," + std::to_string(v) + "]");
        Tensor ce = scalar_mul(gather_lastdim(log_softmax_lastdim(logits), targets), -1.0);
        if (per_step_ce) {
            double s_ce = 0.0;
            for (double c : ce.data()) s_ce += c;
            per_step_ce->push_back(s_ce / static_cast<double>(n));
        }
        ce_sum = s == 0 ? ce : add(ce_sum, ce);
    }
    Tensor per_sample = mul(scalar_mul(ce_sum, 1.0 / static_cast<double>(steps)), omega);
    if (reduction == FsReduction::ValidMean) return mean_all(per_sample);
    return scalar_mul(sum(per_sample), 1.0 / static_cast<double>(batch_rows));
}

}  // namespace futurerec
