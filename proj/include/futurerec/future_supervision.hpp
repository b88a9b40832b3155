#pragma once

#include <random>
#include <vector>

#include "futurerec/ops.hpp"
#include "futurerec/tensor.hpp"

namespace futurerec {

/// Step-specific projector parameters for future steps k = 2..K. Each step
/// owns an independent d x d weight and d bias; nothing is shared with the
/// backbone or the contrastive head.
struct FutureSupParams {
    std::vector<Tensor> weights;  // index k-2
    std::vector<Tensor> biases;
    int horizon() const { return static_cast<int>(weights.size()) + 1; }
};

enum class FsReduction { ValidMean, BatchMean };

FutureSupParams init_future_sup(int64_t d, int horizon, std::mt19937_64& rng);

/// All K-1 projections phi_k(h) = relu(h W_k + b_k), computed as a single
/// batched transform over the column-stacked weights. Returns [n, K-1, d].
Tensor project_future(const Tensor& h, const FutureSupParams& params);

/// View of step k's states inside a project_future result -> [n, d].
Tensor future_step_states(const Tensor& projected, int k);

/// Confidence weight omega = exp(-H / tau), detached so no gradient reaches
/// the prediction distribution through the weighting.
Tensor confidence_weight(const Tensor& entropy, double tau);

/// Uncertainty-modulated multi-step loss. step_logits[k-2] scores step k for
/// the fs-valid rows only; targets are the matching item ids. Returns the
/// mean over valid samples (or over `batch_rows` under BatchMean).
/// Diagnostic per-step cross-entropies are written to per_step_ce if given.
Tensor future_supervision_loss(const std::vector<Tensor>& step_logits,
                               const std::vector<std::vector<int64_t>>& step_targets,
                               const Tensor& omega, FsReduction reduction, int64_t batch_rows,
                               std::vector<double>* per_step_ce = nullptr);

}  // namespace futurerec
