#pragma once

#include <random>
#include <vector>

#include "futurerec/ops.hpp"
#include "futurerec/tensor.hpp"

namespace futurerec {

/// Parameters of the contrastive projection h^z = h W + b; a parameter set
/// of its own, independent of backbone and projector weights.
struct FutureClParams {
    Tensor w;  // d x d
    Tensor b;  // d
};

FutureClParams init_future_cl(int64_t d, std::mt19937_64& rng);

/// Future-horizon anchor: mean of the item embeddings of the next K items
/// v_{t+1..t+K} (the pooling starts at the immediate next item). One row per
/// fc-valid sample; every id must be a real item.
Tensor horizon_pool(const Tensor& item_emb, const std::vector<std::vector<int64_t>>& future_ids);

/// Plain affine map into the contrastive space (no activation).
Tensor project_state(const Tensor& h, const FutureClParams& params);

/// In-batch InfoNCE over dot-product similarities; row i's positive is its
/// own horizon z_i, the other rows act as negatives, and the denominator
/// includes the positive term. Fewer than two rows yields 0 with a warning.
Tensor infonce(const Tensor& hz, const Tensor& z, double temperature = 1.0);

/// Mean positive-vs-negative similarity gap, for diagnostics.
double similarity_gap(const Tensor& hz, const Tensor& z);

}  // namespace futurerec
