#pragma once

#include <random>
#include <vector>

#include "futurerec/tensor.hpp"

namespace futurerec {
namespace ops {

// Dense products. All matrices are row-major 2-d tensors.
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n] -> [m,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]x[n,k]^T -> [m,n]

/// x[n,din] * w[din,dout] + b[dout], fused affine map.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Per-block products over `blocks` row-groups: a and b are [blocks*t, k];
/// block i of the output is A_i * B_i^T, giving [blocks*t, t].
Tensor block_matmul_nt(const Tensor& a, const Tensor& b, int64_t blocks);
/// a is [blocks*t, t], b is [blocks*t, k]; block i is A_i * B_i -> [blocks*t, k].
Tensor block_matmul(const Tensor& a, const Tensor& b, int64_t blocks);

// Elementwise and reductions.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& x, double c);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // numeric error on non-positive input
Tensor relu(const Tensor& x);
Tensor sum(const Tensor& x);       // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]
Tensor mean_lastdim(const Tensor& x);

// Shape surgery.
Tensor reshape(const Tensor& x, std::vector<int64_t> shape);
Tensor concat_rows(const std::vector<Tensor>& parts);  // stack along dim 0
Tensor concat_cols(const std::vector<Tensor>& parts);  // 2-d, concat along dim 1
Tensor slice_cols(const Tensor& x, int64_t start, int64_t len);
Tensor select_rows(const Tensor& x, const std::vector<int64_t>& row_ids);

/// Adds p[t,d] to every row-block of x[blocks*t, d] (position-embedding add).
Tensor add_block_bias(const Tensor& x, const Tensor& p, int64_t blocks);

// Normalization and probability ops. Row = everything over the last dim.
Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

/// Row gather from an embedding table; backward scatter-adds into the table.
Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids);

/// out[i] = x[i, ids[i]] for x of shape [n, v].
Tensor gather_lastdim(const Tensor& x, const std::vector<int64_t>& ids);

/// Value-equal tensor with no backward path to x.
Tensor detach(const Tensor& x);

/// Inverted dropout: surviving entries scaled by 1/(1-p) during training,
/// identity otherwise. 0 <= p < 1.
Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng);

/// Shannon entropy of each probability row, natural log. Rows must sum to 1
/// within 1e-4 (contract error otherwise); terms with p < 1e-12 contribute 0.
Tensor shannon_entropy(const Tensor& probs);

}  // namespace ops
}  // namespace futurerec
