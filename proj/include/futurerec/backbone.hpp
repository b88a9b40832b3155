#pragma once

#include <random>
#include <vector>

#include "futurerec/ops.hpp"
#include "futurerec/tensor.hpp"

namespace futurerec {

struct BackboneConfig {
    int64_t num_items = 0;  // V; the embedding table has V+1 rows (row 0 = pad)
    int64_t d = 64;
    int layers = 2;
    int heads = 2;
    int64_t max_len = 50;
    double dropout_rate = 0.2;
    double ln_eps = 1e-8;

    void validate() const;
};

struct BackboneParams {
    struct Block {
        Tensor wq, wk, wv, wo;      // d x d each
        Tensor ffn_w1, ffn_b1;      // d x 4d, 4d
        Tensor ffn_w2, ffn_b2;      // 4d x d, d
        Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    };
    BackboneConfig config;
    Tensor item_emb;  // (V+1) x d, row 0 is the padding slot
    Tensor pos_emb;   // max_len x d
    std::vector<Block> blocks;
};

/// Weights ~ Normal(0, 0.02) truncated at 2 sigma; layer-norm gains 1, biases 0.
BackboneParams init_backbone(const BackboneConfig& config, std::mt19937_64& rng);

/// Input embedding for one already-padded window: gather(M, ids) + P[0..T).
Tensor embed_window(const BackboneParams& params, const std::vector<int64_t>& ids);

/// Runs the transformer blocks over `rows` left-padded windows flattened into
/// H of shape [rows*window, d]. The attention mask is causal and also hides
/// padding keys, so states at real positions never read pad content.
/// Pass rng = nullptr for inference (no dropout).
Tensor transformer_states(const BackboneParams& params, const Tensor& h,
                          const std::vector<int32_t>& lengths, int64_t rows, int64_t window,
                          bool training, std::mt19937_64* rng);

/// Single-window encode: final-layer state at the last position (which holds
/// the most recent real item by left-padding).
Tensor encode(const BackboneParams& params, const Tensor& h, int32_t true_length,
              bool training = false, std::mt19937_64* rng = nullptr);

/// Batched encode of padded id windows -> [rows, d] current-state vectors.
Tensor encode_batch(const BackboneParams& params, const std::vector<int64_t>& padded_ids,
                    const std::vector<int32_t>& lengths, int64_t rows, int64_t window,
                    bool training, std::mt19937_64* rng);

/// Tied-matrix scoring: logits = h M^T and the softmax over all V+1 slots.
struct Prediction {
    Tensor logits;  // [rows, V+1]
    Tensor probs;   // [rows, V+1]
};
Prediction predict(const Tensor& h, const Tensor& item_emb);

/// Mean next-item cross-entropy, -log softmax(logits)[target]. Targets must
/// be real items in [1, V]; the padding id is a contract error.
Tensor main_loss(const Tensor& logits, const std::vector<int64_t>& targets);

}  // namespace futurerec
