#include "futurerec/backbone.hpp"

#include <cmath>

namespace futurerec {

using namespace ops;

void BackboneConfig::validate() const {
    if (num_items < 1) throw config_error("backbone: num_items must be >= 1");
    if (d < 1 || heads < 1 || d % heads != 0)
        throw config_error("backbone: d must be a positive multiple of heads");
    if (max_len < 1) throw config_error("backbone: max_len must be >= 1");
    if (layers < 0) throw config_error("backbone: layers must be >= 0");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw config_error("backbone: dropout_rate must be in [0,1)");
}

BackboneParams init_backbone(const BackboneConfig& config, std::mt19937_64& rng) {
    config.validate();
    constexpr double kStd = 0.02;
    BackboneParams p;
    p.config = config;
    p.item_emb = Tensor::zeros({config.num_items + 1, config.d}, true);
    fill_truncated_normal(p.item_emb, kStd, rng);
    p.pos_emb = Tensor::zeros({config.max_len, config.d}, true);
    fill_truncated_normal(p.pos_emb, kStd, rng);
    const int64_t d = config.d, dff = 4 * config.d;
    for (int l = 0; l < config.layers; ++l) {
        BackboneParams::Block b;
        for (Tensor* w : {&b.wq, &b.wk, &b.wv, &b.wo}) {
            *w = Tensor::zeros({d, d}, true);
            fill_truncated_normal(*w, kStd, rng);
        }
        b.ffn_w1 = Tensor::zeros({d, dff}, true);
        fill_truncated_normal(b.ffn_w1, kStd, rng);
        b.ffn_b1 = Tensor::zeros({dff}, true);
        fill_truncated_normal(b.ffn_b1, kStd, rng);
        b.ffn_w2 = Tensor::zeros({dff, d}, true);
        fill_truncated_normal(b.ffn_w2, kStd, rng);
        b.ffn_b2 = Tensor::zeros({d}, true);
        fill_truncated_normal(b.ffn_b2, kStd, rng);
        b.ln1_g = Tensor::full({d}, 1.0, true);
        b.ln1_b = Tensor::zeros({d}, true);
        b.ln2_g = Tensor::full({d}, 1.0, true);
        b.ln2_b = Tensor::zeros({d}, true);
        p.blocks.push_back(std::move(b));
    }
    return p;
}

Tensor embed_window(const BackboneParams& params, const std::vector<int64_t>& ids) {
    const int64_t t = static_cast<int64_t>(ids.size());
    if (t < 1 || t > params.config.max_len)
        throw contract_error("embed_window: window length " + std::to_string(t) +
                             " outside [1, max_len]");
    Tensor e = embedding_lookup(params.item_emb, ids);
    Tensor p = select_rows(params.pos_emb, [&] {
        std::vector<int64_t> pos(static_cast<size_t>(t));
        for (int64_t i = 0; i < t; ++i) pos[static_cast<size_t>(i)] = i;
        return pos;
    }());
    return add(e, p);
}

namespace {

// Causal plus key-padding mask, 0 where allowed and -1e9 where hidden.
// Left-padding puts real tokens at window positions [window-len, window).
Tensor make_attention_mask(const std::vector<int32_t>& lengths, int64_t rows, int64_t window) {
    Tensor mask = Tensor::zeros({rows * window, window});
    constexpr double kHide = -1e9;
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t first_real = window - lengths[static_cast<size_t>(r)];
        for (int64_t q = 0; q < window; ++q) {
            double* row = mask.data().data() + (r * window + q) * window;
            for (int64_t k = 0; k < window; ++k)
                if (k > q || k < first_real) row[k] = kHide;
        }
    }
    return mask;
}

}  // namespace

Tensor transformer_states(const BackboneParams& params, const Tensor& h,
                          const std::vector<int32_t>& lengths, int64_t rows, int64_t window,
                          bool training, std::mt19937_64* rng) {
    const BackboneConfig& cfg = params.config;
    if (h.ndim() != 2 || h.dim(0) != rows * window || h.dim(1) != cfg.d)
        throw shape_error("transformer_states: expected [" + std::to_string(rows * window) +
                          "x" + std::to_string(cfg.d) + "], got " + shape_str(h.shape()));
    if (static_cast<int64_t>(lengths.size()) != rows)
        throw contract_error("transformer_states: lengths/rows mismatch");
    if (params.blocks.empty()) return h;

    const int64_t dh = cfg.d / cfg.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool drop = training && cfg.dropout_rate > 0.0;
    if (drop && rng == nullptr)
        throw contract_error("transformer_states: training dropout needs an rng");
    Tensor mask = make_attention_mask(lengths, rows, window);

    Tensor x = h;
    for (const auto& blk : params.blocks) {
        Tensor q = matmul(x, blk.wq);
        Tensor k = matmul(x, blk.wk);
        Tensor v = matmul(x, blk.wv);
        std::vector<Tensor> head_ctx;
        for (int hh = 0; hh < cfg.heads; ++hh) {
            Tensor qh = slice_cols(q, hh * dh, dh);
            Tensor kh = slice_cols(k, hh * dh, dh);
            Tensor vh = slice_cols(v, hh * dh, dh);
            Tensor scores = add(scalar_mul(block_matmul_nt(qh, kh, rows), scale), mask);
            Tensor attn = softmax_lastdim(scores);
            if (drop) attn = dropout(attn, cfg.dropout_rate, true, *rng);
            head_ctx.push_back(block_matmul(attn, vh, rows));
        }
        Tensor ctx = cfg.heads == 1 ? head_ctx[0] : concat_cols(head_ctx);
        Tensor attn_out = matmul(ctx, blk.wo);
        x = layer_norm(add(x, attn_out), blk.ln1_g, blk.ln1_b, cfg.ln_eps);
        Tensor f = linear(relu(linear(x, blk.ffn_w1, blk.ffn_b1)), blk.ffn_w2, blk.ffn_b2);
        if (drop) f = dropout(f, cfg.dropout_rate, true, *rng);
        x = layer_norm(add(x, f), blk.ln2_g, blk.ln2_b, cfg.ln_eps);
    }
    return x;
}

Tensor encode(const BackboneParams& params, const Tensor& h, int32_t true_length, bool training,
              std::mt19937_64* rng) {
    const int64_t window = h.dim(0);
    Tensor states = transformer_states(params, h, {true_length}, 1, window, training, rng);
    Tensor last = select_rows(states, {window - 1});
    return reshape(last, {params.config.d});
}

Tensor encode_batch(const BackboneParams& params, const std::vector<int64_t>& padded_ids,
                    const std::vector<int32_t>& lengths, int64_t rows, int64_t window,
                    bool training, std::mt19937_64* rng) {
    if (static_cast<int64_t>(padded_ids.size()) != rows * window)
        throw contract_error("encode_batch: id matrix size mismatch");
    Tensor e = embedding_lookup(params.item_emb, padded_ids);
    Tensor p = select_rows(params.pos_emb, [&] {
        std::vector<int64_t> pos(static_cast<size_t>(window));
        for (int64_t i = 0; i < window; ++i) pos[static_cast<size_t>(i)] = i;
        return pos;
    }());
    Tensor h = add_block_bias(e, p, rows);
    Tensor states = transformer_states(params, h, lengths, rows, window, training, rng);
    std::vector<int64_t> last(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) last[static_cast<size_t>(r)] = r * window + window - 1;
    return select_rows(states, last);
}

Prediction predict(const Tensor& h, const Tensor& item_emb) {
    Tensor hx = h.ndim() == 1 ? ops::reshape(h, {1, h.dim(0)}) : h;
    Tensor logits = matmul_nt(hx, item_emb);
    return {logits, softmax_lastdim(logits)};
}

Tensor main_loss(const Tensor& logits, const std::vector<int64_t>& targets) {
    const int64_t v = logits.dim(1) - 1;
    for (int64_t t : targets)
        if (t < 1 || t > v)
            throw contract_error("main_loss: target " + std::to_string(t) +
                                 " outside [1," + std::to_string(v) + "]");
    Tensor lsm = log_softmax_lastdim(logits);
    Tensor picked = gather_lastdim(lsm, targets);
    return scalar_mul(mean_all(picked), -1.0);
}

}  // namespace futurerec
