#include "futurerec/future_contrast.hpp"

#include <iostream>

namespace futurerec {

using namespace ops;

FutureClParams init_future_cl(int64_t d, std::mt19937_64& rng) {
    constexpr double kStd = 0.02;
    FutureClParams p;
    p.w = Tensor::zeros({d, d}, true);
    fill_truncated_normal(p.w, kStd, rng);
    p.b = Tensor::zeros({d}, true);
    fill_truncated_normal(p.b, kStd, rng);
    return p;
}

Tensor horizon_pool(const Tensor& item_emb,
                    const std::vector<std::vector<int64_t>>& future_ids) {
    if (future_ids.empty()) throw contract_error("horizon_pool: no rows");
    const size_t k = future_ids[0].size();
    if (k == 0) throw contract_error("horizon_pool: empty horizon");
    const int64_t v = item_emb.dim(0) - 1;
    std::vector<int64_t> col(future_ids.size());
    Tensor acc;
    for (size_t step = 0; step < k; ++step) {
        for (size_t r = 0; r < future_ids.size(); ++r) {
            if (future_ids[r].size() != k)
                throw contract_error("horizon_pool: ragged horizon rows");
            const int64_t id = future_ids[r][step];
            if (id < 1 || id > v)
                throw contract_error("horizon_pool: id " + std::to_string(id) +
                                     " outside [1," + std::to_string(v) + "]");
            col[r] = id;
        }
        Tensor emb = embedding_lookup(item_emb, col);
        acc = step == 0 ? emb : add(acc, emb);
    }
    return scalar_mul(acc, 1.0 / static_cast<double>(k));
}

Tensor project_state(const Tensor& h, const FutureClParams& params) {
    return linear(h, params.w, params.b);
}

Tensor infonce(const Tensor& hz, const Tensor& z, double temperature) {
    if (hz.shape() != z.shape())
        throw shape_error("infonce: shape mismatch " + shape_str(hz.shape()) + " vs " +
                          shape_str(z.shape()));
    const int64_t n = hz.dim(0);
    if (n < 2) {
        std::cerr << "warning: infonce skipped, only " << n
                  << " valid row(s) in batch\n";
        return Tensor::scalar(0.0);
    }
    if (temperature <= 0.0) throw contract_error("infonce: temperature must be positive");
    Tensor sims = matmul_nt(hz, z);
    if (temperature != 1.0) sims = scalar_mul(sims, 1.0 / temperature);
    std::vector<int64_t> diag(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) diag[static_cast<size_t>(i)] = i;
    Tensor picked = gather_lastdim(log_softmax_lastdim(sims), diag);
    return scalar_mul(mean_all(picked), -1.0);
}

double similarity_gap(const Tensor& hz, const Tensor& z) {
    const int64_t n = hz.dim(0);
    if (n < 2) return 0.0;
    const int64_t d = hz.dim(1);
    double pos = 0.0, neg = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int64_t c = 0; c < d; ++c) s += hz.at(i * d + c) * z.at(j * d + c);
            if (i == j)
                pos += s;
            else
                neg += s;
        }
    }
    return pos / static_cast<double>(n) - neg / static_cast<double>(n * (n - 1));
}

}  // namespace futurerec
