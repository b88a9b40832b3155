#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "futurerec/backbone.hpp"
#include "futurerec/dataset.hpp"

namespace futurerec {

struct EvalReport {
    std::map<int, double> hr;    // m -> HR@m
    std::map<int, double> ndcg;  // m -> NDCG@m
    int64_t num_evaluated = 0;
    std::vector<int64_t> ranks;  // per-user 1-based target ranks (optional dump)

    std::string table() const;
    /// One machine-readable line per metric: metric \t m \t value \t split \t seed.
    std::string machine_lines(const std::string& split, uint64_t seed) const;
};

/// 1 iff the 1-based rank falls within the top m.
int hit_rate(int64_t rank, int m);

/// Leave-one-out NDCG with a single relevant item: 1/log2(rank+1) inside the
/// top m, else 0 (ideal DCG is 1).
double ndcg_at(int64_t rank, int m);

/// Full-catalog rank of `target` given scores over [0, V]; the padding slot
/// is excluded, ties break toward the smaller item id.
int64_t rank_of_target(const std::vector<double>& scores, int64_t target);

/// Encodes the (truncated, left-padded) history and returns the top-n item
/// ids by descending score. Auxiliary modules are never touched.
std::vector<int64_t> infer_topn(const std::vector<int64_t>& history,
                                const BackboneParams& params, int64_t topn);

struct EvalOptions {
    int64_t batch_rows = 256;
    bool collect_ranks = false;
    std::vector<int> cutoffs = {10, 20};
};

/// Ranks every user's held-out target over the entire item set (no negative
/// sampling, historically interacted items included) and averages HR/NDCG.
EvalReport evaluate(const SplitView& split, const BackboneParams& params,
                    const EvalOptions& options = {});

}  // namespace futurerec
