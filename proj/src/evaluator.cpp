#include "futurerec/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace futurerec {

std::string EvalReport::table() const {
    std::ostringstream os;
    os << "metric";
    for (const auto& [m, v] : hr) os << "\tHR@" << m;
    for (const auto& [m, v] : ndcg) os << "\tNDCG@" << m;
    os << "\nvalue";
    os.setf(std::ios::fixed);
    os.precision(4);
    for (const auto& [m, v] : hr) os << '\t' << v;
    for (const auto& [m, v] : ndcg) os << '\t' << v;
    os << "\nusers\t" << num_evaluated << '\n';
    return os.str();
}

std::string EvalReport::machine_lines(const std::string& split, uint64_t seed) const {
    std::ostringstream os;
    os.precision(10);
    for (const auto& [m, v] : hr)
        os << "hr\t" << m << '\t' << v << '\t' << split << '\t' << seed << '\n';
    for (const auto& [m, v] : ndcg)
        os << "ndcg\t" << m << '\t' << v << '\t' << split << '\t' << seed << '\n';
    return os.str();
}

int hit_rate(int64_t rank, int m) {
    if (rank < 1) throw contract_error("hit_rate: rank must be >= 1");
    return rank <= m ? 1 : 0;
}

double ndcg_at(int64_t rank, int m) {
    if (rank < 1) throw contract_error("ndcg_at: rank must be >= 1");
    if (rank > m) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

int64_t rank_of_target(const std::vector<double>& scores, int64_t target) {
    const int64_t v = static_cast<int64_t>(scores.size()) - 1;
    if (target < 1 || target > v) throw contract_error("rank_of_target: pad or invalid target");
    const double s = scores[static_cast<size_t>(target)];
    int64_t rank = 1;
    for (int64_t i = 1; i <= v; ++i) {
        if (scores[static_cast<size_t>(i)] > s) ++rank;
        else if (scores[static_cast<size_t>(i)] == s && i < target) ++rank;
    }
    return rank;
}

namespace {

// Pads a history into the model's fixed attention window.
void pad_history(const std::vector<int64_t>& history, int64_t window,
                 std::vector<int64_t>& out_ids, int32_t& out_len) {
    const int64_t len = std::min<int64_t>(static_cast<int64_t>(history.size()), window);
    out_ids.assign(static_cast<size_t>(window), 0);
    for (int64_t j = 0; j < len; ++j)
        out_ids[static_cast<size_t>(window - len + j)] =
            history[history.size() - static_cast<size_t>(len) + static_cast<size_t>(j)];
    out_len = static_cast<int32_t>(len);
}

void check_report(const EvalReport& r) {
    double prev_hr = 0.0, prev_ndcg = 0.0;
    for (const auto& [m, v] : r.hr) {
        if (v < 0.0 || v > 1.0 || v + 1e-12 < prev_hr)
            throw contract_error("eval report: HR monotonicity violated");
        prev_hr = v;
    }
    for (const auto& [m, v] : r.ndcg) {
        if (v < 0.0 || v > 1.0 || v + 1e-12 < prev_ndcg)
            throw contract_error("eval report: NDCG monotonicity violated");
        prev_ndcg = v;
    }
    for (const auto& [m, v] : r.hr)
        if (r.ndcg.count(m) && r.ndcg.at(m) > v + 1e-12)
            throw contract_error("eval report: NDCG exceeds HR");
}

}  // namespace

std::vector<int64_t> infer_topn(const std::vector<int64_t>& history,
                                const BackboneParams& params, int64_t topn) {
    if (history.empty()) throw contract_error("infer_topn: empty history");
    std::vector<int64_t> ids;
    int32_t len = 0;
    pad_history(history, params.config.max_len, ids, len);
    Tensor h = encode_batch(params, ids, {len}, 1, params.config.max_len,
                            /*training=*/false, nullptr);
    Tensor logits = ops::matmul_nt(h, params.item_emb);
    const int64_t v = params.config.num_items;
    std::vector<int64_t> order(static_cast<size_t>(v));
    for (int64_t i = 0; i < v; ++i) order[static_cast<size_t>(i)] = i + 1;
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        const double sa = logits.at(a), sb = logits.at(b);
        if (sa != sb) return sa > sb;
        return a < b;
    });
    order.resize(static_cast<size_t>(std::min(topn, v)));
    return order;
}

EvalReport evaluate(const SplitView& split, const BackboneParams& params,
                    const EvalOptions& options) {
    const int64_t window = params.config.max_len;
    const size_t users = split.num_users();
    EvalReport report;
    report.num_evaluated = static_cast<int64_t>(users);
    std::map<int, double> hr_sum, ndcg_sum;
    for (int m : options.cutoffs) {
        hr_sum[m] = 0.0;
        ndcg_sum[m] = 0.0;
    }

    std::vector<int64_t> ids;
    std::vector<int32_t> lengths;
    std::vector<int64_t> targets;
    std::vector<int64_t> row_ids(static_cast<size_t>(window));
    int32_t row_len = 0;
    for (size_t start = 0; start < users;) {
        const size_t end = std::min(users, start + static_cast<size_t>(options.batch_rows));
        const int64_t rows = static_cast<int64_t>(end - start);
        ids.assign(static_cast<size_t>(rows * window), 0);
        lengths.clear();
        targets.clear();
        for (size_t u = start; u < end; ++u) {
            const EvalInstance inst = split.instance(u);
            pad_history(inst.context, window, row_ids, row_len);
            std::copy(row_ids.begin(), row_ids.end(),
                      ids.begin() + static_cast<int64_t>(u - start) * window);
            lengths.push_back(row_len);
            targets.push_back(inst.target);
        }
        Tensor h = encode_batch(params, ids, lengths, rows, window, /*training=*/false, nullptr);
        Tensor logits = ops::matmul_nt(h, params.item_emb);
        const int64_t cols = logits.dim(1);
        for (int64_t r = 0; r < rows; ++r) {
            std::vector<double> scores(logits.data().begin() + r * cols,
                                       logits.data().begin() + (r + 1) * cols);
            const int64_t rank = rank_of_target(scores, targets[static_cast<size_t>(r)]);
            if (options.collect_ranks) report.ranks.push_back(rank);
            for (int m : options.cutoffs) {
                hr_sum[m] += hit_rate(rank, m);
                ndcg_sum[m] += ndcg_at(rank, m);
            }
        }
        start = end;
    }
    for (int m : options.cutoffs) {
        report.hr[m] = hr_sum[m] / static_cast<double>(users);
        report.ndcg[m] = ndcg_sum[m] / static_cast<double>(users);
    }
    check_report(report);
    return report;
}

}  // namespace futurerec
