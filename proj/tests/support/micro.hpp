// Desk-scale fixtures: a tiny hand-built corpus plus the loss harness used
// by gradient oracles. Dropout is disabled so finite differences see a
// deterministic objective; the confidence weight is frozen at its unperturbed
// value, which is exactly what detaching it from the graph means.
#pragma once

#include <array>
#include <vector>

#include "futurerec/dataset.hpp"
#include "futurerec/model.hpp"
#include "futurerec/trainer.hpp"

namespace testsupport {

using namespace futurerec;

struct MicroSetup {
    InteractionCorpus corpus;
    Splits splits;
    Batch batch;
    BackboneConfig bcfg;
    TrainConfig tcfg;
    ModelParams params;
};

/// d=8, V=20, one block, K=3, one batch of 4 instances (3 fs-valid, 1 not).
inline MicroSetup make_micro(uint64_t seed = 5, int horizon = 3, bool with_fs = true,
                             bool with_fc = true) {
    MicroSetup s;
    s.corpus.num_items = 20;
    s.corpus.item_tokens.resize(21);
    // hand-built sequences over [1,20]; train portions are everything but
    // the last two items
    const std::vector<std::vector<int64_t>> seqs = {
        {3, 7, 1, 12, 5, 9, 14, 2, 6, 11},
        {10, 4, 8, 15, 13, 1, 7, 19, 3, 5},
        {17, 2, 20, 6, 9, 12, 4, 16, 8, 1},
        {5, 11, 3, 18, 7, 2, 13, 10, 15, 4},
    };
    for (size_t u = 0; u < seqs.size(); ++u)
        s.corpus.users.push_back({"u" + std::to_string(u), seqs[u]});
    s.splits = split_leave_one_out(s.corpus);

    auto instances = expand_instances(s.splits.train, horizon);
    // keep a mixed batch: three valid rows and one invalid row
    std::vector<TrainingInstance> picked;
    for (const auto& inst : instances)
        if (inst.fs_valid && picked.size() < 3 && inst.t >= 2) picked.push_back(inst);
    for (const auto& inst : instances)
        if (!inst.fs_valid && picked.size() < 4) picked.push_back(inst);
    s.bcfg.num_items = 20;
    s.bcfg.d = 8;
    s.bcfg.layers = 1;
    s.bcfg.heads = 2;
    s.bcfg.max_len = 8;
    s.bcfg.dropout_rate = 0.0;
    auto batches = make_batches(picked, s.splits.train, 4, s.bcfg.max_len, seed);
    s.batch = batches.at(0);

    s.tcfg.horizon = horizon;
    s.tcfg.tau = 3.0;
    s.tcfg.lambda = 0.1;
    s.tcfg.use_fs = with_fs;
    s.tcfg.use_fc = with_fc;
    s.params = init_model(s.bcfg, with_fs && horizon >= 2, horizon, with_fc, seed);
    return s;
}

/// Per-row confidence weights at the current parameter values, computed
/// outside any tape.
inline std::vector<double> omega_at(const MicroSetup& s) {
    Tensor h = encode_batch(s.params.backbone, s.batch.prefix_ids, s.batch.lengths, s.batch.rows,
                            s.batch.window, false, nullptr);
    Tensor probs = ops::softmax_lastdim(ops::matmul_nt(h, s.params.backbone.item_emb));
    Tensor omega = confidence_weight(ops::shannon_entropy(probs), s.tcfg.tau);
    return omega.data();
}

struct LossValues {
    double l_m, l_fs, l_fc, l_total;
};

inline LossValues losses_at(const MicroSetup& s, const std::vector<double>& frozen_omega) {
    StepLosses out = compute_step_losses(s.params, s.batch, s.tcfg, /*training=*/false, nullptr,
                                         &frozen_omega);
    return {out.report.l_m, out.report.l_fs, out.report.l_fc, out.report.l_total};
}

struct ComponentGradients {
    // flattened per named-tensor element, aligned with named_tensors() order
    std::vector<double> l_m, l_fs, l_fc, l_total;
};

inline std::vector<double> collect_grads(const ModelParams& params) {
    std::vector<double> out;
    for (auto&& [name, t] : params.named_tensors()) {
        (void)name;
        if (t.has_grad())
            out.insert(out.end(), t.grad().begin(), t.grad().end());
        else
            out.insert(out.end(), static_cast<size_t>(t.size()), 0.0);
    }
    return out;
}

/// Analytic gradients of each loss component under the frozen weight.
inline ComponentGradients analytic_gradients(const MicroSetup& s,
                                             const std::vector<double>& frozen_omega) {
    ComponentGradients out;
    auto run = [&](auto pick) {
        s.params.zero_grad();
        Tape tape;
        TapeScope scope(tape);
        StepLosses l =
            compute_step_losses(s.params, s.batch, s.tcfg, false, nullptr, &frozen_omega);
        tape.backward(pick(l));
        return collect_grads(s.params);
    };
    out.l_m = run([](StepLosses& l) { return l.l_m; });
    if (s.tcfg.use_fs) out.l_fs = run([](StepLosses& l) { return l.l_fs; });
    if (s.tcfg.use_fc) out.l_fc = run([](StepLosses& l) { return l.l_fc; });
    out.l_total = run([](StepLosses& l) { return l.l_total; });
    s.params.zero_grad();
    return out;
}

/// Central-difference gradients of all four components in one sweep.
inline ComponentGradients numeric_gradients(const MicroSetup& s,
                                            const std::vector<double>& frozen_omega,
                                            double step = 1e-5) {
    ComponentGradients out;
    for (auto&& [name, t] : s.params.named_tensors()) {
        (void)name;
        for (int64_t i = 0; i < t.size(); ++i) {
            double& slot = t.data()[static_cast<size_t>(i)];
            const double orig = slot;
            slot = orig + step;
            const LossValues up = losses_at(s, frozen_omega);
            slot = orig - step;
            const LossValues down = losses_at(s, frozen_omega);
            slot = orig;
            const double inv = 1.0 / (2.0 * step);
            out.l_m.push_back((up.l_m - down.l_m) * inv);
            out.l_fs.push_back((up.l_fs - down.l_fs) * inv);
            out.l_fc.push_back((up.l_fc - down.l_fc) * inv);
            out.l_total.push_back((up.l_total - down.l_total) * inv);
        }
    }
    return out;
}

}  // namespace testsupport
