#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "futurerec/dataset.hpp"
#include "futurerec/evaluator.hpp"
#include "futurerec/model.hpp"

namespace futurerec {

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 256;
    double lambda = 0.1;  // contrastive loss weight
    int horizon = 2;      // K
    double tau = 3.0;
    int max_epochs = 200;
    int patience = 10;
    uint64_t seed = 42;
    bool use_fs = true;
    bool use_ug = true;
    bool use_fc = true;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    FsReduction fs_reduction = FsReduction::ValidMean;
    double fc_temperature = 1.0;
    double clip_norm = 0.0;  // 0 disables clipping
    std::string eval_metric = "hr@10";

    void validate() const;
};

struct StepReport {
    double l_m = 0.0, l_fs = 0.0, l_fc = 0.0, l_total = 0.0;
    double mean_omega = 1.0, min_omega = 1.0, max_omega = 1.0;
    double fs_valid_fraction = 0.0, fc_valid_fraction = 0.0;
    std::vector<double> per_step_ce;  // index k-2
    double fc_similarity_gap = 0.0;
};

struct StepLosses {
    Tensor l_m, l_fs, l_fc, l_total;
    StepReport report;
};

/// Forward evaluation of all loss components for one batch. When
/// frozen_omega is given (one weight per batch row) it replaces the
/// entropy-derived weight; finite-difference oracles rely on this to hold
/// the detached weight constant across perturbations.
StepLosses compute_step_losses(const ModelParams& params, const Batch& batch,
                               const TrainConfig& config, bool training,
                               std::mt19937_64* dropout_rng,
                               const std::vector<double>* frozen_omega = nullptr);

/// Standard Adam with bias correction, applied over deterministic
/// named-tensor order. Missing gradients count as zero.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const ModelParams& params);
    int64_t step_count() const { return t_; }

private:
    double lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// One Adam update on a single tensor's flat storage.
void adam_update_inplace(std::vector<double>& value, const std::vector<double>& grad,
                         std::vector<double>& m, std::vector<double>& v, int64_t t, double lr,
                         double beta1, double beta2, double eps);

/// Forward + backward + Adam on one batch; gradients are cleared afterwards.
StepReport train_step(const ModelParams& params, const Batch& batch, const TrainConfig& config,
                      AdamOptimizer& adam, std::mt19937_64& dropout_rng,
                      int64_t batch_index = -1);

struct EpochLog {
    int epoch = 0;
    double l_m = 0.0, l_fs = 0.0, l_fc = 0.0, mean_omega = 1.0;
    double val_hr10 = 0.0, val_ndcg10 = 0.0;
    double seconds = 0.0;
    // extended diagnostics
    double min_omega = 1.0, max_omega = 1.0;
    double fs_valid_fraction = 0.0, fc_valid_fraction = 0.0, fc_similarity_gap = 0.0;
    std::vector<double> per_step_ce;
};

struct FitResult {
    ModelParams best_params;
    int best_epoch = 0;
    double best_metric = 0.0;
    std::vector<EpochLog> epochs;
};

/// Hook for tests: overrides the per-epoch validation metric.
using EvalOverride = std::function<double(int epoch, const ModelParams& params)>;

/// Full training loop with early stopping on the validation metric; returns
/// the checkpoint with the best validation score seen, not the last one.
FitResult fit(const Splits& splits, const BackboneConfig& backbone_config,
              const TrainConfig& config, std::ostream* log_stream = nullptr,
              const EvalOverride& eval_override = nullptr);

struct AblationRow {
    std::string name;
    double best_valid_metric = 0.0;
    EvalReport test_report;
};

/// Trains {full, w/o L_FS, w/o UG, w/o L_FC, backbone-only} under one seed
/// and reports test metrics for each variant.
std::vector<AblationRow> run_ablation_suite(const Splits& splits,
                                            const BackboneConfig& backbone_config,
                                            const TrainConfig& base_config,
                                            std::ostream* log_stream = nullptr);

}  // namespace futurerec
