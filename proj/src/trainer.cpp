#include "futurerec/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <ostream>

namespace futurerec {

using namespace ops;

void TrainConfig::validate() const {
    if (lr <= 0.0) throw config_error("lr must be positive");
    if (batch_size < 2) throw config_error("batch_size must be >= 2");
    if (lambda < 0.0) throw config_error("lambda must be >= 0");
    if (horizon < 1) throw config_error("horizon must be >= 1");
    if (tau <= 0.0) throw config_error("tau must be positive");
    if (patience < 1) throw config_error("patience must be >= 1");
    if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
    if (fc_temperature <= 0.0) throw config_error("fc_temperature must be positive");
    if (clip_norm < 0.0) throw config_error("clip_norm must be >= 0");
    if (eval_metric != "hr@10" && eval_metric != "hr@20" && eval_metric != "ndcg@10" &&
        eval_metric != "ndcg@20")
        throw config_error("unknown eval_metric: " + eval_metric);
}

StepLosses compute_step_losses(const ModelParams& params, const Batch& batch,
                               const TrainConfig& config, bool training,
                               std::mt19937_64* dropout_rng,
                               const std::vector<double>* frozen_omega) {
    StepLosses out;
    const int64_t rows = batch.rows;
    Tensor h = encode_batch(params.backbone, batch.prefix_ids, batch.lengths, rows, batch.window,
                            training, dropout_rng);
    Tensor logits = matmul_nt(h, params.backbone.item_emb);
    out.l_m = main_loss(logits, batch.next_targets);

    const bool want_fs = config.use_fs && config.horizon >= 2 && params.future_sup.has_value();

    // Per-row confidence weights; detached so only the loss scale is affected.
    Tensor omega_all;
    if (frozen_omega) {
        if (static_cast<int64_t>(frozen_omega->size()) != rows)
            throw contract_error("frozen omega size mismatch");
        omega_all = Tensor::from_data({rows}, *frozen_omega);
    } else if (want_fs && config.use_ug) {
        Tensor probs = softmax_lastdim(detach(logits));
        omega_all = confidence_weight(shannon_entropy(probs), config.tau);
    } else {
        omega_all = Tensor::full({rows}, 1.0);
    }
    double osum = 0.0, omin = 1e300, omax = -1e300;
    for (double w : omega_all.data()) {
        osum += w;
        omin = std::min(omin, w);
        omax = std::max(omax, w);
    }
    out.report.mean_omega = osum / static_cast<double>(rows);
    out.report.min_omega = omin;
    out.report.max_omega = omax;

    std::vector<int64_t> fs_rows;
    for (int64_t r = 0; r < rows; ++r)
        if (batch.fs_valid[static_cast<size_t>(r)]) fs_rows.push_back(r);
    out.report.fs_valid_fraction = static_cast<double>(fs_rows.size()) / static_cast<double>(rows);

    if (want_fs && !fs_rows.empty()) {
        const int steps = config.horizon - 1;
        if (batch.horizon != config.horizon)
            throw contract_error("batch horizon " + std::to_string(batch.horizon) +
                                 " does not match config horizon " +
                                 std::to_string(config.horizon));
        Tensor h_fs = select_rows(h, fs_rows);
        Tensor projected = project_future(h_fs, *params.future_sup);
        std::vector<Tensor> step_logits;
        std::vector<std::vector<int64_t>> step_targets;
        for (int k = 2; k <= config.horizon; ++k) {
            step_logits.push_back(
                matmul_nt(future_step_states(projected, k), params.backbone.item_emb));
            std::vector<int64_t> targets;
            for (int64_t r : fs_rows)
                targets.push_back(
                    batch.future_targets[static_cast<size_t>(r * steps + (k - 2))]);
            step_targets.push_back(std::move(targets));
        }
        std::vector<double> omega_sel;
        for (int64_t r : fs_rows) omega_sel.push_back(omega_all.at(r));
        Tensor omega_fs =
            Tensor::from_data({static_cast<int64_t>(fs_rows.size())}, std::move(omega_sel));
        out.l_fs = future_supervision_loss(step_logits, step_targets, omega_fs,
                                           config.fs_reduction, rows, &out.report.per_step_ce);
    } else {
        out.l_fs = Tensor::scalar(0.0);
    }

    std::vector<int64_t> fc_rows;
    for (int64_t r = 0; r < rows; ++r)
        if (batch.fc_valid[static_cast<size_t>(r)]) fc_rows.push_back(r);
    out.report.fc_valid_fraction = static_cast<double>(fc_rows.size()) / static_cast<double>(rows);

    const bool want_fc = config.use_fc && params.future_cl.has_value();
    if (want_fc && fc_rows.size() >= 2) {
        const int steps = config.horizon - 1;
        std::vector<std::vector<int64_t>> horizon_ids;
        for (int64_t r : fc_rows) {
            std::vector<int64_t> ids{batch.next_targets[static_cast<size_t>(r)]};
            for (int k = 0; k < steps; ++k)
                ids.push_back(batch.future_targets[static_cast<size_t>(r * steps + k)]);
            horizon_ids.push_back(std::move(ids));
        }
        Tensor z = horizon_pool(params.backbone.item_emb, horizon_ids);
        Tensor hz = project_state(select_rows(h, fc_rows), *params.future_cl);
        out.l_fc = infonce(hz, z, config.fc_temperature);
        out.report.fc_similarity_gap = similarity_gap(hz, z);
    } else {
        if (want_fc && fc_rows.size() == 1)
            std::cerr << "warning: contrastive loss skipped, single valid row in batch\n";
        out.l_fc = Tensor::scalar(0.0);
    }

    out.l_total = add(add(out.l_m, out.l_fs), scalar_mul(out.l_fc, config.lambda));
    out.report.l_m = out.l_m.item();
    out.report.l_fs = out.l_fs.item();
    out.report.l_fc = out.l_fc.item();
    out.report.l_total = out.l_total.item();
    return out;
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

void adam_update_inplace(std::vector<double>& value, const std::vector<double>& grad,
                         std::vector<double>& m, std::vector<double>& v, int64_t t, double lr,
                         double beta1, double beta2, double eps) {
    if (grad.size() != value.size() || m.size() != value.size() || v.size() != value.size())
        throw contract_error("adam_update: size mismatch");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < value.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

void AdamOptimizer::step(const ModelParams& params) {
    ++t_;
    auto named = params.named_tensors();
    if (m_.empty()) {
        m_.resize(named.size());
        v_.resize(named.size());
        for (size_t i = 0; i < named.size(); ++i) {
            m_[i].assign(static_cast<size_t>(named[i].second.size()), 0.0);
            v_[i].assign(static_cast<size_t>(named[i].second.size()), 0.0);
        }
    }
    if (named.size() != m_.size()) throw contract_error("adam: parameter set changed size");
    for (size_t i = 0; i < named.size(); ++i) {
        Tensor& t = named[i].second;
        if (!t.has_grad()) {
            // zero gradient: moments decay, bias-corrected update is exactly 0
            std::vector<double> zero(static_cast<size_t>(t.size()), 0.0);
            adam_update_inplace(t.data(), zero, m_[i], v_[i], t_, lr_, b1_, b2_, eps_);
        } else {
            adam_update_inplace(t.data(), t.grad(), m_[i], v_[i], t_, lr_, b1_, b2_, eps_);
        }
    }
}

namespace {

void clip_gradients(const ModelParams& params, double clip_norm) {
    double sq = 0.0;
    auto named = params.named_tensors();
    for (auto& [name, t] : named) {
        if (!t.has_grad()) continue;
        for (double g : t.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= clip_norm) return;
    const double scale = clip_norm / norm;
    for (auto& [name, t] : named) {
        if (!t.has_grad()) continue;
        for (double& g : t.grad()) g *= scale;
    }
}

double metric_from_report(const EvalReport& report, const std::string& metric) {
    if (metric == "hr@10") return report.hr.at(10);
    if (metric == "hr@20") return report.hr.at(20);
    if (metric == "ndcg@10") return report.ndcg.at(10);
    return report.ndcg.at(20);
}

}  // namespace

StepReport train_step(const ModelParams& params, const Batch& batch, const TrainConfig& config,
                      AdamOptimizer& adam, std::mt19937_64& dropout_rng, int64_t batch_index) {
    Tape tape;
    TapeScope scope(tape);
    StepLosses losses =
        compute_step_losses(params, batch, config, /*training=*/true, &dropout_rng);
    const StepReport& r = losses.report;
    if (!std::isfinite(r.l_total) || !std::isfinite(r.l_m) || !std::isfinite(r.l_fs) ||
        !std::isfinite(r.l_fc))
        throw numeric_error("non-finite loss at batch " + std::to_string(batch_index) +
                            ": L_M=" + std::to_string(r.l_m) + " L_FS=" + std::to_string(r.l_fs) +
                            " L_FC=" + std::to_string(r.l_fc));
    tape.backward(losses.l_total);
    if (config.clip_norm > 0.0) clip_gradients(params, config.clip_norm);
    adam.step(params);
    params.zero_grad();
    return losses.report;
}

FitResult fit(const Splits& splits, const BackboneConfig& backbone_config,
              const TrainConfig& config, std::ostream* log_stream,
              const EvalOverride& eval_override) {
    config.validate();
    backbone_config.validate();
    const bool with_fs = config.use_fs && config.horizon >= 2;
    ModelParams params = init_model(backbone_config, with_fs, config.horizon,
                                    config.use_fc, config.seed);
    AdamOptimizer adam(config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
    std::mt19937_64 dropout_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
    const auto instances = expand_instances(splits.train, config.horizon);

    FitResult result;
    result.best_metric = -1.0;
    int since_best = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const uint64_t shuffle_seed = config.seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch);
        const auto batches = make_batches(instances, splits.train, config.batch_size,
                                          backbone_config.max_len, shuffle_seed);
        EpochLog log;
        log.epoch = epoch;
        log.min_omega = 1e300;
        log.max_omega = -1e300;
        int64_t seen = 0;
        for (size_t bi = 0; bi < batches.size(); ++bi) {
            const StepReport r = train_step(params, batches[bi], config, adam, dropout_rng,
                                            static_cast<int64_t>(bi));
            const double w = static_cast<double>(batches[bi].rows);
            log.l_m += r.l_m * w;
            log.l_fs += r.l_fs * w;
            log.l_fc += r.l_fc * w;
            log.mean_omega += r.mean_omega * w;
            log.fs_valid_fraction += r.fs_valid_fraction * w;
            log.fc_valid_fraction += r.fc_valid_fraction * w;
            log.fc_similarity_gap += r.fc_similarity_gap * w;
            log.min_omega = std::min(log.min_omega, r.min_omega);
            log.max_omega = std::max(log.max_omega, r.max_omega);
            if (log.per_step_ce.size() < r.per_step_ce.size())
                log.per_step_ce.resize(r.per_step_ce.size(), 0.0);
            for (size_t k = 0; k < r.per_step_ce.size(); ++k)
                log.per_step_ce[k] += r.per_step_ce[k] * w;
            seen += batches[bi].rows;
        }
        const double inv = seen > 0 ? 1.0 / static_cast<double>(seen) : 0.0;
        log.l_m *= inv;
        log.l_fs *= inv;
        log.l_fc *= inv;
        log.mean_omega *= inv;
        log.fs_valid_fraction *= inv;
        log.fc_valid_fraction *= inv;
        log.fc_similarity_gap *= inv;
        for (double& c : log.per_step_ce) c *= inv;

        double metric;
        if (eval_override) {
            metric = eval_override(epoch, params);
            log.val_hr10 = metric;
        } else {
            const EvalReport report = evaluate(splits.valid, params.backbone);
            log.val_hr10 = report.hr.at(10);
            log.val_ndcg10 = report.ndcg.at(10);
            metric = metric_from_report(report, config.eval_metric);
        }
        log.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (log_stream) {
            (*log_stream) << epoch << '\t' << log.l_m << '\t' << log.l_fs << '\t' << log.l_fc
                          << '\t' << log.mean_omega << '\t' << log.val_hr10 << '\t'
                          << log.val_ndcg10 << '\t' << log.seconds << '\n';
            log_stream->flush();
        }
        result.epochs.push_back(log);

        if (metric > result.best_metric) {
            result.best_metric = metric;
            result.best_epoch = epoch;
            result.best_params = params.clone();
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    return result;
}

std::vector<AblationRow> run_ablation_suite(const Splits& splits,
                                            const BackboneConfig& backbone_config,
                                            const TrainConfig& base_config,
                                            std::ostream* log_stream) {
    struct Variant {
        const char* name;
        bool fs, ug, fc;
    };
    const Variant variants[] = {
        {"full", true, true, true},          {"wo_fs", false, true, true},
        {"wo_ug", true, false, true},        {"wo_fc", true, true, false},
        {"backbone_only", false, true, false},
    };
    std::vector<AblationRow> rows;
    for (const Variant& v : variants) {
        TrainConfig cfg = base_config;
        cfg.use_fs = v.fs;
        cfg.use_ug = v.ug;
        cfg.use_fc = v.fc;
        if (log_stream) (*log_stream) << "# variant " << v.name << '\n';
        FitResult fitres = fit(splits, backbone_config, cfg, log_stream);
        AblationRow row;
        row.name = v.name;
        row.best_valid_metric = fitres.best_metric;
        row.test_report = evaluate(splits.test, fitres.best_params.backbone);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace futurerec
