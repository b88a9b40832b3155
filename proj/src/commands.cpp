#include "futurerec/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "futurerec/dataset.hpp"
#include "futurerec/evaluator.hpp"
#include "futurerec/model.hpp"
#include "futurerec/trainer.hpp"

namespace futurerec {

namespace fs = std::filesystem;

namespace {

std::string stats_line(const InteractionCorpus& c) {
    std::ostringstream os;
    os << "#Users\t#Items\t#Actions\tAvg. Length\tDensity\n"
       << c.users.size() << '\t' << c.num_items << '\t' << c.num_actions() << '\t'
       << std::fixed << std::setprecision(1) << c.avg_length() << '\t'
       << std::setprecision(2) << 100.0 * c.density() << "%\n";
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << content;
    if (!out) throw io_error("write failure on " + path);
}

void write_diagnostics(const std::string& path, const std::vector<EpochLog>& epochs) {
    std::ostringstream os;
    os << "epoch\tmin_omega\tmax_omega\tfs_valid_frac\tfc_valid_frac\tfc_sim_gap";
    size_t steps = 0;
    for (const auto& e : epochs) steps = std::max(steps, e.per_step_ce.size());
    for (size_t k = 0; k < steps; ++k) os << "\tce_step" << (k + 2);
    os << '\n';
    for (const auto& e : epochs) {
        os << e.epoch << '\t' << e.min_omega << '\t' << e.max_omega << '\t'
           << e.fs_valid_fraction << '\t' << e.fc_valid_fraction << '\t' << e.fc_similarity_gap;
        for (size_t k = 0; k < steps; ++k)
            os << '\t' << (k < e.per_step_ce.size() ? e.per_step_ce[k] : 0.0);
        os << '\n';
    }
    write_file(path, os.str());
}

}  // namespace

void cmd_prepare(const PrepareArgs& args, std::ostream& out) {
    const InteractionCorpus corpus = load_corpus(args.input, args.min_core, args.single_pass);
    fs::create_directories(args.out_dir);
    save_corpus(corpus, args.out_dir + "/corpus.txt");

    std::ostringstream item_map;
    for (int64_t i = 1; i <= corpus.num_items; ++i)
        item_map << i << '\t' << corpus.item_tokens[static_cast<size_t>(i)] << '\n';
    write_file(args.out_dir + "/item_map.tsv", item_map.str());
    std::ostringstream user_map;
    for (size_t u = 0; u < corpus.users.size(); ++u)
        user_map << u << '\t' << corpus.users[u].user_token << '\n';
    write_file(args.out_dir + "/user_map.tsv", user_map.str());

    const std::string stats = stats_line(corpus);
    write_file(args.out_dir + "/stats.txt", stats);
    out << stats;
}

void cmd_train(const RunConfig& config, std::ostream& out) {
    config.validate();
    if (config.data.empty()) throw config_error("train: no data path configured");
    const InteractionCorpus corpus =
        load_corpus(config.data, config.min_core, config.single_pass);
    const Splits splits = split_leave_one_out(corpus);
    const BackboneConfig bcfg = config.backbone_config(corpus.num_items);

    std::vector<double> test_hr10, test_ndcg10, test_hr20, test_ndcg20;
    for (uint64_t seed : config.seeds) {
        const std::string run_dir = config.out_dir + "/seed_" + std::to_string(seed);
        fs::create_directories(run_dir);
        write_file(run_dir + "/resolved.config", config.serialize());

        std::ofstream log(run_dir + "/train_log.tsv");
        if (!log) throw io_error("cannot write " + run_dir + "/train_log.tsv");
        log << "epoch\tL_M\tL_FS\tL_FC\tmean_omega\tvalid_hr10\tvalid_ndcg10\tseconds\n";
        const TrainConfig tcfg = config.train_config(seed);
        FitResult result = fit(splits, bcfg, tcfg, &log);
        write_diagnostics(run_dir + "/diagnostics.tsv", result.epochs);
        save_checkpoint(run_dir + "/best.ckpt", result.best_params);

        EvalOptions opts;
        opts.batch_rows = config.eval_batch;
        const EvalReport valid_report = evaluate(splits.valid, result.best_params.backbone, opts);
        const EvalReport test_report = evaluate(splits.test, result.best_params.backbone, opts);
        std::ostringstream rep;
        rep << "best_epoch\t" << result.best_epoch << "\nvalid\n" << valid_report.table()
            << "test\n" << test_report.table();
        write_file(run_dir + "/report.txt", rep.str());
        write_file(run_dir + "/metrics.tsv", valid_report.machine_lines("valid", seed) +
                                                 test_report.machine_lines("test", seed));
        out << "seed " << seed << ": best epoch " << result.best_epoch << ", valid "
            << tcfg.eval_metric << " = " << result.best_metric << ", test HR@10 = "
            << test_report.hr.at(10) << ", test NDCG@10 = " << test_report.ndcg.at(10) << '\n';
        test_hr10.push_back(test_report.hr.at(10));
        test_ndcg10.push_back(test_report.ndcg.at(10));
        test_hr20.push_back(test_report.hr.at(20));
        test_ndcg20.push_back(test_report.ndcg.at(20));
    }

    auto mean_std = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        return std::make_pair(mean, std::sqrt(var));
    };
    std::ostringstream summary;
    summary << std::fixed << std::setprecision(4);
    summary << "metric\tmean\tstd\truns\n";
    const std::pair<const char*, std::vector<double>*> rows[] = {
        {"test_hr@10", &test_hr10},
        {"test_ndcg@10", &test_ndcg10},
        {"test_hr@20", &test_hr20},
        {"test_ndcg@20", &test_ndcg20},
    };
    for (const auto& [name, vals] : rows) {
        const auto [mean, sd] = mean_std(*vals);
        summary << name << '\t' << mean << '\t' << sd << '\t' << vals->size() << '\n';
    }
    fs::create_directories(config.out_dir);
    write_file(config.out_dir + "/summary.tsv", summary.str());
    out << summary.str();
}

void cmd_eval(const EvalArgs& args, std::ostream& out) {
    if (args.split != "valid" && args.split != "test")
        throw config_error("eval: split must be valid or test, got " + args.split);
    const ModelParams params = load_checkpoint(args.checkpoint);
    const InteractionCorpus corpus = load_corpus(args.data, args.min_core);
    if (params.backbone.config.num_items != corpus.num_items)
        throw data_error("eval: checkpoint was trained on " +
                         std::to_string(params.backbone.config.num_items) +
                         " items but corpus has " + std::to_string(corpus.num_items));
    const Splits splits = split_leave_one_out(corpus);
    const SplitView& view = args.split == "valid" ? splits.valid : splits.test;
    EvalOptions opts;
    opts.batch_rows = args.eval_batch;
    const EvalReport report = evaluate(view, params.backbone, opts);
    out << report.table();
    const std::string machine = report.machine_lines(args.split, 0);
    out << machine;
    if (!args.out_path.empty()) write_file(args.out_path, machine);
}

void cmd_ablate(const RunConfig& config, std::ostream& out) {
    config.validate();
    if (config.data.empty()) throw config_error("ablate: no data path configured");
    const InteractionCorpus corpus =
        load_corpus(config.data, config.min_core, config.single_pass);
    const Splits splits = split_leave_one_out(corpus);
    const BackboneConfig bcfg = config.backbone_config(corpus.num_items);
    fs::create_directories(config.out_dir);
    write_file(config.out_dir + "/resolved.config", config.serialize());
    std::ofstream log(config.out_dir + "/ablation_log.tsv");
    const auto rows = run_ablation_suite(splits, bcfg, config.train_config(config.seeds[0]),
                                         log ? &log : nullptr);
    std::ostringstream table;
    table << std::fixed << std::setprecision(4);
    table << "variant\ttest_hr@10\ttest_ndcg@10\ttest_hr@20\ttest_ndcg@20\n";
    for (const auto& row : rows)
        table << row.name << '\t' << row.test_report.hr.at(10) << '\t'
              << row.test_report.ndcg.at(10) << '\t' << row.test_report.hr.at(20) << '\t'
              << row.test_report.ndcg.at(20) << '\n';
    write_file(config.out_dir + "/ablation.tsv", table.str());
    out << table.str();
}

void cmd_synth(const SynthArgs& args, std::ostream& out) {
    if (args.out.empty()) throw config_error("synth: no output path configured");
    const InteractionCorpus corpus =
        synth_markov(args.users, args.items, args.len, args.seed, args.noise);
    if (const auto dir = fs::path(args.out).parent_path(); !dir.empty())
        fs::create_directories(dir);
    save_corpus(corpus, args.out);
    out << stats_line(corpus);
}

void apply_ablation_variant(RunConfig& config, const std::string& variant) {
    if (variant == "full") return;
    if (variant == "w/o-fs" || variant == "wo_fs") {
        config.use_fs = false;
    } else if (variant == "w/o-ug" || variant == "wo_ug") {
        config.use_ug = false;
    } else if (variant == "w/o-fc" || variant == "wo_fc") {
        config.use_fc = false;
    } else if (variant == "backbone-only" || variant == "backbone_only") {
        config.use_fs = false;
        config.use_fc = false;
    } else {
        throw config_error("unknown ablation variant: " + variant);
    }
}

int run_guarded(const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return 0;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << '\n';
        return 1;
    } catch (const data_error& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    } catch (const numeric_error& e) {
        err << "numeric abort: " << e.what() << '\n';
        return 3;
    } catch (const contract_error& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace futurerec
