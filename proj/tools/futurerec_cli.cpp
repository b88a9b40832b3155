// Command-line front end: prepare / train / eval / ablate / synth.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "futurerec/commands.hpp"

namespace {

using futurerec::RunConfig;

// CLI overrides beat config-file values which beat built-in defaults.
RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = futurerec::load_run_config(config_path, cfg);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw futurerec::config_error("--set expects key=value, got '" + kv + "'");
        futurerec::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential recommender with future-aware training objectives"};
    app.require_subcommand(1);

    futurerec::PrepareArgs prep;
    auto* prepare = app.add_subcommand("prepare", "Filter and remap a raw interaction log");
    prepare->add_option("--input", prep.input, "Raw corpus: `user item item ...` per line")
        ->required();
    prepare->add_option("--outdir", prep.out_dir, "Output directory")->required();
    prepare->add_option("--min-core", prep.min_core, "k-core threshold (default 5)");
    prepare->add_flag("--single-pass", prep.single_pass, "One filter round instead of fixpoint");

    std::string train_config_path;
    std::vector<std::string> train_overrides;
    std::string train_data, train_outdir, train_seeds, train_ablate;
    auto* train = app.add_subcommand("train", "Train on a prepared corpus");
    train->add_option("--config", train_config_path, "key=value config file");
    train->add_option("--set", train_overrides, "Override: key=value (repeatable)");
    train->add_option("--data", train_data, "Corpus path (overrides config)");
    train->add_option("--outdir", train_outdir, "Run directory (overrides config)");
    train->add_option("--seeds", train_seeds, "Comma-separated seeds, e.g. 1,2,3");
    train->add_option("--ablate", train_ablate,
                      "Variant: full, w/o-fs, w/o-ug, w/o-fc, backbone-only");

    futurerec::EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint path")->required();
    eval->add_option("--data", eval_args.data, "Corpus path")->required();
    eval->add_option("--split", eval_args.split, "valid or test (default test)");
    eval->add_option("--out", eval_args.out_path, "Write machine-readable report here");
    eval->add_option("--min-core", eval_args.min_core, "k-core threshold (default 5)");
    eval->add_option("--eval-batch", eval_args.eval_batch, "Evaluation batch rows");

    std::string ablate_config_path;
    std::vector<std::string> ablate_overrides;
    std::string ablate_data, ablate_outdir;
    auto* ablate = app.add_subcommand("ablate", "Train and compare all module variants");
    ablate->add_option("--config", ablate_config_path, "key=value config file");
    ablate->add_option("--set", ablate_overrides, "Override: key=value (repeatable)");
    ablate->add_option("--data", ablate_data, "Corpus path (overrides config)");
    ablate->add_option("--outdir", ablate_outdir, "Run directory (overrides config)");

    futurerec::SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic Markov corpus");
    synth->add_option("--users", synth_args.users, "Number of users (default 200)");
    synth->add_option("--items", synth_args.items, "Number of items (default 50)");
    synth->add_option("--len", synth_args.len, "Sequence length (default 20)");
    synth->add_option("--seed", synth_args.seed, "Generator seed (default 7)");
    synth->add_option("--noise", synth_args.noise, "Per-step noise probability (default 0)");
    synth->add_option("--out", synth_args.out, "Output corpus path")->required();

    CLI11_PARSE(app, argc, argv);

    return futurerec::run_guarded(
        [&] {
            if (prepare->parsed()) {
                futurerec::cmd_prepare(prep, std::cout);
            } else if (train->parsed()) {
                RunConfig cfg = resolve_config(train_config_path, train_overrides);
                if (!train_data.empty()) futurerec::apply_config_entry(cfg, "data", train_data);
                if (!train_outdir.empty())
                    futurerec::apply_config_entry(cfg, "out_dir", train_outdir);
                if (!train_seeds.empty()) futurerec::apply_config_entry(cfg, "seeds", train_seeds);
                if (!train_ablate.empty()) futurerec::apply_ablation_variant(cfg, train_ablate);
                futurerec::cmd_train(cfg, std::cout);
            } else if (eval->parsed()) {
                futurerec::cmd_eval(eval_args, std::cout);
            } else if (ablate->parsed()) {
                RunConfig cfg = resolve_config(ablate_config_path, ablate_overrides);
                if (!ablate_data.empty()) futurerec::apply_config_entry(cfg, "data", ablate_data);
                if (!ablate_outdir.empty())
                    futurerec::apply_config_entry(cfg, "out_dir", ablate_outdir);
                futurerec::cmd_ablate(cfg, std::cout);
            } else if (synth->parsed()) {
                futurerec::cmd_synth(synth_args, std::cout);
            }
        },
        std::cerr);
}
