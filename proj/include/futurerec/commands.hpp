#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include "futurerec/run_config.hpp"

namespace futurerec {

struct PrepareArgs {
    std::string input;
    std::string out_dir;
    int min_core = 5;
    bool single_pass = false;
};

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";  // valid | test
    std::string out_path;        // optional machine-readable report
    int min_core = 5;
    int64_t eval_batch = 256;
};

struct SynthArgs {
    int64_t users = 200;
    int64_t items = 50;
    int64_t len = 20;
    uint64_t seed = 7;
    double noise = 0.0;
    std::string out;
};

/// Filters, remaps and writes a corpus plus id maps and a stats line.
void cmd_prepare(const PrepareArgs& args, std::ostream& out);

/// Trains per the resolved config, one run directory per seed, and prints a
/// cross-seed summary.
void cmd_train(const RunConfig& config, std::ostream& out);

/// Evaluates a checkpoint on one split; prints a table plus machine lines.
void cmd_eval(const EvalArgs& args, std::ostream& out);

/// Runs the full/without-module variant grid and prints the comparison table.
void cmd_ablate(const RunConfig& config, std::ostream& out);

/// Generates and saves a synthetic Markov corpus.
void cmd_synth(const SynthArgs& args, std::ostream& out);

/// Maps an `--ablate` variant name onto the equivalent module flags.
/// Accepted: full, w/o-fs, w/o-ug, w/o-fc, backbone-only (underscores too).
void apply_ablation_variant(RunConfig& config, const std::string& variant);

/// Maps library errors to process exit codes:
/// 0 success, 1 config error, 2 data error, 3 numeric abort.
int run_guarded(const std::function<void()>& body, std::ostream& err);

}  // namespace futurerec
