#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "futurerec/backbone.hpp"
#include "futurerec/trainer.hpp"

namespace futurerec {

/// Flat key=value run configuration. Precedence: CLI override > file > the
/// defaults below. The serialized form lists every key explicitly, so a
/// resolved config can be re-run byte-for-byte.
struct RunConfig {
    // data / io
    std::string data;
    std::string out_dir = "run";
    int min_core = 5;
    bool single_pass = false;
    // backbone
    int64_t d = 64;
    int layers = 2;
    int heads = 2;
    int64_t max_len = 50;
    double dropout = 0.2;
    // objective + optimization
    double lr = 1e-3;
    int batch_size = 256;
    double lambda = 0.1;
    int horizon = 2;  // K
    double tau = 3.0;
    int max_epochs = 200;
    int patience = 10;
    std::vector<uint64_t> seeds = {42};
    bool use_fs = true;
    bool use_ug = true;
    bool use_fc = true;
    std::string fs_reduction = "valid_mean";  // or batch_mean
    double fc_temperature = 1.0;
    double clip_norm = 0.0;
    std::string eval_metric = "hr@10";
    int64_t eval_batch = 256;
    bool allow_offgrid = false;

    BackboneConfig backbone_config(int64_t num_items) const;
    TrainConfig train_config(uint64_t seed) const;

    /// Enforces the declared hyperparameter grids for lambda, K and tau
    /// unless allow_offgrid is set; also basic sanity on every field.
    void validate() const;

    /// All keys, one per line, sorted; parsing this text reproduces the
    /// config exactly (serialize-parse-serialize is a fixed point).
    std::string serialize() const;
};

/// Applies one key=value pair; unknown keys raise a config error naming the key.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace futurerec
