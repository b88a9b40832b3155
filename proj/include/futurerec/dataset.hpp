#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "futurerec/errors.hpp"

namespace futurerec {

struct UserRecord {
    std::string user_token;
    std::vector<int64_t> items;  // chronological, remapped to [1, V]
};

/// Interaction corpus after k-core filtering. Item id 0 is reserved for
/// padding; real items occupy the contiguous range [1, num_items].
struct InteractionCorpus {
    std::vector<UserRecord> users;
    int64_t num_items = 0;                 // V, excluding the padding slot
    std::vector<std::string> item_tokens;  // index i in [1, V] -> raw token; [0] unused

    int64_t num_actions() const;
    double avg_length() const;
    double density() const;  // actions / (users * items)
};

/// Reads `user item item ...` lines and applies iterative k-core filtering
/// until a fixpoint (removing an item can push a user under the threshold
/// and vice versa). `single_pass` keeps the legacy one-round behaviour.
InteractionCorpus load_corpus(const std::string& path, int min_core = 5,
                              bool single_pass = false);

/// Same filtering applied to already-parsed sequences.
InteractionCorpus build_corpus(std::vector<std::pair<std::string, std::vector<std::string>>> raw,
                               int min_core = 5, bool single_pass = false);

void save_corpus(const InteractionCorpus& corpus, const std::string& path);

/// Chronological leave-one-out views. For a user sequence x_1..x_n:
/// training sequence x_1..x_{n-2}; validation target x_{n-1} with context
/// x_1..x_{n-2}; test target x_n with context x_1..x_{n-1}.
struct TrainView {
    const InteractionCorpus* corpus = nullptr;
    std::vector<int64_t> train_seq(size_t user) const;
    int64_t train_len(size_t user) const;
};

struct EvalInstance {
    std::vector<int64_t> context;
    int64_t target;
};

struct SplitView {
    enum class Kind { Validation, Test };
    const InteractionCorpus* corpus = nullptr;
    Kind kind = Kind::Validation;
    size_t num_users() const { return corpus->users.size(); }
    EvalInstance instance(size_t user) const;
};

struct Splits {
    TrainView train;
    SplitView valid;
    SplitView test;
};

Splits split_leave_one_out(const InteractionCorpus& corpus);

/// One expanded training example: prefix S_{1:t}, its next-item target,
/// and up to K-1 additional future targets drawn from the training portion.
struct TrainingInstance {
    int32_t user = 0;
    int32_t t = 0;  // prefix length, 1-based position of the last kept item
    int64_t next_target = 0;
    std::vector<int64_t> future_targets;  // v_{t+2} .. v_{t+K} when fs_valid
    bool fs_valid = false;                // t + K <= train length
    bool fc_valid = false;                // all K items v_{t+1..t+K} available
};

/// Emits n-1 instances per training sequence of length n (t = 1 .. n-1).
std::vector<TrainingInstance> expand_instances(const TrainView& view, int horizon);

struct Batch {
    int64_t rows = 0;
    int64_t window = 0;  // always max_len; prefixes are left-padded with 0
    int horizon = 1;
    std::vector<int64_t> prefix_ids;      // rows x window
    std::vector<int32_t> lengths;         // true (possibly truncated) lengths
    std::vector<int64_t> next_targets;    // rows
    std::vector<int64_t> future_targets;  // rows x (horizon-1), 0 where invalid
    std::vector<uint8_t> fs_valid;
    std::vector<uint8_t> fc_valid;
};

/// Deterministic shuffle + padding. The final short batch is kept.
std::vector<Batch> make_batches(const std::vector<TrainingInstance>& instances,
                                const TrainView& view, int batch_size, int64_t max_len,
                                uint64_t shuffle_seed);

/// Sparse first-order transition structure used by the synthetic generator:
/// item i moves to next_major[i] with probability 0.9 and to next_minor[i]
/// with probability 0.1.
struct MarkovSpec {
    std::vector<int64_t> next_major;
    std::vector<int64_t> next_minor;
    double p_major = 0.9;
    int64_t step(int64_t state, std::mt19937_64& rng) const;
};

MarkovSpec make_markov_spec(int64_t num_items, uint64_t seed);

/// Desk-scale synthetic corpus drawn from a fixed Markov chain. With
/// noise_prob > 0, a step emits a uniformly random item instead of following
/// the chain (the walk resumes from the pre-noise state).
InteractionCorpus synth_markov(int64_t num_users, int64_t num_items, int64_t seq_len,
                               uint64_t seed, double noise_prob = 0.0);

}  // namespace futurerec
