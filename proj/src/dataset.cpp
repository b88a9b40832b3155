#include "futurerec/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace futurerec {

int64_t InteractionCorpus::num_actions() const {
    int64_t n = 0;
    for (const auto& u : users) n += static_cast<int64_t>(u.items.size());
    return n;
}

double InteractionCorpus::avg_length() const {
    if (users.empty()) return 0.0;
    return static_cast<double>(num_actions()) / static_cast<double>(users.size());
}

double InteractionCorpus::density() const {
    if (users.empty() || num_items == 0) return 0.0;
    return static_cast<double>(num_actions()) /
           (static_cast<double>(users.size()) * static_cast<double>(num_items));
}

InteractionCorpus build_corpus(std::vector<std::pair<std::string, std::vector<std::string>>> raw,
                               int min_core, bool single_pass) {
    const size_t n = raw.size();
    std::vector<char> alive(n, 1);
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, int64_t> count;
        for (size_t u = 0; u < n; ++u) {
            if (!alive[u]) continue;
            for (const auto& it : raw[u].second) ++count[it];
        }
        for (size_t u = 0; u < n; ++u) {
            if (!alive[u]) continue;
            auto& items = raw[u].second;
            const size_t before = items.size();
            items.erase(std::remove_if(items.begin(), items.end(),
                                       [&](const std::string& it) {
                                           return count.at(it) < min_core;
                                       }),
                        items.end());
            if (items.size() != before) changed = true;
            if (static_cast<int>(items.size()) < min_core) {
                alive[u] = 0;
                changed = true;
            }
        }
        if (single_pass) break;
    }

    InteractionCorpus corpus;
    std::unordered_map<std::string, int64_t> remap;
    corpus.item_tokens.push_back("");  // padding slot
    for (size_t u = 0; u < n; ++u) {
        if (!alive[u]) continue;
        UserRecord rec;
        rec.user_token = raw[u].first;
        rec.items.reserve(raw[u].second.size());
        for (const auto& tok : raw[u].second) {
            auto [it, inserted] = remap.try_emplace(tok, static_cast<int64_t>(remap.size()) + 1);
            if (inserted) corpus.item_tokens.push_back(tok);
            rec.items.push_back(it->second);
        }
        corpus.users.push_back(std::move(rec));
    }
    corpus.num_items = static_cast<int64_t>(remap.size());
    if (corpus.users.empty())
        throw data_error("corpus is empty after " + std::to_string(min_core) +
                         "-core filtering");
    return corpus;
}

InteractionCorpus load_corpus(const std::string& path, int min_core, bool single_pass) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read corpus file: " + path);
    std::vector<std::pair<std::string, std::vector<std::string>>> raw;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string user_tok;
        std::vector<std::string> items;
        std::string tok;
        if (ls >> user_tok)
            while (ls >> tok) items.push_back(tok);
        if (user_tok.empty() || items.empty())
            throw parse_error(path + ":" + std::to_string(line_no) +
                              ": expected `user item item ...`");
        raw.emplace_back(std::move(user_tok), std::move(items));
    }
    if (in.bad()) throw io_error("read failure on corpus file: " + path);
    return build_corpus(std::move(raw), min_core, single_pass);
}

void save_corpus(const InteractionCorpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write corpus file: " + path);
    for (const auto& u : corpus.users) {
        out << u.user_token;
        for (int64_t id : u.items) out << ' ' << corpus.item_tokens[static_cast<size_t>(id)];
        out << '\n';
    }
    if (!out) throw io_error("write failure on corpus file: " + path);
}

std::vector<int64_t> TrainView::train_seq(size_t user) const {
    const auto& items = corpus->users[user].items;
    return std::vector<int64_t>(items.begin(), items.end() - 2);
}

int64_t TrainView::train_len(size_t user) const {
    return static_cast<int64_t>(corpus->users[user].items.size()) - 2;
}

EvalInstance SplitView::instance(size_t user) const {
    const auto& items = corpus->users[user].items;
    const size_t n = items.size();
    if (kind == Kind::Validation)
        return {std::vector<int64_t>(items.begin(), items.end() - 2), items[n - 2]};
    return {std::vector<int64_t>(items.begin(), items.end() - 1), items[n - 1]};
}

Splits split_leave_one_out(const InteractionCorpus& corpus) {
    for (const auto& u : corpus.users)
        if (u.items.size() < 3)
            throw contract_error("split: user " + u.user_token +
                                 " has fewer than 3 interactions");
    Splits s;
    s.train.corpus = &corpus;
    s.valid = {&corpus, SplitView::Kind::Validation};
    s.test = {&corpus, SplitView::Kind::Test};
    return s;
}

std::vector<TrainingInstance> expand_instances(const TrainView& view, int horizon) {
    if (horizon < 1) throw contract_error("expand_instances: horizon must be >= 1");
    std::vector<TrainingInstance> out;
    for (size_t u = 0; u < view.corpus->users.size(); ++u) {
        const auto seq = view.train_seq(u);
        const int64_t n = static_cast<int64_t>(seq.size());
        for (int64_t t = 1; t < n; ++t) {
            TrainingInstance inst;
            inst.user = static_cast<int32_t>(u);
            inst.t = static_cast<int32_t>(t);
            inst.next_target = seq[static_cast<size_t>(t)];
            inst.fs_valid = t + horizon <= n;
            inst.fc_valid = inst.fs_valid;  // both need v_{t+1..t+K} in the training portion
            if (inst.fs_valid)
                inst.future_targets.assign(seq.begin() + t + 1, seq.begin() + t + horizon);
            out.push_back(std::move(inst));
        }
    }
    return out;
}

std::vector<Batch> make_batches(const std::vector<TrainingInstance>& instances,
                                const TrainView& view, int batch_size, int64_t max_len,
                                uint64_t shuffle_seed) {
    if (batch_size < 2)
        throw config_error("batch_size must be >= 2 (in-batch negatives), got " +
                           std::to_string(batch_size));
    if (max_len < 1) throw config_error("max_len must be >= 1");
    std::vector<size_t> order(instances.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Batch> batches;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
        Batch b;
        b.rows = static_cast<int64_t>(end - start);
        b.window = max_len;
        b.prefix_ids.assign(static_cast<size_t>(b.rows * max_len), 0);
        for (size_t i = start; i < end; ++i) {
            const TrainingInstance& inst = instances[order[i]];
            const auto seq = view.train_seq(static_cast<size_t>(inst.user));
            const int64_t row = static_cast<int64_t>(i - start);
            const int64_t len = std::min<int64_t>(inst.t, max_len);
            for (int64_t j = 0; j < len; ++j)
                b.prefix_ids[static_cast<size_t>(row * max_len + max_len - len + j)] =
                    seq[static_cast<size_t>(inst.t - len + j)];
            b.lengths.push_back(static_cast<int32_t>(len));
            b.next_targets.push_back(inst.next_target);
            b.fs_valid.push_back(inst.fs_valid ? 1 : 0);
            b.fc_valid.push_back(inst.fc_valid ? 1 : 0);
        }
        batches.push_back(std::move(b));
    }
    // Future-target matrices are sized from the widest instance set.
    int horizon = 1;
    for (const auto& inst : instances)
        horizon = std::max(horizon, static_cast<int>(inst.future_targets.size()) + 1);
    size_t cursor = 0;
    for (Batch& b : batches) {
        b.horizon = horizon;
        b.future_targets.assign(static_cast<size_t>(b.rows * (horizon - 1)), 0);
        for (int64_t row = 0; row < b.rows; ++row, ++cursor) {
            const TrainingInstance& inst = instances[order[cursor]];
            for (size_t k = 0; k < inst.future_targets.size(); ++k)
                b.future_targets[static_cast<size_t>(row * (horizon - 1)) + k] =
                    inst.future_targets[k];
        }
    }
    return batches;
}

int64_t MarkovSpec::step(int64_t state, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng) < p_major ? next_major[static_cast<size_t>(state)]
                            : next_minor[static_cast<size_t>(state)];
}

MarkovSpec make_markov_spec(int64_t num_items, uint64_t seed) {
    if (num_items < 10)
        throw contract_error("make_markov_spec: need at least 10 items, got " +
                             std::to_string(num_items));
    MarkovSpec spec;
    spec.next_major.resize(static_cast<size_t>(num_items));
    spec.next_minor.resize(static_cast<size_t>(num_items));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int64_t> pick(0, num_items - 1);
    for (int64_t i = 0; i < num_items; ++i) {
        // the major edge forms a cycle so every item stays reachable
        spec.next_major[static_cast<size_t>(i)] = (i + 1) % num_items;
        int64_t minor = pick(rng);
        while (minor == i || minor == spec.next_major[static_cast<size_t>(i)]) minor = pick(rng);
        spec.next_minor[static_cast<size_t>(i)] = minor;
    }
    return spec;
}

InteractionCorpus synth_markov(int64_t num_users, int64_t num_items, int64_t seq_len,
                               uint64_t seed, double noise_prob) {
    if (seq_len < 5) throw contract_error("synth_markov: seq_len must be >= 5");
    const MarkovSpec spec = make_markov_spec(num_items, seed);
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<int64_t> pick(0, num_items - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    std::vector<std::pair<std::string, std::vector<std::string>>> raw;
    raw.reserve(static_cast<size_t>(num_users));
    for (int64_t uix = 0; uix < num_users; ++uix) {
        std::vector<std::string> items;
        items.reserve(static_cast<size_t>(seq_len));
        int64_t state = pick(rng);
        items.push_back("i" + std::to_string(state));
        for (int64_t j = 1; j < seq_len; ++j) {
            if (noise_prob > 0.0 && u(rng) < noise_prob) {
                items.push_back("i" + std::to_string(pick(rng)));  // state unchanged
            } else {
                state = spec.step(state, rng);
                items.push_back("i" + std::to_string(state));
            }
        }
        raw.emplace_back("u" + std::to_string(uix), std::move(items));
    }
    return build_corpus(std::move(raw), 5, /*single_pass=*/false);
}

}  // namespace futurerec
