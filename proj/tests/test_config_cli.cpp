#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "futurerec/commands.hpp"
#include "futurerec/dataset.hpp"

using namespace futurerec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

}  // namespace

TEST_CASE("config: serialize-parse-serialize is a fixed point") {
    RunConfig a;
    a.data = "corpus.txt";
    a.lambda = 0.05;
    a.seeds = {1, 2, 3};
    a.use_ug = false;
    a.tau = 4;
    const std::string s1 = a.serialize();
    const RunConfig b = parse_run_config(s1);
    const std::string s2 = b.serialize();
    CHECK(s1 == s2);
    CHECK(b.seeds == std::vector<uint64_t>{1, 2, 3});
    CHECK(b.lambda == 0.05);
    CHECK_FALSE(b.use_ug);
}

TEST_CASE("config: unknown keys are named in the error") {
    try {
        parse_run_config("learning_rate = 0.1\n");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
    }
}

TEST_CASE("config: omitted keys keep defaults and are echoed explicitly") {
    const RunConfig c = parse_run_config("data = x.txt\n");
    CHECK(c.lambda == 0.1);
    CHECK(c.serialize().find("lambda = 0.1\n") != std::string::npos);
    CHECK(c.serialize().find("patience = 10\n") != std::string::npos);
}

TEST_CASE("config: hyperparameter grids are enforced unless allow_offgrid") {
    RunConfig c;
    c.lambda = 0.3;
    CHECK_THROWS_AS(c.validate(), config_error);
    c.allow_offgrid = true;
    CHECK_NOTHROW(c.validate());

    RunConfig k;
    k.horizon = 7;
    CHECK_THROWS_AS(k.validate(), config_error);

    RunConfig t;
    t.tau = 2.5;
    CHECK_THROWS_AS(t.validate(), config_error);
    t.tau = 6;
    CHECK_NOTHROW(t.validate());
}

TEST_CASE("config: CLI ablation variants equal the explicit flag pathway") {
    RunConfig via_flag;
    apply_ablation_variant(via_flag, "w/o-ug");
    RunConfig direct;
    direct.use_ug = false;
    CHECK(via_flag.serialize() == direct.serialize());

    RunConfig backbone;
    apply_ablation_variant(backbone, "backbone-only");
    CHECK_FALSE(backbone.use_fs);
    CHECK_FALSE(backbone.use_fc);
    CHECK(backbone.use_ug);
    CHECK_THROWS_AS(apply_ablation_variant(backbone, "nope"), config_error);
}

TEST_CASE("run_guarded maps error families onto exit codes") {
    std::ostringstream err;
    CHECK(run_guarded([] {}, err) == 0);
    CHECK(run_guarded([] { throw config_error("x"); }, err) == 1);
    CHECK(run_guarded([] { throw data_error("x"); }, err) == 2);
    CHECK(run_guarded([] { throw parse_error("x"); }, err) == 2);
    CHECK(run_guarded([] { throw numeric_error("x"); }, err) == 3);
}

TEST_CASE("prepare: stats line matches a hand count") {
    TempDir dir("futurerec_prepare_test");
    // 3 users x 5 interactions over 3 items: density = 15 / (3*3)
    std::ofstream raw(dir / "raw.txt");
    raw << "alice a b c a b\n";
    raw << "bob b c a c a\n";
    raw << "carol c a b b c\n";
    raw.close();

    PrepareArgs args;
    args.input = dir / "raw.txt";
    args.out_dir = dir / "prep";
    std::ostringstream out;
    cmd_prepare(args, out);
    CHECK(out.str().find("3\t3\t15\t5.0\t166.67%") != std::string::npos);
    CHECK(fs::exists(dir / "prep/corpus.txt"));
    CHECK(fs::exists(dir / "prep/item_map.tsv"));
    CHECK(fs::exists(dir / "prep/stats.txt"));
}

TEST_CASE("prepare: idempotent on its own output") {
    TempDir dir("futurerec_prepare_idem");
    cmd_synth({40, 15, 10, 5, 0.0, dir / "raw.txt"}, std::cout);

    PrepareArgs first{dir / "raw.txt", dir / "p1", 5, false};
    std::ostringstream out1;
    cmd_prepare(first, out1);
    PrepareArgs second{dir / "p1/corpus.txt", dir / "p2", 5, false};
    std::ostringstream out2;
    cmd_prepare(second, out2);
    CHECK(slurp(dir / "p1/corpus.txt") == slurp(dir / "p2/corpus.txt"));
    CHECK(slurp(dir / "p1/stats.txt") == slurp(dir / "p2/stats.txt"));
}

TEST_CASE("train: run directory contains everything needed to re-derive the summary") {
    TempDir dir("futurerec_train_test");
    cmd_synth({40, 12, 10, 5, 0.0, dir / "corpus.txt"}, std::cout);

    RunConfig cfg;
    cfg.data = dir / "corpus.txt";
    cfg.out_dir = dir / "run";
    cfg.d = 16;
    cfg.layers = 1;
    cfg.max_len = 10;
    cfg.batch_size = 32;
    cfg.max_epochs = 2;
    cfg.patience = 2;
    cfg.seeds = {3, 4};
    std::ostringstream out;
    cmd_train(cfg, out);

    for (const uint64_t seed : cfg.seeds) {
        const std::string run = dir / ("run/seed_" + std::to_string(seed));
        CHECK(fs::exists(run + "/resolved.config"));
        CHECK(fs::exists(run + "/train_log.tsv"));
        CHECK(fs::exists(run + "/diagnostics.tsv"));
        CHECK(fs::exists(run + "/best.ckpt"));
        CHECK(fs::exists(run + "/report.txt"));
        CHECK(fs::exists(run + "/metrics.tsv"));
        // the resolved config re-parses to the same resolved config
        const std::string text = slurp(run + "/resolved.config");
        CHECK(parse_run_config(text).serialize() == text);
    }
    CHECK(fs::exists(dir / "run/summary.tsv"));
    CHECK(out.str().find("mean") != std::string::npos);

    // log format: 8 tab-separated columns per epoch line
    std::istringstream log(slurp(dir / "run/seed_3/train_log.tsv"));
    std::string line;
    std::getline(log, line);  // header
    std::getline(log, line);
    CHECK(std::count(line.begin(), line.end(), '\t') == 7);
}

TEST_CASE("eval: deterministic output, split targets differ, stripped checkpoints load") {
    TempDir dir("futurerec_eval_test");
    cmd_synth({40, 12, 10, 6, 0.0, dir / "corpus.txt"}, std::cout);

    RunConfig cfg;
    cfg.data = dir / "corpus.txt";
    cfg.out_dir = dir / "run";
    cfg.d = 16;
    cfg.layers = 1;
    cfg.max_len = 10;
    cfg.batch_size = 32;
    cfg.max_epochs = 1;
    cfg.patience = 1;
    std::ostringstream ignore;
    cmd_train(cfg, ignore);
    const std::string ckpt = dir / "run/seed_42/best.ckpt";

    EvalArgs eval;
    eval.checkpoint = ckpt;
    eval.data = dir / "corpus.txt";
    eval.split = "test";
    std::ostringstream a, b;
    cmd_eval(eval, a);
    cmd_eval(eval, b);
    CHECK(a.str() == b.str());

    EvalArgs valid = eval;
    valid.split = "valid";
    std::ostringstream c;
    cmd_eval(valid, c);
    CHECK(a.str() != c.str());

    strip_auxiliary(ckpt, dir / "stripped.ckpt");
    EvalArgs stripped = eval;
    stripped.checkpoint = dir / "stripped.ckpt";
    std::ostringstream d;
    cmd_eval(stripped, d);
    CHECK(a.str() == d.str());  // auxiliary parameters never affect scores

    EvalArgs bad = eval;
    bad.split = "train";
    CHECK_THROWS_AS(cmd_eval(bad, a), config_error);
}

TEST_CASE("eval: checkpoint/corpus item-count mismatch is a load error") {
    TempDir dir("futurerec_eval_mismatch");
    cmd_synth({40, 12, 10, 6, 0.0, dir / "a.txt"}, std::cout);
    cmd_synth({40, 30, 10, 8, 0.0, dir / "b.txt"}, std::cout);
    RunConfig cfg;
    cfg.data = dir / "a.txt";
    cfg.out_dir = dir / "run";
    cfg.d = 8;
    cfg.layers = 0;
    cfg.max_len = 10;
    cfg.batch_size = 32;
    cfg.max_epochs = 1;
    cfg.patience = 1;
    std::ostringstream ignore;
    cmd_train(cfg, ignore);

    EvalArgs eval;
    eval.checkpoint = dir / "run/seed_42/best.ckpt";
    eval.data = dir / "b.txt";
    std::ostringstream out;
    CHECK_THROWS_AS(cmd_eval(eval, out), data_error);
}

TEST_CASE("synth: deterministic file output") {
    TempDir dir("futurerec_synth_test");
    std::ostringstream o1, o2;
    cmd_synth({30, 12, 8, 9, 0.0, dir / "c1.txt"}, o1);
    cmd_synth({30, 12, 8, 9, 0.0, dir / "c2.txt"}, o2);
    CHECK(slurp(dir / "c1.txt") == slurp(dir / "c2.txt"));
    CHECK(o1.str() == o2.str());
}
