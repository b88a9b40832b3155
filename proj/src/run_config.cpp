#include "futurerec/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace futurerec {

std::string format_double(double v) {
    for (int prec = 1; prec <= 17; ++prec) {
        std::ostringstream os;
        os.precision(prec);
        os << v;
        if (std::stod(os.str()) == v) return os.str();
    }
    return std::to_string(v);
}

BackboneConfig RunConfig::backbone_config(int64_t num_items) const {
    BackboneConfig c;
    c.num_items = num_items;
    c.d = d;
    c.layers = layers;
    c.heads = heads;
    c.max_len = max_len;
    c.dropout_rate = dropout;
    return c;
}

TrainConfig RunConfig::train_config(uint64_t seed) const {
    TrainConfig c;
    c.lr = lr;
    c.batch_size = batch_size;
    c.lambda = lambda;
    c.horizon = horizon;
    c.tau = tau;
    c.max_epochs = max_epochs;
    c.patience = patience;
    c.seed = seed;
    c.use_fs = use_fs;
    c.use_ug = use_ug;
    c.use_fc = use_fc;
    c.fs_reduction =
        fs_reduction == "batch_mean" ? FsReduction::BatchMean : FsReduction::ValidMean;
    c.fc_temperature = fc_temperature;
    c.clip_norm = clip_norm;
    c.eval_metric = eval_metric;
    return c;
}

void RunConfig::validate() const {
    if (fs_reduction != "valid_mean" && fs_reduction != "batch_mean")
        throw config_error("fs_reduction must be valid_mean or batch_mean");
    if (seeds.empty()) throw config_error("at least one seed is required");
    if (min_core < 1) throw config_error("min_core must be >= 1");
    if (eval_batch < 1) throw config_error("eval_batch must be >= 1");
    train_config(seeds[0]).validate();
    if (allow_offgrid) return;
    const double lambdas[] = {0.01, 0.05, 0.1, 0.2, 0.5, 1.0};
    if (std::none_of(std::begin(lambdas), std::end(lambdas),
                     [&](double x) { return x == lambda; }))
        throw config_error("lambda " + format_double(lambda) +
                           " is off-grid {0.01,0.05,0.1,0.2,0.5,1.0}; pass allow_offgrid=true "
                           "to override");
    if (horizon < 2 || horizon > 5)
        throw config_error("horizon " + std::to_string(horizon) +
                           " is off-grid {2,3,4,5}; pass allow_offgrid=true to override");
    if (tau != std::floor(tau) || tau < 1.0 || tau > 6.0)
        throw config_error("tau " + format_double(tau) +
                           " is off-grid {1..6}; pass allow_offgrid=true to override");
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw config_error("config key " + key + ": expected bool, got '" + v + "'");
}

std::vector<uint64_t> parse_seeds(const std::string& v) {
    std::vector<uint64_t> out;
    std::istringstream is(v);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoull(tok));
    }
    if (out.empty()) throw config_error("config key seeds: no values in '" + v + "'");
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
    try {
        if (key == "data") c.data = value;
        else if (key == "out_dir") c.out_dir = value;
        else if (key == "min_core") c.min_core = std::stoi(value);
        else if (key == "single_pass") c.single_pass = parse_bool(key, value);
        else if (key == "d") c.d = std::stoll(value);
        else if (key == "layers") c.layers = std::stoi(value);
        else if (key == "heads") c.heads = std::stoi(value);
        else if (key == "max_len") c.max_len = std::stoll(value);
        else if (key == "dropout") c.dropout = std::stod(value);
        else if (key == "lr") c.lr = std::stod(value);
        else if (key == "batch_size") c.batch_size = std::stoi(value);
        else if (key == "lambda") c.lambda = std::stod(value);
        else if (key == "horizon") c.horizon = std::stoi(value);
        else if (key == "tau") c.tau = std::stod(value);
        else if (key == "max_epochs") c.max_epochs = std::stoi(value);
        else if (key == "patience") c.patience = std::stoi(value);
        else if (key == "seeds") c.seeds = parse_seeds(value);
        else if (key == "use_fs") c.use_fs = parse_bool(key, value);
        else if (key == "use_ug") c.use_ug = parse_bool(key, value);
        else if (key == "use_fc") c.use_fc = parse_bool(key, value);
        else if (key == "fs_reduction") c.fs_reduction = value;
        else if (key == "fc_temperature") c.fc_temperature = std::stod(value);
        else if (key == "clip_norm") c.clip_norm = std::stod(value);
        else if (key == "eval_metric") c.eval_metric = value;
        else if (key == "eval_batch") c.eval_batch = std::stoll(value);
        else if (key == "allow_offgrid") c.allow_offgrid = parse_bool(key, value);
        else throw config_error("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw config_error("config key " + key + ": cannot parse value '" + value + "'");
    } catch (const std::out_of_range&) {
        throw config_error("config key " + key + ": value out of range '" + value + "'");
    }
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(line_no) +
                               ": expected key = value, got '" + t + "'");
        apply_config_entry(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return base;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), std::move(base));
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os << "allow_offgrid = " << (allow_offgrid ? "true" : "false") << '\n';
    os << "batch_size = " << batch_size << '\n';
    os << "clip_norm = " << format_double(clip_norm) << '\n';
    os << "d = " << d << '\n';
    os << "data = " << data << '\n';
    os << "dropout = " << format_double(dropout) << '\n';
    os << "eval_batch = " << eval_batch << '\n';
    os << "eval_metric = " << eval_metric << '\n';
    os << "fc_temperature = " << format_double(fc_temperature) << '\n';
    os << "fs_reduction = " << fs_reduction << '\n';
    os << "heads = " << heads << '\n';
    os << "horizon = " << horizon << '\n';
    os << "lambda = " << format_double(lambda) << '\n';
    os << "layers = " << layers << '\n';
    os << "lr = " << format_double(lr) << '\n';
    os << "max_epochs = " << max_epochs << '\n';
    os << "max_len = " << max_len << '\n';
    os << "min_core = " << min_core << '\n';
    os << "out_dir = " << out_dir << '\n';
    os << "patience = " << patience << '\n';
    std::ostringstream seeds_os;
    for (size_t i = 0; i < seeds.size(); ++i) {
        if (i) seeds_os << ',';
        seeds_os << seeds[i];
    }
    os << "seeds = " << seeds_os.str() << '\n';
    os << "single_pass = " << (single_pass ? "true" : "false") << '\n';
    os << "tau = " << format_double(tau) << '\n';
    os << "use_fc = " << (use_fc ? "true" : "false") << '\n';
    os << "use_fs = " << (use_fs ? "true" : "false") << '\n';
    os << "use_ug = " << (use_ug ? "true" : "false") << '\n';
    return os.str();
}

}  // namespace futurerec
