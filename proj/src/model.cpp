#include "futurerec/model.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace futurerec {

std::vector<std::pair<std::string, Tensor>> ModelParams::named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("backbone.item_emb", backbone.item_emb);
    out.emplace_back("backbone.pos_emb", backbone.pos_emb);
    for (size_t l = 0; l < backbone.blocks.size(); ++l) {
        const auto& b = backbone.blocks[l];
        const std::string p = "backbone.block" + std::to_string(l) + ".";
        out.emplace_back(p + "wq", b.wq);
        out.emplace_back(p + "wk", b.wk);
        out.emplace_back(p + "wv", b.wv);
        out.emplace_back(p + "wo", b.wo);
        out.emplace_back(p + "ffn_w1", b.ffn_w1);
        out.emplace_back(p + "ffn_b1", b.ffn_b1);
        out.emplace_back(p + "ffn_w2", b.ffn_w2);
        out.emplace_back(p + "ffn_b2", b.ffn_b2);
        out.emplace_back(p + "ln1_g", b.ln1_g);
        out.emplace_back(p + "ln1_b", b.ln1_b);
        out.emplace_back(p + "ln2_g", b.ln2_g);
        out.emplace_back(p + "ln2_b", b.ln2_b);
    }
    if (future_sup) {
        for (size_t i = 0; i < future_sup->weights.size(); ++i) {
            const std::string p = "future_sup.step" + std::to_string(i + 2) + ".";
            out.emplace_back(p + "w", future_sup->weights[i]);
            out.emplace_back(p + "b", future_sup->biases[i]);
        }
    }
    if (future_cl) {
        out.emplace_back("future_cl.w", future_cl->w);
        out.emplace_back("future_cl.b", future_cl->b);
    }
    return out;
}

ModelParams ModelParams::clone() const {
    ModelParams c;
    c.backbone.config = backbone.config;
    c.backbone.item_emb = backbone.item_emb.clone();
    c.backbone.pos_emb = backbone.pos_emb.clone();
    for (const auto& b : backbone.blocks) {
        BackboneParams::Block nb;
        nb.wq = b.wq.clone();
        nb.wk = b.wk.clone();
        nb.wv = b.wv.clone();
        nb.wo = b.wo.clone();
        nb.ffn_w1 = b.ffn_w1.clone();
        nb.ffn_b1 = b.ffn_b1.clone();
        nb.ffn_w2 = b.ffn_w2.clone();
        nb.ffn_b2 = b.ffn_b2.clone();
        nb.ln1_g = b.ln1_g.clone();
        nb.ln1_b = b.ln1_b.clone();
        nb.ln2_g = b.ln2_g.clone();
        nb.ln2_b = b.ln2_b.clone();
        c.backbone.blocks.push_back(std::move(nb));
    }
    if (future_sup) {
        FutureSupParams fs;
        for (const auto& w : future_sup->weights) fs.weights.push_back(w.clone());
        for (const auto& b : future_sup->biases) fs.biases.push_back(b.clone());
        c.future_sup = std::move(fs);
    }
    if (future_cl) c.future_cl = FutureClParams{future_cl->w.clone(), future_cl->b.clone()};
    return c;
}

void ModelParams::zero_grad() const {
    for (auto&& [name, t] : named_tensors()) {
        (void)name;
        t.zero_grad();
    }
}

ModelParams init_model(const BackboneConfig& config, bool with_future_sup, int horizon,
                       bool with_future_cl, uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.backbone = init_backbone(config, rng);
    if (with_future_sup) p.future_sup = init_future_sup(config.d, horizon, rng);
    if (with_future_cl) p.future_cl = init_future_cl(config.d, rng);
    return p;
}

namespace {

constexpr char kMagic[4] = {'F', 'R', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

std::string make_meta(const BackboneConfig& c, bool has_fs, int horizon, bool has_fc) {
    std::ostringstream os;
    os << "num_items=" << c.num_items << "\n"
       << "d=" << c.d << "\n"
       << "layers=" << c.layers << "\n"
       << "heads=" << c.heads << "\n"
       << "max_len=" << c.max_len << "\n"
       << "dropout_rate=" << c.dropout_rate << "\n"
       << "ln_eps=" << c.ln_eps << "\n"
       << "future_sup=" << (has_fs ? 1 : 0) << "\n"
       << "horizon=" << horizon << "\n"
       << "future_cl=" << (has_fc ? 1 : 0) << "\n";
    return os.str();
}

std::map<std::string, std::string> parse_meta(const std::string& meta) {
    std::map<std::string, std::string> kv;
    std::istringstream is(meta);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) {
        const int64_t d = t.dim(i);
        os.write(reinterpret_cast<const char*>(&d), sizeof d);
    }
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write checkpoint: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    const std::string meta =
        make_meta(params.backbone.config, params.future_sup.has_value(),
                  params.future_sup ? params.future_sup->horizon() : 1,
                  params.future_cl.has_value());
    write_u32(os, static_cast<uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    const auto named = params.named_tensors();
    write_u32(os, static_cast<uint32_t>(named.size()));
    for (const auto& [name, t] : named) write_tensor(os, name, t);
    if (!os) throw io_error("write failure on checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot read checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw data_error("not a checkpoint file: " + path);
    if (read_u32(is) != kVersion) throw data_error("unsupported checkpoint version: " + path);
    std::string meta(read_u32(is), '\0');
    is.read(meta.data(), static_cast<std::streamsize>(meta.size()));
    const auto kv = parse_meta(meta);

    BackboneConfig cfg;
    cfg.num_items = std::stoll(kv.at("num_items"));
    cfg.d = std::stoll(kv.at("d"));
    cfg.layers = std::stoi(kv.at("layers"));
    cfg.heads = std::stoi(kv.at("heads"));
    cfg.max_len = std::stoll(kv.at("max_len"));
    cfg.dropout_rate = std::stod(kv.at("dropout_rate"));
    cfg.ln_eps = std::stod(kv.at("ln_eps"));
    const bool has_fs = kv.at("future_sup") == "1";
    const bool has_fc = kv.at("future_cl") == "1";
    const int horizon = std::stoi(kv.at("horizon"));

    ModelParams params = init_model(cfg, has_fs, has_fs ? horizon : 2, has_fc, /*seed=*/0);
    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : params.named_tensors()) by_name.emplace(name, t);

    const uint32_t count = read_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name(read_u32(is), '\0');
        is.read(name.data(), static_cast<std::streamsize>(name.size()));
        const uint32_t ndim = read_u32(is);
        std::vector<int64_t> dims(ndim);
        for (uint32_t j = 0; j < ndim; ++j)
            is.read(reinterpret_cast<char*>(&dims[j]), sizeof(int64_t));
        const int64_t numel = shape_numel(dims);
        std::vector<double> data(static_cast<size_t>(numel));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(double)));
        if (!is) throw data_error("truncated checkpoint: " + path);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw data_error("unknown tensor in checkpoint: " + name);
        if (it->second.shape() != dims)
            throw data_error("checkpoint shape mismatch for " + name + ": file " +
                             shape_str(dims) + " vs model " + shape_str(it->second.shape()));
        it->second.data() = std::move(data);
    }
    return params;
}

void strip_auxiliary(const std::string& in_path, const std::string& out_path) {
    ModelParams params = load_checkpoint(in_path);
    params.future_sup.reset();
    params.future_cl.reset();
    save_checkpoint(out_path, params);
}

}  // namespace futurerec
