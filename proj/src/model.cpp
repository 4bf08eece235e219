#include "litecan/model.hpp"

#include <cstdio>
#include <fstream>
#include <map>

namespace litecan {

void ModelConfig::validate() const {
    if (d_in < 1) throw ConfigError("d_in must be >= 1");
    if (d_model < 1) throw ConfigError("d_model must be >= 1");
    if (n_heads < 1 || d_model % n_heads != 0)
        throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                          std::to_string(n_heads) + ")");
    if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
    if (d_ff < 1) throw ConfigError("d_ff must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
    if (pos_encoding != "sinusoidal" && pos_encoding != "none")
        throw ConfigError("pos_encoding must be 'sinusoidal' or 'none'");
}

int64_t param_count(const ModelConfig& cfg) {
    cfg.validate();
    const int64_t d = cfg.d_model, din = cfg.d_in, dff = cfg.d_ff, c = cfg.n_classes;
    const int64_t in_proj = din * d + d;
    const int64_t cls = d;
    const int64_t attn = 4 * (d * d + d);
    const int64_t ffn = d * dff + dff + dff * d + d;
    const int64_t norms = 4 * d;
    const int64_t head = d * c + c;
    return in_proj + cls + cfg.n_layers * (attn + ffn + norms) + head;
}

int64_t size_bytes(const ModelConfig& cfg) { return 4 * param_count(cfg); }

namespace {

constexpr char kMagic[4] = {'F', 'L', 'T', 'C'};
constexpr uint32_t kVersion = 1;

void write_u8(std::ostream& out, uint8_t v) { out.put(static_cast<char>(v)); }

void write_u16(std::ostream& out, uint16_t v) {
    write_u8(out, static_cast<uint8_t>(v & 0xFF));
    write_u8(out, static_cast<uint8_t>(v >> 8));
}

void write_u32(std::ostream& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) write_u8(out, static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void write_u64(std::ostream& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) write_u8(out, static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void write_f32(std::ostream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

void write_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

uint8_t read_u8(std::istream& in) {
    const int c = in.get();
    if (c == EOF) throw DataError("checkpoint truncated");
    return static_cast<uint8_t>(c);
}

uint16_t read_u16(std::istream& in) {
    const uint16_t lo = read_u8(in);
    return static_cast<uint16_t>(lo | (static_cast<uint16_t>(read_u8(in)) << 8));
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(read_u8(in)) << (8 * i);
    return v;
}

uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(read_u8(in)) << (8 * i);
    return v;
}

float read_f32(std::istream& in) {
    const uint32_t bits = read_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

double read_f64(std::istream& in) {
    const uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_checkpoint(const ModelParamsT<float>& params, const ModelConfig& cfg,
                     const std::string& path) {
    cfg.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(cfg.d_in));
    write_u32(out, static_cast<uint32_t>(cfg.d_model));
    write_u32(out, static_cast<uint32_t>(cfg.n_heads));
    write_u32(out, static_cast<uint32_t>(cfg.n_layers));
    write_u32(out, static_cast<uint32_t>(cfg.d_ff));
    write_u32(out, static_cast<uint32_t>(cfg.window));
    write_u32(out, static_cast<uint32_t>(cfg.n_classes));
    write_f64(out, cfg.dropout);
    write_u8(out, cfg.pos_encoding == "sinusoidal" ? 1 : 0);
    const auto named = params.named();
    write_u32(out, static_cast<uint32_t>(named.size()));
    for (const auto& kv : named) {
        if (kv.first.size() > 0xFFFF) throw DataError("tensor name too long");
        write_u16(out, static_cast<uint16_t>(kv.first.size()));
        out.write(kv.first.data(), static_cast<std::streamsize>(kv.first.size()));
        const TensorT<float>& t = *kv.second;
        write_u8(out, static_cast<uint8_t>(t.rank()));
        for (int64_t d : t.shape) write_u32(out, static_cast<uint32_t>(d));
        for (int64_t i = 0; i < t.numel(); ++i) write_f32(out, t.ptr()[i]);
    }
    if (!out) throw DataError("checkpoint write failed: " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path);
    const uint32_t version = read_u32(in);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    ModelConfig cfg;
    cfg.d_in = static_cast<int>(read_u32(in));
    cfg.d_model = static_cast<int>(read_u32(in));
    cfg.n_heads = static_cast<int>(read_u32(in));
    cfg.n_layers = static_cast<int>(read_u32(in));
    cfg.d_ff = static_cast<int>(read_u32(in));
    cfg.window = static_cast<int>(read_u32(in));
    cfg.n_classes = static_cast<int>(read_u32(in));
    cfg.dropout = read_f64(in);
    cfg.pos_encoding = read_u8(in) == 1 ? "sinusoidal" : "none";
    cfg.validate();

    LoadedModel loaded{make_params<float>(cfg), cfg};
    std::map<std::string, TensorT<float>*> by_name;
    for (auto& kv : loaded.params.named()) by_name[kv.first] = kv.second;

    const uint32_t count = read_u32(in);
    if (count != by_name.size())
        throw DataError("checkpoint has " + std::to_string(count) + " tensors, expected " +
                        std::to_string(by_name.size()));
    std::map<std::string, bool> seen;
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = read_u16(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != name_len) throw DataError("checkpoint truncated");
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError("unknown tensor name in checkpoint: " + name);
        if (seen[name]) throw DataError("duplicate tensor in checkpoint: " + name);
        seen[name] = true;
        TensorT<float>& t = *it->second;
        const uint8_t rank = read_u8(in);
        if (rank != t.rank())
            throw DataError("tensor " + name + ": rank " + std::to_string(rank) + ", expected " +
                            std::to_string(t.rank()));
        for (int d = 0; d < rank; ++d) {
            const uint32_t dim = read_u32(in);
            if (static_cast<int64_t>(dim) != t.shape[d])
                throw DataError("tensor " + name + ": dimension mismatch");
        }
        for (int64_t j = 0; j < t.numel(); ++j) t.ptr()[j] = read_f32(in);
    }
    if (in.peek() != EOF) throw DataError("trailing bytes after checkpoint payload: " + path);
    return loaded;
}

}  // namespace litecan
