#include "invabc/checkpoint.hpp"

#include "invabc/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace invabc::vae {

namespace {

constexpr char kMagic[] = "INVABC-CKPT";
constexpr std::size_t kMagicLen = 11;
constexpr std::uint32_t kVersion = 1;

std::uint32_t kind_tag(const std::string& kind) {
    static const std::map<std::string, std::uint32_t> tags = {
        {"dense", 1},      {"conv", 2},    {"conv_transpose", 3}, {"batch_norm", 4},
        {"activation", 5}, {"flatten", 6}, {"reshape", 7},
    };
    auto it = tags.find(kind);
    if (it == tags.end()) throw IoError("checkpoint: unknown layer kind '" + kind + "'");
    return it->second;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

void write_descriptor(std::ostream& out, nn::Network& net) {
    put_u32(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& layer : net.layers()) {
        put_u32(out, kind_tag(layer->kind()));
        const auto meta = layer->meta();
        put_u32(out, static_cast<std::uint32_t>(meta.size()));
        for (double v : meta) put_f64(out, v);
    }
}

void check_descriptor(std::istream& in, nn::Network& net, const char* which) {
    const std::uint32_t count = get_u32(in);
    if (count != net.layers().size())
        throw IoError(std::string("checkpoint: ") + which + " has " + std::to_string(count) +
                      " layers, expected " + std::to_string(net.layers().size()));
    for (std::size_t i = 0; i < count; ++i) {
        const auto& layer = net.layers()[i];
        const std::uint32_t tag = get_u32(in);
        if (tag != kind_tag(layer->kind()))
            throw IoError(std::string("checkpoint: ") + which + " layer " + std::to_string(i) +
                          " kind tag " + std::to_string(tag) + " does not match '" +
                          layer->kind() + "'");
        const std::uint32_t nfields = get_u32(in);
        const auto meta = layer->meta();
        if (nfields != meta.size())
            throw IoError(std::string("checkpoint: ") + which + " layer " + std::to_string(i) +
                          " descriptor width mismatch");
        for (std::size_t j = 0; j < nfields; ++j)
            if (get_f64(in) != meta[j])
                throw IoError(std::string("checkpoint: ") + which + " layer " + std::to_string(i) +
                              " descriptor field " + std::to_string(j) + " mismatch");
    }
}

void write_arrays(std::ostream& out, nn::Network& net) {
    for (auto& p : net.params()) {
        put_u64(out, p.value->size());
        for (double v : *p.value) put_f64(out, v);
    }
    for (auto& s : net.state()) {
        put_u64(out, s.value->size());
        for (double v : *s.value) put_f64(out, v);
    }
}

void read_arrays(std::istream& in, nn::Network& net, const char* which) {
    auto fill = [&](std::vector<double>& dst, const std::string& name) {
        const std::uint64_t len = get_u64(in);
        if (len != dst.size())
            throw IoError(std::string("checkpoint: ") + which + " array '" + name + "' has length " +
                          std::to_string(len) + ", expected " + std::to_string(dst.size()));
        for (auto& v : dst) v = get_f64(in);
    };
    for (auto& p : net.params()) fill(*p.value, p.name);
    for (auto& s : net.state()) fill(*s.value, s.name);
}

} // namespace

void save_checkpoint(VaeModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, kMagicLen);
    put_u32(out, kVersion);
    const auto& cfg = model.config();
    put_u32(out, static_cast<std::uint32_t>(cfg.image_h));
    put_u32(out, static_cast<std::uint32_t>(cfg.image_w));
    put_u32(out, static_cast<std::uint32_t>(cfg.channels));
    put_u32(out, static_cast<std::uint32_t>(cfg.latent_dim));
    write_descriptor(out, model.encoder());
    write_descriptor(out, model.decoder());
    write_arrays(out, model.encoder());
    write_arrays(out, model.decoder());
    if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

VaeModel load_checkpoint(const std::string& path, const VaeConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw IoError("checkpoint: '" + path + "' is not a model snapshot");
    const std::uint32_t version = get_u32(in);
    if (version != kVersion)
        throw IoError("checkpoint: unsupported format version " + std::to_string(version));
    const std::uint32_t h = get_u32(in), w = get_u32(in), c = get_u32(in), m = get_u32(in);
    if (h != cfg.image_h || w != cfg.image_w || c != cfg.channels || m != cfg.latent_dim)
        throw IoError("checkpoint: stored geometry " + std::to_string(h) + "x" + std::to_string(w) +
                      "x" + std::to_string(c) + " m=" + std::to_string(m) +
                      " does not match the configuration");
    VaeModel model(cfg);
    check_descriptor(in, model.encoder(), "encoder");
    check_descriptor(in, model.decoder(), "decoder");
    read_arrays(in, model.encoder(), "encoder");
    read_arrays(in, model.decoder(), "decoder");
    return model;
}

} // namespace invabc::vae
