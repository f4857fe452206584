#include "bevloop/gen/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "bevloop/common/error.hpp"

namespace bevloop::gen {

namespace {

constexpr char kMagic[4] = {'B', 'V', 'L', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParseError("checkpoint truncated", 0);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

void put_f32(std::ostream& os, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

float get_f32(std::istream& is) {
    const uint32_t v = get_u32(is);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace

void save_checkpoint(const GenModelT<float>& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    const std::string cfg = model.config().to_json();
    put_u32(os, static_cast<uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    const ParamStore<float>& ps = model.params();
    put_u32(os, static_cast<uint32_t>(ps.order.size()));
    for (const std::string& name : ps.order) {
        const Tensor<float>& t = ps.at(name);
        put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<uint32_t>(t.ndim()));
        for (int d : t.shape) put_u32(os, static_cast<uint32_t>(d));
        for (float f : t.data) put_f32(os, f);
    }
    if (!os) throw IoError("failed writing " + path);
}

GenModelT<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("not a model checkpoint: " + path, 0);
    const uint32_t version = get_u32(is);
    if (version != kVersion) throw ParseError("unsupported checkpoint version", 0);
    const uint32_t cfg_len = get_u32(is);
    std::string cfg_text(cfg_len, '\0');
    is.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
    if (!is) throw ParseError("checkpoint truncated", 0);
    GenModelT<float> model(GenConfig::from_json(cfg_text), 0);

    ParamStore<float>& ps = model.params();
    const uint32_t n = get_u32(is);
    if (n != ps.order.size())
        throw ParseError("checkpoint parameter count does not match its config", 0);
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!is) throw ParseError("checkpoint truncated", 0);
        if (name != ps.order[i])
            throw ParseError("unexpected parameter order at " + name, 0);
        Tensor<float>& t = ps.at(name);
        const uint32_t nd = get_u32(is);
        if (nd != static_cast<uint32_t>(t.ndim()))
            throw ParseError("parameter rank mismatch at " + name, 0);
        for (int d = 0; d < t.ndim(); ++d)
            if (get_u32(is) != static_cast<uint32_t>(t.dim(d)))
                throw ParseError("parameter shape mismatch at " + name, 0);
        for (float& f : t.data) f = get_f32(is);
    }
    if (!is) throw ParseError("checkpoint truncated", 0);
    return model;
}

}  // namespace bevloop::gen
