#include "bevloop/common/png.hpp"

#include <zlib.h>

#include <cstring>

#include "bevloop/common/error.hpp"

namespace bevloop {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32(out, uint32_t(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uint32_t crc = uint32_t(
        crc32(0, out.data() + start, uInt(out.size() - start)));
    put_u32(out, crc);
}

}  // namespace

std::vector<uint8_t> encode_png(const uint8_t* pixels, int w, int h, int channels) {
    if (channels != 1 && channels != 3)
        throw InvalidArgument("encode_png: only 1 or 3 channels supported");

    // Raw scanlines with filter byte 0.
    std::vector<uint8_t> raw;
    raw.reserve(size_t(h) * (size_t(w) * channels + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels + size_t(y) * w * channels,
                   pixels + size_t(y + 1) * w * channels);
    }

    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<uint8_t> compressed(bound);
    // Fixed compression level keeps output byte-stable across runs.
    if (compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw Error("encode_png: zlib compression failed");
    compressed.resize(bound);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, uint32_t(w));
    put_u32(ihdr, uint32_t(h));
    ihdr.push_back(8);                              // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);          // gray / truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", {});
    return out;
}

std::string base64_encode(const std::vector<uint8_t>& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 2 < data.size(); i += 3) {
        const uint32_t n = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8) | data[i + 2];
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out.push_back(alphabet[(n >> 6) & 63]);
        out.push_back(alphabet[n & 63]);
    }
    if (i + 1 == data.size()) {
        const uint32_t n = uint32_t(data[i]) << 16;
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out += "==";
    } else if (i + 2 == data.size()) {
        const uint32_t n = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8);
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out.push_back(alphabet[(n >> 6) & 63]);
        out += "=";
    }
    return out;
}

}  // namespace bevloop
