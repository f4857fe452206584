#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bevloop {

// Minimal PNG encoder (8-bit grayscale or RGB, zlib-compressed). Used for
// analyzer image attachments; charts are SVG and do not go through here.
std::vector<uint8_t> encode_png(const uint8_t* pixels, int w, int h, int channels);

std::string base64_encode(const std::vector<uint8_t>& data);

}  // namespace bevloop
