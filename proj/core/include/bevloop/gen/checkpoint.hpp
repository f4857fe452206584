#pragma once

#include <string>

#include "bevloop/gen/model.hpp"

namespace bevloop::gen {

// Binary checkpoint: "BVLP" magic, format version, config echo (JSON), then
// every parameter as name, dims and raw fp32 values. Little-endian layout;
// byte-identical for identical models.
void save_checkpoint(const GenModelT<float>& model, const std::string& path);

// Rebuilds the model from the stored config and overwrites every parameter.
// Any mismatch between the stored tensors and the rebuilt store is an error.
GenModelT<float> load_checkpoint(const std::string& path);

}  // namespace bevloop::gen
