#pragma once

#include <string>

#include "stg/encoder.hpp"
#include "stg/lora.hpp"

namespace stg {

// Encoder checkpoint: "STGM" magic, version, config fields, then parameter
// blobs as 32-bit little-endian floats in registry order. A wrapped model
// appends an adapter section {lora config, A/B blobs per target}. Reload is
// byte-exact, so a saved model restores bit-identical forward outputs.
void save_encoder(const std::string& path, EncoderModel<float>& model);
EncoderModel<float> load_encoder(const std::string& path);

}  // namespace stg
