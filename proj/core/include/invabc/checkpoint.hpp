#pragma once

#include "invabc/vae.hpp"

#include <string>

namespace invabc::vae {

/// Binary model snapshot. Layout: magic "INVABC-CKPT", u32 format version,
/// u32 image height/width/channels/latent dim, then for encoder and decoder
/// an architecture descriptor (u32 layer count; per layer u32 kind tag,
/// u32 field count, f64 fields covering sizes, strides, activation, slope),
/// then every parameter and persistent-state array in declaration order as
/// u64 length + little-endian f64 values.
void save_checkpoint(VaeModel& model, const std::string& path);

/// Rebuilds a model from cfg and fills it from the file. The stored header
/// and per-layer descriptors must match the architecture cfg implies;
/// mismatches raise IoError naming the offending layer.
VaeModel load_checkpoint(const std::string& path, const VaeConfig& cfg);

} // namespace invabc::vae
