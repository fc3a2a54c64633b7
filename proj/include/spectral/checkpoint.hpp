#pragma once

#include <string>

#include "spectral/autodiff.hpp"

namespace spectral {

/// Flat binary container of (name, shape, little-endian float64 values)
/// records. A plain-text manifest listing name, shape and trainable flag
/// is written next to it (same path with ".manifest" appended).
/// Round trips are bit-exact.
void save_checkpoint(const ParameterSet& params, const std::string& path);

/// Loads values into an existing ParameterSet; every record must match an
/// entry by name and shape and every entry must be present in the file.
void load_checkpoint(ParameterSet& params, const std::string& path);

}  // namespace spectral
