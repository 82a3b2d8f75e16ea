#pragma once

#include <string>

#include "udi/paramset.hpp"

namespace udi {

// Flat binary checkpoint: magic, entry count, then per entry key, shape and
// raw little-endian float64 payload. Round-trips bit-exactly.
void save_checkpoint(const ParamSet& params, const std::string& path);
ParamSet load_checkpoint(const std::string& path);

}  // namespace udi
