#pragma once

#include <cstdint>

namespace shiftband {

// Rounds are 1-based throughout: t in [1, T].
using Round = std::int64_t;

// Arms are 0-based in the API: a in [0, K). Serialized artifacts
// (CSV columns, annotation JSON) label arms 1..K.
using Arm = int;

}  // namespace shiftband
