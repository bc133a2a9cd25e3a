#pragma once

#include <string>

#include "fatq/trainer.hpp"

namespace fatq::checkpoint {

// Versioned binary container: "FATQ" magic, format version, little-endian
// 64-bit float payloads, length-prefixed per-layer sections, the rng stream
// state, the epoch counter and the metric history. Save/load round-trips are
// byte-identical.
void save(const trainer::QatModel& model, const std::string& path);
trainer::QatModel load(const std::string& path);

}  // namespace fatq::checkpoint
