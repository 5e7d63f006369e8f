#pragma once

#include <filesystem>

#include "tugs/medium.hpp"
#include "tugs/tensor.hpp"

namespace tugs {

// Binary checkpoint, little-endian:
//   "TUGS" | version u32 | R u32 | N u32 | M u32
//   | U1 (2 x R f32, row-major) | U2 (N x R) | U3 (M x R)
//   | gamma_inf (3 f32) | conv weights (3 f32) | conv bias (3 f32)
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  CpFactors factors;
  MediumParams medium;
};

/// Atomic write (temp file + rename).
void save_checkpoint(const std::filesystem::path& path,
                     const CpFactors& factors, const MediumParams& medium);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tugs
