#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkrg/deep_kriging.hpp"
#include "dkrg/nn/adam.hpp"

namespace dkrg {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wrong magic or unsupported version.
class CheckpointFormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Truncated file, trailing bytes, or records that do not match the
/// architecture described by the stored configuration.
class CorruptCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkParams<float> params;
  nn::AdamState optimizer;
  std::uint64_t iteration = 0;
  std::string rng_state;  // textual std::mt19937_64 state
};

/// Little-endian layout:
///   "DKRG" | u32 version
///   config: i32 radius, i32 feature_depth, i32 residual_units, f64 dropout
///   u64 iteration | u32 length + bytes of the RNG state
///   u32 count, then per parameter:
///     u32 length + name bytes | u8 trainable | u32 rank | rank x u32 dims |
///     f32 payload
///   optimizer: u64 step | f32 lr, beta1, beta2, epsilon | u32 count |
///     per parameter: m then v as (u32 rank | dims | f32 payload)
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary sibling and renames it over `path`, so a crash never
/// leaves a partial file in place of the previous checkpoint.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Fresh checkpoint: seeded parameters, zero Adam moments, iteration 0.
Checkpoint initial_checkpoint(const NetworkConfig& config, std::uint64_t seed,
                              float learning_rate = 1e-4f);

}  // namespace dkrg
