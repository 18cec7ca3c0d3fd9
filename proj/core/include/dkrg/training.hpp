#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dkrg/checkpoint.hpp"
#include "dkrg/image.hpp"
#include "dkrg/patches.hpp"

namespace dkrg {

struct TrainConfig {
  int batch_size = 8;
  double learning_rate = 1e-4;
  double dropout = 0.3;
  double clip_norm = 1.0;
  int iterations = 2000;
  std::uint64_t seed = 0;
  std::vector<int> scales{2, 3, 4};
  int patch = kPatchSize;
  int stride = kPatchStride;
  int checkpoint_every = 0;  // 0: only the final checkpoint

  /// Throws std::invalid_argument on non-positive sizes or scales outside
  /// {2, 3, 4}. `iterations` may be 0.
  void validate() const;
};

/// Training pairs drawn lazily from the augmented variants of a set of
/// images. Patches are addressed through a seeded permutation; epoch e uses
/// its own permutation derived from the seed, so batch contents depend only
/// on (seed, iteration).
class TrainingSet {
 public:
  TrainingSet() = default;
  TrainingSet(std::span<const Image> images, const TrainConfig& config);

  std::size_t size() const { return windows_.size(); }
  std::size_t variant_count() const { return variants_.size(); }
  int patch_size() const { return patch_; }

  /// The i-th pair in epoch-0 order.
  PatchPair pair(std::size_t i) const;
  PatchSet to_patch_set() const;

  /// Patches [first, first + count) of the endless epoch sequence, as
  /// (count, 1, patch, patch) arrays.
  void batch(std::uint64_t first, int count, nn::Array4<float>& lr, nn::Array4<float>& hr) const;

 private:
  struct Variant {
    int height = 0;
    int width = 0;
    std::vector<float> lr;
    std::vector<float> hr;
    std::size_t source = 0;
  };
  struct Window {
    std::uint32_t variant = 0;
    int y = 0;
    int x = 0;
  };

  const std::vector<std::size_t>& permutation(std::uint64_t epoch) const;
  void copy_window(const Window& w, float* lr, float* hr) const;

  std::vector<Variant> variants_;
  std::vector<Window> windows_;
  int patch_ = kPatchSize;
  std::uint64_t seed_ = 0;
  mutable std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  mutable std::vector<std::size_t> cached_perm_;
};

/// Reads every image in `image_dir` (luma channel), augments it and cuts
/// patches. Unreadable files are skipped with a warning on stderr; throws
/// std::runtime_error if nothing usable remains.
TrainingSet build_training_set(const std::filesystem::path& image_dir, const TrainConfig& config);

/// Seeded Fisher-Yates permutation of [0, n), independent of the standard
/// library's shuffle implementation.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Mean over batch and pixels of the squared error.
double empirical_risk(const nn::Array4<float>& prediction, const nn::Array4<float>& target);

struct TrainLogRow {
  std::uint64_t iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
};

struct TrainOutputs {
  /// Periodic and final checkpoints are written here (atomically replaced);
  /// empty disables saving.
  std::filesystem::path checkpoint_path;
  /// CSV `iter,loss,grad_norm,seconds`; the header is written by train().
  std::ostream* log = nullptr;
  /// When false the seconds column is written as 0 so that logs of
  /// identical runs are byte-identical.
  bool record_time = true;
  std::function<void(const TrainLogRow&)> on_iteration;
};

struct TrainResult {
  Checkpoint checkpoint;  // last good state
  std::vector<TrainLogRow> log;
  bool aborted = false;
  std::string abort_reason;
};

/// Runs config.iterations Adam steps on the mean squared error of the
/// network's prediction, starting from `initial` (the iteration counter and
/// RNG state continue from it). A non-finite loss or gradient stops training;
/// the returned and saved checkpoint is the state before the failing step.
TrainResult train(const TrainConfig& config, const TrainingSet& data, Checkpoint initial,
                  const TrainOutputs& outputs = {});

}  // namespace dkrg
