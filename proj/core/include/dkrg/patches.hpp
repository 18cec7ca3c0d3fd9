#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dkrg/image.hpp"

namespace dkrg {

inline constexpr int kPatchSize = 31;
inline constexpr int kPatchStride = 21;

struct PatchPair {
  Image lr;  // upsampled low-resolution patch
  Image hr;
  std::size_t source = 0;
};

struct PatchSet {
  std::vector<PatchPair> patches;
};

/// Number of windows of `size` at offsets 0, stride, 2*stride, ... that fit.
std::size_t patch_count(int height, int width, int size = kPatchSize,
                        int stride = kPatchStride);

/// Top-left offsets of every fully in-bounds window along one axis.
std::vector<int> patch_offsets(int length, int size = kPatchSize,
                               int stride = kPatchStride);

/// Aligned windows from an (upsampled LR, HR) pair of identical size.
/// Throws std::invalid_argument on size mismatch or if the image is smaller
/// than one patch.
PatchSet extract_patches(const Image& lr, const Image& hr,
                         int size = kPatchSize, int stride = kPatchStride,
                         std::size_t source = 0);

/// One training variant of a source image.
struct AugmentedImage {
  Image hr;            // rotated and modcropped to a multiple of `scale`
  Image lr_upsampled;  // degrade(hr, scale)
  int quarter_turns = 0;
  int scale = 0;
  std::size_t source = 0;
};

/// Rotations by 0/90/180/270 degrees crossed with one training pair per SR
/// scale. Ordering: source-major, then rotation, then scale (as listed).
/// Variants whose modcropped size would be empty are skipped.
std::vector<AugmentedImage> augment(std::span<const Image> images,
                                    std::span<const int> scales);

}  // namespace dkrg
