#include "dkrg/patches.hpp"

#include <stdexcept>

#include "dkrg/resample.hpp"

namespace dkrg {

std::vector<int> patch_offsets(int length, int size, int stride) {
  if (size < 1 || stride < 1) {
    throw std::invalid_argument("patch_offsets: size and stride must be >= 1");
  }
  std::vector<int> offsets;
  for (int o = 0; o + size <= length; o += stride) offsets.push_back(o);
  return offsets;
}

std::size_t patch_count(int height, int width, int size, int stride) {
  return patch_offsets(height, size, stride).size() *
         patch_offsets(width, size, stride).size();
}

PatchSet extract_patches(const Image& lr, const Image& hr, int size, int stride,
                         std::size_t source) {
  if (lr.height() != hr.height() || lr.width() != hr.width()) {
    throw std::invalid_argument("extract_patches: lr/hr size mismatch");
  }
  if (hr.height() < size || hr.width() < size) {
    throw std::invalid_argument("extract_patches: image smaller than patch");
  }
  PatchSet set;
  const auto rows = patch_offsets(hr.height(), size, stride);
  const auto cols = patch_offsets(hr.width(), size, stride);
  set.patches.reserve(rows.size() * cols.size());
  for (int top : rows) {
    for (int left : cols) {
      set.patches.push_back(PatchPair{crop(lr, top, left, size, size),
                                      crop(hr, top, left, size, size), source});
    }
  }
  return set;
}

std::vector<AugmentedImage> augment(std::span<const Image> images,
                                    std::span<const int> scales) {
  std::vector<AugmentedImage> out;
  out.reserve(images.size() * 4 * scales.size());
  for (std::size_t src = 0; src < images.size(); ++src) {
    for (int turns = 0; turns < 4; ++turns) {
      const Image rotated = rotate90(images[src], turns);
      for (int s : scales) {
        if (rotated.height() < s || rotated.width() < s) continue;
        Image hr = modcrop(rotated, s);
        Image lr = degrade(hr, s);
        out.push_back(AugmentedImage{std::move(hr), std::move(lr), turns, s, src});
      }
    }
  }
  return out;
}

}  // namespace dkrg
