#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkrg/image.hpp"

namespace dkrg {

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads binary PGM (P5) / PPM (P6) with maxval 255, or 8-bit PNG.
/// Format is chosen by content (magic bytes), not by extension.
/// PNG alpha channels are dropped; palette images are expanded to RGB.
ColorImage read_image(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image. The extension selects the codec:
/// .pgm/.ppm/.pnm use the built-in netpbm writer, .png uses libpng.
/// Values are clamped to [0, 255] and rounded.
void write_image(const ColorImage& img, const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

/// Netpbm codec on in-memory bytes.
ColorImage decode_netpbm(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> encode_netpbm(const ColorImage& img);

/// Sorted list of readable image files (.png/.pgm/.ppm/.pnm) in `dir`.
std::vector<std::filesystem::path> list_images(
    const std::filesystem::path& dir);

}  // namespace dkrg
