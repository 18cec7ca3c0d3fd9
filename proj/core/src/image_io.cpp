#include "dkrg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace dkrg {
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageFormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Header tokenizer for netpbm: whitespace separated, '#' comments to EOL.
class NetpbmHeader {
 public:
  explicit NetpbmHeader(const std::vector<unsigned char>& bytes)
      : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw ImageFormatError("netpbm: malformed header");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1 << 24)) throw ImageFormatError("netpbm: value too large");
      ++pos_;
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ImageFormatError("netpbm: missing separator before raster");
    }
    return pos_ + 1;
  }

  void seek(std::size_t p) { pos_ = p; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

ColorImage decode_png(const std::vector<unsigned char>& bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw ImageFormatError(std::string("png: ") + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<unsigned char> raster(PNG_IMAGE_SIZE(png));
  // Transparent pixels composite onto black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&png, &background, raster.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ImageFormatError(std::string("png: ") + png.message);
  }
  ColorImage out(static_cast<int>(png.height), static_cast<int>(png.width),
                 channels);
  std::transform(raster.begin(), raster.end(), out.data.begin(),
                 [](unsigned char b) { return static_cast<double>(b); });
  return out;
}

void encode_png(const ColorImage& img, const fs::path& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw ImageFormatError("png: only 1 or 3 channels supported");
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> raster(img.data.size());
  std::transform(img.data.begin(), img.data.end(), raster.begin(), to_byte);
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, raster.data(),
                               0, nullptr)) {
    throw ImageFormatError("png: write failed for " + path.string() + ": " +
                           png.message);
  }
}

}  // namespace

ColorImage decode_netpbm(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ImageFormatError("netpbm: expected P5 or P6 magic");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  NetpbmHeader header(bytes);
  header.seek(2);
  const int width = header.next_int();
  const int height = header.next_int();
  const int maxval = header.next_int();
  if (width < 1 || height < 1) throw ImageFormatError("netpbm: empty image");
  if (maxval != 255) {
    throw ImageFormatError("netpbm: only maxval 255 is supported, got " +
                           std::to_string(maxval));
  }
  const std::size_t offset = header.raster_offset();
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < offset + count) {
    throw ImageFormatError("netpbm: truncated raster");
  }
  ColorImage out(height, width, channels);
  for (std::size_t i = 0; i < count; ++i) out.data[i] = bytes[offset + i];
  return out;
}

std::vector<unsigned char> encode_netpbm(const ColorImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ImageFormatError("netpbm: only 1 or 3 channels supported");
  }
  std::ostringstream header;
  header << (img.channels == 3 ? "P6" : "P5") << '\n'
         << img.width << ' ' << img.height << '\n'
         << 255 << '\n';
  const std::string h = header.str();
  std::vector<unsigned char> out(h.begin(), h.end());
  out.reserve(h.size() + img.data.size());
  std::transform(img.data.begin(), img.data.end(), std::back_inserter(out),
                 to_byte);
  return out;
}

ColorImage read_image(const fs::path& path) {
  const auto bytes = read_bytes(path);
  static constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G',
                                                 '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngMagic, kPngMagic + 8, bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_netpbm(bytes);
  throw ImageFormatError("unrecognized image format: " + path.string());
}

void write_image(const ColorImage& img, const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    encode_png(img, path);
    return;
  }
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    const auto bytes = encode_netpbm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageFormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ImageFormatError("write failed: " + path.string());
    return;
  }
  throw ImageFormatError("unsupported output extension '" + ext + "'");
}

void write_image(const Image& img, const fs::path& path) {
  ColorImage c(img.height(), img.width(), 1);
  std::copy(img.data().begin(), img.data().end(), c.data.begin());
  write_image(c, path);
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower_extension(entry.path());
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dkrg
