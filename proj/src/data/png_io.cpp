#include "unireid/data/png_io.h"

#include <png.h>

#include <cstring>
#include <memory>

#include "unireid/errors.h"

namespace unireid {
namespace {

struct PngImageDeleter {
  void operator()(png_image* image) const {
    png_image_free(image);
    delete image;
  }
};

using PngImagePtr = std::unique_ptr<png_image, PngImageDeleter>;

PngImagePtr make_png_image() {
  auto* image = new png_image;
  std::memset(image, 0, sizeof(png_image));
  image->version = PNG_IMAGE_VERSION;
  return PngImagePtr(image);
}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  if (static_cast<int64_t>(img.pixels.size()) != img.height * img.width * 3) {
    throw InputError("RGB buffer size does not match the image dimensions");
  }
  auto image = make_png_image();
  image->width = static_cast<png_uint_32>(img.width);
  image->height = static_cast<png_uint_32>(img.height);
  image->format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(image.get(), path.c_str(), 0, img.pixels.data(), 0,
                               nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + image->message);
  }
}

RgbImage read_png(const std::filesystem::path& path) {
  auto image = make_png_image();
  if (!png_image_begin_read_from_file(image.get(), path.c_str())) {
    throw IoError("cannot read " + path.string() + ": " + image->message);
  }
  image->format = PNG_FORMAT_RGB;
  RgbImage out;
  out.height = image->height;
  out.width = image->width;
  out.pixels.resize(PNG_IMAGE_SIZE(*image));
  if (!png_image_finish_read(image.get(), nullptr, out.pixels.data(), 0, nullptr)) {
    throw IoError("cannot decode " + path.string() + ": " + image->message);
  }
  return out;
}

}  // namespace unireid
