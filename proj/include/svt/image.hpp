#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace svt {

// Channel-interleaved image with values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;  // row-major, interleaved

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

// Netpbm only (P2/P3/P5/P6). Enough for directory-layout datasets without
// pulling in an image library.
Image load_netpbm(const std::filesystem::path& path);
void save_netpbm(const Image& img, const std::filesystem::path& path);

Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w);

// Gray <-> RGB so a dataset can be served at whatever channel count the
// encoder config asks for.
Image convert_channels(const Image& img, std::size_t channels);

Image hflip(const Image& img);

// Zero-pad by `pad` on every side, then take an out-of-center crop of the
// original size at offset (dy, dx), each in [0, 2*pad].
Image pad_crop(const Image& img, std::size_t pad, std::size_t dy,
               std::size_t dx);

}  // namespace svt
