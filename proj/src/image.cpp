#include "svt/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "svt/error.hpp"

namespace svt {

namespace {

int next_pnm_int(std::istream& in) {
  // skip whitespace and '#' comments
  for (;;) {
    int c = in.peek();
    if (c == EOF) fail(ErrorKind::Validation, "netpbm: truncated header");
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      break;
    }
  }
  int v;
  if (!(in >> v)) fail(ErrorKind::Validation, "netpbm: bad header field");
  return v;
}

}  // namespace

Image load_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Input, "cannot open image: " + path.string());
  char p, kind;
  in.get(p);
  in.get(kind);
  if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
    fail(ErrorKind::Validation,
         "unsupported image format (need P2/P3/P5/P6): " + path.string());
  const bool color = (kind == '3' || kind == '6');
  const bool ascii = (kind == '2' || kind == '3');
  const std::size_t w = static_cast<std::size_t>(next_pnm_int(in));
  const std::size_t h = static_cast<std::size_t>(next_pnm_int(in));
  const int maxval = next_pnm_int(in);
  if (w == 0 || h == 0 || maxval <= 0 || maxval > 255)
    fail(ErrorKind::Validation, "netpbm: bad dimensions or maxval in " +
                                    path.string());
  Image img;
  img.height = h;
  img.width = w;
  img.channels = color ? 3 : 1;
  img.pixels.resize(h * w * img.channels);
  const std::size_t n = img.pixels.size();
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i)
      img.pixels[i] = next_pnm_int(in) / static_cast<double>(maxval);
  } else {
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      fail(ErrorKind::Validation, "netpbm: truncated pixel data in " +
                                      path.string());
    for (std::size_t i = 0; i < n; ++i)
      img.pixels[i] = raw[i] / static_cast<double>(maxval);
  }
  return img;
}

void save_netpbm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3)
    fail(ErrorKind::Validation, "save_netpbm: channels must be 1 or 3");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Input, "cannot write image: " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  for (double v : img.pixels) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(
        static_cast<unsigned char>(std::lround(c * 255.0))));
  }
}

Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0)
    fail(ErrorKind::Shape, "resize: zero output size");
  Image out;
  out.height = out_h;
  out.width = out_w;
  out.channels = img.channels;
  out.pixels.resize(out_h * out_w * img.channels);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const double cy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(cy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = cy - y0;
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const double cx =
          std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(cx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = cx - x0;
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top =
            img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
        const double bot =
            img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image convert_channels(const Image& img, std::size_t channels) {
  if (channels == img.channels) return img;
  Image out;
  out.height = img.height;
  out.width = img.width;
  out.channels = channels;
  out.pixels.resize(img.height * img.width * channels);
  if (img.channels == 1 && channels == 3) {
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = img.pixels[i];
  } else if (img.channels == 3 && channels == 1) {
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
      out.pixels[i] = (img.pixels[i * 3] + img.pixels[i * 3 + 1] +
                       img.pixels[i * 3 + 2]) /
                      3.0;
  } else {
    fail(ErrorKind::Shape, "convert_channels: only 1<->3 supported");
  }
  return out;
}

Image hflip(const Image& img) {
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image pad_crop(const Image& img, std::size_t pad, std::size_t dy,
               std::size_t dx) {
  if (dy > 2 * pad || dx > 2 * pad)
    fail(ErrorKind::Shape, "pad_crop: offset outside padded area");
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      // source coordinate in the padded frame
      const long sy = static_cast<long>(y + dy) - static_cast<long>(pad);
      const long sx = static_cast<long>(x + dx) - static_cast<long>(pad);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const bool inside = sy >= 0 && sx >= 0 &&
                            sy < static_cast<long>(img.height) &&
                            sx < static_cast<long>(img.width);
        out.at(y, x, c) =
            inside ? img.at(static_cast<std::size_t>(sy),
                            static_cast<std::size_t>(sx), c)
                   : 0.0;
      }
    }
  }
  return out;
}

}  // namespace svt
