#pragma once

#include <string>
#include <vector>

namespace vino {

// RGB image, intensities in [0,1], row-major, channel-interleaved.
struct Image {
  int h = 0, w = 0;
  std::vector<float> px;  // h*w*3

  Image() = default;
  Image(int hh, int ww) : h(hh), w(ww), px(static_cast<size_t>(hh) * ww * 3, 0.f) {}

  float& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  float at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }

  static Image filled(int h, int w, float r, float g, float b);
};

Image resize_bilinear(const Image& img, int out_h, int out_w);

// Lossless 8-bit image IO. Values are quantized to round(v*255).
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);
// Minimal PNG writer (8-bit RGB, stored deflate blocks).
void write_png(const std::string& path, const Image& img);
// Dispatch on extension (.ppm / .png).
void write_image(const std::string& path, const Image& img);
Image read_image(const std::string& path);

}  // namespace vino
