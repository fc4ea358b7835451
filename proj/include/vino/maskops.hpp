#pragma once

#include <cstdint>
#include <vector>

#include "vino/common.hpp"
#include "vino/image.hpp"

namespace vino {

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  bool operator==(const Rect&) const = default;
  long area() const { return static_cast<long>(w) * h; }
};

// Figure-ground grid, values strictly {0,1}.
struct BinaryMask {
  int h = 0, w = 0;
  std::vector<uint8_t> v;

  BinaryMask() = default;
  BinaryMask(int hh, int ww) : h(hh), w(ww), v(static_cast<size_t>(hh) * ww, 0) {}

  uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  long area() const;
  bool empty_mask() const { return area() == 0; }
  bool operator==(const BinaryMask&) const = default;
};

// One crop + optional horizontal flip + resample, shared between images
// and masks so both stay pixel-aligned.
struct CropGeometry {
  Rect src;          // source-pixel rectangle
  int out_h = 0, out_w = 0;
  bool hflip = false;
  bool operator==(const CropGeometry&) const = default;

  static CropGeometry identity(int h, int w) { return {{0, 0, w, h}, h, w, false}; }
};

struct LocalCropSample {
  CropGeometry geom;
  double overlap = 0.0;  // achieved overlap_ratio with the union mask
  bool fallback = false; // true when no candidate met the threshold
};

BinaryMask union_mask(const std::vector<BinaryMask>& masks);
// Eq-style complement: keep object k and background, suppress other
// instances; min(1, (1 - union) + m_k), requires m_k contained in union.
BinaryMask object_conditioned_mask(const BinaryMask& m_union, const BinaryMask& m_k);
BinaryMask warp_mask(const BinaryMask& mask, const CropGeometry& geom);
// Crop-region foreground fraction, computed in the mask's coordinates.
double overlap_ratio(const CropGeometry& crop, const BinaryMask& m_union);

Rect bbox_of_mask(const BinaryMask& mask);
Rect pad_bbox(const Rect& r, double fraction, int bound_h, int bound_w);

LocalCropSample sample_local_crop(const BinaryMask& m_union, const Rect& object_bbox,
                                  double area_lo, double area_hi, double alpha, Rng& rng,
                                  int max_retries = 32);

// Image-side counterpart of warp_mask (bilinear).
Image crop_image(const Image& img, const CropGeometry& geom);

void validate_geometry(const CropGeometry& geom, int src_h, int src_w);

}  // namespace vino
