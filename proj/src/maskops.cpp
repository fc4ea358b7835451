#include "vino/maskops.hpp"

#include <algorithm>
#include <cmath>

namespace vino {

long BinaryMask::area() const {
  long n = 0;
  for (uint8_t b : v) n += b;
  return n;
}

void validate_geometry(const CropGeometry& geom, int src_h, int src_w) {
  const Rect& r = geom.src;
  if (r.w <= 0 || r.h <= 0) throw ConfigError("crop geometry: non-positive source rect");
  if (geom.out_h <= 0 || geom.out_w <= 0) throw ConfigError("crop geometry: non-positive output size");
  if (r.x < 0 || r.y < 0 || r.x + r.w > src_w || r.y + r.h > src_h)
    throw ConfigError("crop geometry: source rect out of bounds");
}

BinaryMask union_mask(const std::vector<BinaryMask>& masks) {
  if (masks.empty()) return BinaryMask();
  BinaryMask out(masks[0].h, masks[0].w);
  for (const auto& m : masks) {
    if (m.h != out.h || m.w != out.w) throw ConfigError("union_mask: shape mismatch");
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] |= m.v[i];
  }
  return out;
}

BinaryMask object_conditioned_mask(const BinaryMask& m_union, const BinaryMask& m_k) {
  if (m_union.h != m_k.h || m_union.w != m_k.w)
    throw ConfigError("object_conditioned_mask: shape mismatch");
  BinaryMask out(m_union.h, m_union.w);
  for (size_t i = 0; i < out.v.size(); ++i) {
    if (m_k.v[i] && !m_union.v[i])
      throw ConfigError("object_conditioned_mask: m_k not contained in m_union");
    // min(1, (1 - union) + m_k); clamp keeps the result binary even when
    // instances overlap.
    out.v[i] = static_cast<uint8_t>(std::min(1, (1 - m_union.v[i]) + m_k.v[i]));
  }
  return out;
}

BinaryMask warp_mask(const BinaryMask& mask, const CropGeometry& geom) {
  validate_geometry(geom, mask.h, mask.w);
  BinaryMask out(geom.out_h, geom.out_w);
  for (int i = 0; i < geom.out_h; ++i) {
    int sy = geom.src.y + static_cast<int>(std::floor((i + 0.5) * geom.src.h / geom.out_h));
    sy = std::clamp(sy, geom.src.y, geom.src.y + geom.src.h - 1);
    for (int j = 0; j < geom.out_w; ++j) {
      int jj = geom.hflip ? geom.out_w - 1 - j : j;
      int sx = geom.src.x + static_cast<int>(std::floor((jj + 0.5) * geom.src.w / geom.out_w));
      sx = std::clamp(sx, geom.src.x, geom.src.x + geom.src.w - 1);
      out.at(i, j) = mask.at(sy, sx);
    }
  }
  return out;
}

double overlap_ratio(const CropGeometry& crop, const BinaryMask& m_union) {
  validate_geometry(crop, m_union.h, m_union.w);
  long fg = 0;
  for (int y = crop.src.y; y < crop.src.y + crop.src.h; ++y)
    for (int x = crop.src.x; x < crop.src.x + crop.src.w; ++x) fg += m_union.at(y, x);
  return static_cast<double>(fg) / static_cast<double>(crop.src.area());
}

Rect bbox_of_mask(const BinaryMask& mask) {
  int x0 = mask.w, y0 = mask.h, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x)
      if (mask.at(y, x)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) throw DataError("bbox_of_mask: empty mask");
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Rect pad_bbox(const Rect& r, double fraction, int bound_h, int bound_w) {
  int px = static_cast<int>(std::ceil(r.w * fraction));
  int py = static_cast<int>(std::ceil(r.h * fraction));
  int x0 = std::max(0, r.x - px);
  int y0 = std::max(0, r.y - py);
  int x1 = std::min(bound_w, r.x + r.w + px);
  int y1 = std::min(bound_h, r.y + r.h + py);
  return {x0, y0, x1 - x0, y1 - y0};
}

LocalCropSample sample_local_crop(const BinaryMask& m_union, const Rect& region,
                                  double area_lo, double area_hi, double alpha, Rng& rng,
                                  int max_retries) {
  if (region.w <= 0 || region.h <= 0) throw ConfigError("sample_local_crop: empty region");
  // Clip the sampling region to the mask grid.
  Rect reg = region;
  reg.x = std::clamp(reg.x, 0, m_union.w - 1);
  reg.y = std::clamp(reg.y, 0, m_union.h - 1);
  reg.w = std::min(reg.w, m_union.w - reg.x);
  reg.h = std::min(reg.h, m_union.h - reg.y);

  LocalCropSample best;
  best.overlap = -1.0;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    double frac = rng.uniform(area_lo, area_hi);
    double target = frac * reg.area();
    double aspect = std::exp(rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0)));
    int cw = std::clamp(static_cast<int>(std::lround(std::sqrt(target * aspect))), 1, reg.w);
    int ch = std::clamp(static_cast<int>(std::lround(std::sqrt(target / aspect))), 1, reg.h);
    int cx = reg.x + rng.uniform_int(0, reg.w - cw);
    int cy = reg.y + rng.uniform_int(0, reg.h - ch);
    CropGeometry g{{cx, cy, cw, ch}, ch, cw, false};
    double ov = overlap_ratio(g, m_union);
    if (ov >= alpha) return {g, ov, false};
    if (ov > best.overlap) best = {g, ov, false};
  }
  best.fallback = true;
  return best;
}

Image crop_image(const Image& img, const CropGeometry& geom) {
  validate_geometry(geom, img.h, img.w);
  Image out(geom.out_h, geom.out_w);
  const Rect& r = geom.src;
  for (int i = 0; i < geom.out_h; ++i) {
    double fy = r.y + (i + 0.5) * r.h / geom.out_h - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::min(y0 + 1, img.h - 1);
    y0 = std::clamp(y0, 0, img.h - 1);
    for (int j = 0; j < geom.out_w; ++j) {
      int jj = geom.hflip ? geom.out_w - 1 - j : j;
      double fx = r.x + (jj + 0.5) * r.w / geom.out_w - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x1 = std::min(x0 + 1, img.w - 1);
      x0 = std::clamp(x0, 0, img.w - 1);
      for (int c = 0; c < 3; ++c) {
        double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
                   wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
        out.at(i, j, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace vino
