#include "vino/viewgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace vino {

CropGeometry make_precrop(const std::vector<std::vector<InstanceMask>>& annotations,
                          int frame_h, int frame_w, double min_frac) {
  bool any = false;
  int x0 = frame_w, y0 = frame_h, x1 = 0, y1 = 0;
  for (const auto& frame : annotations)
    for (const auto& inst : frame) {
      if (inst.grid.empty_mask()) continue;
      Rect b = bbox_of_mask(inst.grid);
      x0 = std::min(x0, b.x);
      y0 = std::min(y0, b.y);
      x1 = std::max(x1, b.x + b.w);
      y1 = std::max(y1, b.y + b.h);
      any = true;
    }
  if (!any) return CropGeometry::identity(frame_h, frame_w);

  Rect r{x0, y0, x1 - x0, y1 - y0};
  double target = min_frac * frame_h * frame_w;
  if (r.area() < target) {
    double s = std::sqrt(target / r.area());
    int nw = std::min(frame_w, static_cast<int>(std::ceil(r.w * s)));
    int nh = std::min(frame_h, static_cast<int>(std::ceil(r.h * s)));
    // If one dimension clipped at the frame edge, grow the other to reach
    // the target area.
    if (static_cast<double>(nw) * nh < target) {
      nw = std::min(frame_w, static_cast<int>(std::ceil(target / nh)));
      nh = std::min(frame_h, static_cast<int>(std::ceil(target / nw)));
    }
    int cx = r.x + r.w / 2, cy = r.y + r.h / 2;
    int nx = std::clamp(cx - nw / 2, 0, frame_w - nw);
    int ny = std::clamp(cy - nh / 2, 0, frame_h - nh);
    // Keep the original bbox inside.
    nx = std::min(nx, x0);
    ny = std::min(ny, y0);
    nx = std::max(nx, x1 - nw);
    ny = std::max(ny, y1 - nh);
    nx = std::clamp(nx, 0, frame_w - nw);
    ny = std::clamp(ny, 0, frame_h - nh);
    r = {nx, ny, nw, nh};
  }
  return {r, r.h, r.w, false};
}

namespace {

void gaussian_blur_inplace(Image& img, double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
  std::vector<float> k(static_cast<size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);

  Image tmp(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<size_t>(i + radius)] * img.at(y, std::clamp(x + i, 0, img.w - 1), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<size_t>(i + radius)] * tmp.at(std::clamp(y + i, 0, img.h - 1), x, c);
        img.at(y, x, c) = acc;
      }
}

}  // namespace

Image photometric_augment(const Image& image, const PhotometricConfig& cfg, Rng& rng,
                          int out_h, int out_w) {
  Image img = image;
  if (rng.bernoulli(cfg.jitter_prob) && cfg.jitter_strength > 0) {
    double s = cfg.jitter_strength;
    double fb = rng.uniform(1 - s, 1 + s);
    double fc = rng.uniform(1 - s, 1 + s);
    double fs = rng.uniform(1 - s, 1 + s);
    double mean_gray = 0;
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        mean_gray += 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
    mean_gray /= std::max(1, img.h * img.w);
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        double gray = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
        for (int c = 0; c < 3; ++c) {
          double v = img.at(y, x, c);
          v = gray + (v - gray) * fs;                 // saturation
          v = mean_gray + (v - mean_gray) * fc;       // contrast
          v *= fb;                                    // brightness
          img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
  }
  if (rng.bernoulli(cfg.blur_prob)) {
    double sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
    if (sigma > 1e-6) gaussian_blur_inplace(img, sigma);
  }
  if (rng.bernoulli(cfg.solarize_prob)) {
    for (auto& v : img.px)
      if (v >= cfg.solarize_threshold) v = 1.f - v;
  }
  if (out_h > 0 && out_w > 0) img = resize_bilinear(img, out_h, out_w);
  return img;
}

namespace {

Image apply_mask(const Image& img, const BinaryMask& m, float fill) {
  if (m.h != img.h || m.w != img.w) throw ConfigError("apply_mask: shape mismatch");
  Image out = img;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      if (!m.at(y, x))
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = fill;
  return out;
}

}  // namespace

Image build_teacher_view(const Image& frame, const CropGeometry& geom,
                         const BinaryMask& union_warped, const PhotometricConfig& photo,
                         Rng& rng, float fill) {
  Image base = crop_image(frame, geom);
  Image aug = photometric_augment(base, photo, rng);
  return apply_mask(aug, union_warped, fill);
}

std::vector<Image> build_student_masked_views(const Image& frame, const CropGeometry& geom,
                                              const std::vector<BinaryMask>& masks_warped,
                                              const PhotometricConfig& photo, Rng& rng,
                                              float fill) {
  std::vector<Image> out;
  if (masks_warped.empty()) return out;
  Image base = crop_image(frame, geom);
  BinaryMask m_union = union_mask(masks_warped);
  for (const auto& mk : masks_warped) {
    BinaryMask cond = object_conditioned_mask(m_union, mk);
    Image aug = photometric_augment(base, photo, rng);  // independent draw per view
    out.push_back(apply_mask(aug, cond, fill));
  }
  return out;
}

std::vector<LocalView> build_local_views(const Image& frame, const CropGeometry& geom,
                                         const std::vector<BinaryMask>& masks_warped, int R,
                                         const ViewConfig& cfg, Rng& rng, int t) {
  std::vector<LocalView> out;
  if (R <= 0) return out;
  Image base = crop_image(frame, geom);
  if (!masks_warped.empty()) {
    BinaryMask m_union = union_mask(masks_warped);
    for (int r = 0; r < R; ++r) {
      const BinaryMask& mk = masks_warped[static_cast<size_t>(r) % masks_warped.size()];
      Rect padded = pad_bbox(bbox_of_mask(mk), cfg.bbox_pad, base.h, base.w);
      LocalCropSample s = sample_local_crop(m_union, padded, cfg.local_area_lo,
                                            cfg.local_area_hi, cfg.local_alpha, rng);
      CropGeometry g = s.geom;
      g.out_h = cfg.local_size;
      g.out_w = cfg.local_size;
      g.hflip = rng.bernoulli(cfg.hflip_prob);
      Image crop = crop_image(base, g);
      out.push_back({t, r, photometric_augment(crop, cfg.photo, rng), s.fallback});
    }
  } else {
    // No foreground: standard whole-image small crops.
    for (int r = 0; r < R; ++r) {
      double frac = rng.uniform(cfg.whole_local_scale_lo, cfg.whole_local_scale_hi);
      double target = frac * base.h * base.w;
      double aspect = std::exp(rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0)));
      int cw = std::clamp(static_cast<int>(std::lround(std::sqrt(target * aspect))), 1, base.w);
      int ch = std::clamp(static_cast<int>(std::lround(std::sqrt(target / aspect))), 1, base.h);
      CropGeometry g{{rng.uniform_int(0, base.w - cw), rng.uniform_int(0, base.h - ch), cw, ch},
                     cfg.local_size, cfg.local_size, rng.bernoulli(cfg.hflip_prob)};
      Image crop = crop_image(base, g);
      out.push_back({t, r, photometric_augment(crop, cfg.photo, rng), false});
    }
  }
  return out;
}

namespace {

// Random-resized-crop inside the pre-crop window, shared across the tube.
CropGeometry sample_global_crop(const CropGeometry& precrop, const ViewConfig& cfg, Rng& rng) {
  const Rect& pr = precrop.src;
  for (int attempt = 0; attempt < 10; ++attempt) {
    double frac = rng.uniform(cfg.global_scale_lo, cfg.global_scale_hi);
    double target = frac * pr.area();
    double aspect = std::exp(rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0)));
    int cw = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    int ch = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (cw < 1 || ch < 1 || cw > pr.w || ch > pr.h) continue;
    int cx = pr.x + rng.uniform_int(0, pr.w - cw);
    int cy = pr.y + rng.uniform_int(0, pr.h - ch);
    return {{cx, cy, cw, ch}, cfg.global_size, cfg.global_size, rng.bernoulli(cfg.hflip_prob)};
  }
  return {pr, cfg.global_size, cfg.global_size, rng.bernoulli(cfg.hflip_prob)};
}

}  // namespace

ViewBatch build_tube_views(const Tube& tube, const ViewConfig& cfg, Rng& rng) {
  if (tube.frames.empty()) throw DataError("build_tube_views: empty tube");
  const int fh = tube.frames[0].image.h, fw = tube.frames[0].image.w;

  ViewBatch batch;
  CropGeometry precrop = make_precrop(tube.annotations, fh, fw, cfg.precrop_min_frac);
  for (int g = 0; g < cfg.globals_per_frame; ++g)
    batch.globals.push_back(sample_global_crop(precrop, cfg, rng));

  const int T = static_cast<int>(tube.frames.size());
  for (int t = 0; t < T; ++t) {
    const Image& frame = tube.frames[static_cast<size_t>(t)].image;
    const auto& anns = tube.annotations[static_cast<size_t>(t)];

    // Warp masks into the first-global coordinate system, dropping the
    // ones the crop removed entirely.
    std::vector<BinaryMask> warped;
    std::vector<int> ids;
    for (const auto& inst : anns) {
      BinaryMask m = warp_mask(inst.grid, batch.globals[0]);
      if (m.empty_mask()) continue;
      warped.push_back(std::move(m));
      ids.push_back(inst.track_id);
    }
    BinaryMask m_union = warped.empty() ? BinaryMask(cfg.global_size, cfg.global_size)
                                        : union_mask(warped);

    std::vector<Image> teacher_t;
    if (!warped.empty()) {
      for (int g = 0; g < cfg.globals_per_frame; ++g) {
        // Per-geometry union so every global stays mask-aligned.
        std::vector<BinaryMask> wg;
        for (const auto& inst : anns) {
          BinaryMask m = warp_mask(inst.grid, batch.globals[static_cast<size_t>(g)]);
          if (!m.empty_mask()) wg.push_back(std::move(m));
        }
        BinaryMask ug = wg.empty() ? BinaryMask(cfg.global_size, cfg.global_size) : union_mask(wg);
        teacher_t.push_back(build_teacher_view(frame, batch.globals[static_cast<size_t>(g)], ug,
                                               cfg.photo, rng, cfg.fill_value));
      }
      auto views = build_student_masked_views(frame, batch.globals[0], warped, cfg.photo, rng,
                                              cfg.fill_value);
      for (size_t k = 0; k < views.size(); ++k)
        batch.student_masked_views.push_back(
            {t, static_cast<int>(k), ids[k], std::move(views[k])});
      batch.teacher_full_views.emplace_back();
    } else {
      // K_t = 0: teacher falls back to the unsuppressed view (local loss only).
      batch.teacher_full_views.push_back(photometric_augment(
          crop_image(frame, batch.globals[0]), cfg.photo, rng));
    }

    auto locals = build_local_views(frame, batch.globals[0], warped, cfg.locals_per_frame, cfg,
                                    rng, t);
    for (auto& lv : locals) batch.local_views.push_back(std::move(lv));

    batch.teacher_views.push_back(std::move(teacher_t));
    batch.track_ids.push_back(std::move(ids));
    batch.union_masks.push_back(std::move(m_union));
    batch.object_masks.push_back(std::move(warped));
  }
  return batch;
}

void dump_views(const std::string& dir, const ViewBatch& batch) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  int n = 0;
  auto emit = [&](const Image& img, const std::string& family, int t, int kr, bool flag) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%04d.ppm", n++);
    write_ppm((fs::path(dir) / name).string(), img);
    manifest << name << " family=" << family << " t=" << t << " idx=" << kr
             << (flag ? " fallback=1" : "") << "\n";
  };
  for (size_t t = 0; t < batch.teacher_views.size(); ++t)
    for (size_t g = 0; g < batch.teacher_views[t].size(); ++g)
      emit(batch.teacher_views[t][g], "teacher", static_cast<int>(t), static_cast<int>(g), false);
  for (const auto& sv : batch.student_masked_views) emit(sv.image, "student", sv.t, sv.k, false);
  for (const auto& lv : batch.local_views) emit(lv.image, "local", lv.t, lv.r, lv.overlap_fallback);
  for (size_t g = 0; g < batch.globals.size(); ++g) {
    const auto& cg = batch.globals[g];
    manifest << "geometry idx=" << g << " src=" << cg.src.x << "," << cg.src.y << ","
             << cg.src.w << "," << cg.src.h << " out=" << cg.out_h << "x" << cg.out_w
             << " hflip=" << cg.hflip << "\n";
  }
}

}  // namespace vino
