#pragma once

#include <vector>

#include "vino/common.hpp"
#include "vino/image.hpp"
#include "vino/maskops.hpp"
#include "vino/videodata.hpp"

namespace vino {

struct PhotometricConfig {
  double jitter_prob = 0.8;
  double jitter_strength = 0.4;  // brightness/contrast/saturation factor range
  double blur_prob = 0.5;
  double blur_sigma_lo = 0.1;
  double blur_sigma_hi = 1.0;
  double solarize_prob = 0.0;
  double solarize_threshold = 0.5;
};

struct ViewConfig {
  int global_size = 64;
  int local_size = 32;
  int locals_per_frame = 4;  // R
  int globals_per_frame = 1;
  double global_scale_lo = 0.4, global_scale_hi = 1.0;
  double hflip_prob = 0.5;
  double local_area_lo = 0.4, local_area_hi = 0.7;  // relative to padded object bbox
  double local_alpha = 0.3;                         // overlap threshold
  double bbox_pad = 0.1;
  double precrop_min_frac = 0.5;
  double whole_local_scale_lo = 0.05, whole_local_scale_hi = 0.3;  // no-object fallback crops
  float fill_value = 0.5f;  // per-channel normalization mean
  PhotometricConfig photo;
};

struct StudentView {
  int t = 0, k = 0;
  int track_id = 0;
  Image image;
};

struct LocalView {
  int t = 0, r = 0;
  Image image;
  bool overlap_fallback = false;  // overlap constraint not met, best-so-far crop used
};

struct ViewBatch {
  // teacher_views[t] holds globals_per_frame suppressed views, empty when K_t == 0.
  std::vector<std::vector<Image>> teacher_views;
  // Unsuppressed view for frames with K_t == 0 (local-loss teacher target).
  std::vector<Image> teacher_full_views;  // valid only where teacher_views[t].empty()
  std::vector<StudentView> student_masked_views;
  std::vector<LocalView> local_views;
  std::vector<std::vector<int>> track_ids;           // per t, per k
  std::vector<CropGeometry> globals;                 // per global, shared across frames
  std::vector<BinaryMask> union_masks;               // per t, first-global coords
  std::vector<std::vector<BinaryMask>> object_masks; // per t, warped kept masks

  int frames() const { return static_cast<int>(teacher_views.size()); }
  int objects_at(int t) const { return static_cast<int>(track_ids[static_cast<size_t>(t)].size()); }
};

// Smallest rect covering every mask bbox across the tube, expanded to the
// configured minimum frame-area fraction; whole frame when no masks exist.
CropGeometry make_precrop(const std::vector<std::vector<InstanceMask>>& annotations,
                          int frame_h, int frame_w, double min_frac);

// Color jitter / blur / solarization, then optional resize.
Image photometric_augment(const Image& image, const PhotometricConfig& config, Rng& rng,
                          int out_h = -1, int out_w = -1);

Image build_teacher_view(const Image& frame, const CropGeometry& geom,
                         const BinaryMask& union_warped, const PhotometricConfig& photo,
                         Rng& rng, float fill);

std::vector<Image> build_student_masked_views(const Image& frame, const CropGeometry& geom,
                                              const std::vector<BinaryMask>& masks_warped,
                                              const PhotometricConfig& photo, Rng& rng,
                                              float fill);

std::vector<LocalView> build_local_views(const Image& frame, const CropGeometry& geom,
                                         const std::vector<BinaryMask>& masks_warped, int R,
                                         const ViewConfig& cfg, Rng& rng, int t);

ViewBatch build_tube_views(const Tube& tube, const ViewConfig& cfg, Rng& rng);

// Debug dump: numbered lossless images plus a one-line-per-view manifest.
void dump_views(const std::string& dir, const ViewBatch& batch);

}  // namespace vino
