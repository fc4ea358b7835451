#pragma once

#include <string>
#include <vector>

#include "vino/common.hpp"
#include "vino/image.hpp"
#include "vino/maskops.hpp"

namespace vino {

struct Frame {
  Image image;
  int index = 0;  // frame position within the source video
};

struct InstanceMask {
  BinaryMask grid;
  int track_id = 0;     // stable within a tube
  double confidence = 1.0;
  long area = 0;        // number of 1s in grid

  static InstanceMask from_grid(BinaryMask g, int track_id, double confidence = 1.0);
};

// T temporally ordered frames with per-frame instance masks.
struct Tube {
  std::vector<Frame> frames;
  std::vector<std::vector<InstanceMask>> annotations;  // per frame, <= M after filtering
  int stride = 1;
};

struct MaskFilterConfig {
  double min_area_frac = 0.001;  // fraction of frame pixels
  double min_confidence = 0.5;
  int max_objects = 10;  // M
};

struct SyntheticSceneConfig {
  int num_sprites = 3;
  int sprite_min_size = 10;
  int sprite_max_size = 18;
  int frame_h = 64;
  int frame_w = 64;
  double background_density = 0.5;   // texture contrast/business knob, in (0,1]
  int background_block = 4;          // texture block size in px
  double ego_velocity_x = 3.0;       // background translation, px/frame
  double ego_velocity_y = 0.0;
  double sprite_velocity = 1.0;      // px/frame, direction random per sprite
  int num_frames = 100;
  uint64_t seed = 0;
};

// In-memory video: image sequence plus per-frame instance masks.
struct Video {
  std::vector<Image> frames;
  std::vector<std::vector<InstanceMask>> annotations;

  size_t size() const { return frames.size(); }
};

Tube sample_tube(const Video& video, int T, int stride, Rng& rng,
                 const MaskFilterConfig& filter = {});

std::vector<InstanceMask> filter_masks(const std::vector<InstanceMask>& masks,
                                       long min_area, double min_confidence, int max_objects);

Video generate_synthetic_video(const SyntheticSceneConfig& config);

// Mask annotation container, magic "VINOMSK1": header {frame count, H, W},
// per frame {instance count, per instance {track_id, confidence, RLE grid}}.
void save_annotations(const std::string& path,
                      const std::vector<std::vector<InstanceMask>>& per_frame, int h, int w);
std::vector<std::vector<InstanceMask>> load_annotations(const std::string& path);

// Disk layout for one video: frame_%05d.ppm + annotations.vinomsk.
void write_video_dir(const std::string& dir, const Video& video);
Video load_video_dir(const std::string& dir);

}  // namespace vino
