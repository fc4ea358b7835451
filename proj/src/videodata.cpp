#include "vino/videodata.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace vino {

InstanceMask InstanceMask::from_grid(BinaryMask g, int track_id, double confidence) {
  InstanceMask m;
  m.area = g.area();
  m.grid = std::move(g);
  m.track_id = track_id;
  m.confidence = confidence;
  return m;
}

std::vector<InstanceMask> filter_masks(const std::vector<InstanceMask>& masks, long min_area,
                                       double min_confidence, int max_objects) {
  std::vector<InstanceMask> kept;
  for (const auto& m : masks)
    if (m.area >= min_area && m.confidence >= min_confidence) kept.push_back(m);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const InstanceMask& a, const InstanceMask& b) { return a.area > b.area; });
  if (static_cast<int>(kept.size()) > max_objects) kept.resize(static_cast<size_t>(max_objects));
  return kept;
}

Tube sample_tube(const Video& video, int T, int stride, Rng& rng,
                 const MaskFilterConfig& filter) {
  if (T < 1 || stride < 1) throw ConfigError("sample_tube: T and stride must be positive");
  long need = static_cast<long>(T - 1) * stride + 1;
  if (static_cast<long>(video.size()) < need)
    throw DataError("sample_tube: insufficient frames (" + std::to_string(video.size()) +
                    " < " + std::to_string(need) + ")");
  int max_start = static_cast<int>(video.size() - need);
  int start = max_start > 0 ? rng.uniform_int(0, max_start) : 0;

  Tube tube;
  tube.stride = stride;
  for (int t = 0; t < T; ++t) {
    int idx = start + t * stride;
    tube.frames.push_back({video.frames[static_cast<size_t>(idx)], idx});
    long min_area = 0;
    const Image& img = video.frames[static_cast<size_t>(idx)];
    min_area = static_cast<long>(std::ceil(filter.min_area_frac * img.h * img.w));
    std::vector<InstanceMask> anns;
    if (idx < static_cast<int>(video.annotations.size()))
      anns = filter_masks(video.annotations[static_cast<size_t>(idx)], min_area,
                          filter.min_confidence, filter.max_objects);
    tube.annotations.push_back(std::move(anns));
  }
  return tube;
}

// ---- synthetic co-occurrence scenes ----

namespace {

double hsv_to_rgb_channel(double h, int c) {
  // h in [0,1), s=v=1
  double k = std::fmod(5.0 - 2.0 * c + h * 6.0, 6.0);
  return 1.0 - std::max(0.0, std::min({k, 4.0 - k, 1.0}));
}

enum class SpriteShape { Square, Circle, Diamond };

struct Sprite {
  SpriteShape shape;
  int size;
  double r, g, b;
  double px, py;  // top-left corner, continuous
  double vx, vy;
};

bool sprite_covers(const Sprite& s, int y, int x) {
  double cx = s.px + (s.size - 1) / 2.0;
  double cy = s.py + (s.size - 1) / 2.0;
  double rad = s.size / 2.0;
  double dx = x - cx, dy = y - cy;
  switch (s.shape) {
    case SpriteShape::Square:
      return x >= std::lround(s.px) && x < std::lround(s.px) + s.size &&
             y >= std::lround(s.py) && y < std::lround(s.py) + s.size;
    case SpriteShape::Circle:
      return dx * dx + dy * dy <= rad * rad;
    case SpriteShape::Diamond:
      return std::abs(dx) + std::abs(dy) <= rad;
  }
  return false;
}

}  // namespace

Video generate_synthetic_video(const SyntheticSceneConfig& cfg) {
  if (cfg.frame_h <= 0 || cfg.frame_w <= 0 || cfg.num_frames <= 0 || cfg.background_block <= 0)
    throw ConfigError("synthetic config: non-positive extent");
  if (cfg.num_sprites < 0 || cfg.sprite_min_size <= 0 || cfg.sprite_max_size < cfg.sprite_min_size)
    throw ConfigError("synthetic config: bad sprite sizes");
  if (cfg.sprite_max_size > cfg.frame_h || cfg.sprite_max_size > cfg.frame_w)
    throw ConfigError("synthetic config: sprite larger than frame");

  Rng rng(derive_seed(cfg.seed, 0xA11CE));
  std::vector<Sprite> sprites;
  for (int i = 0; i < cfg.num_sprites; ++i) {
    Sprite s;
    s.shape = static_cast<SpriteShape>(rng.uniform_int(0, 2));
    s.size = rng.uniform_int(cfg.sprite_min_size, cfg.sprite_max_size);
    double hue = std::fmod(0.13 + i * 0.61803398875, 1.0);
    s.r = hsv_to_rgb_channel(hue, 0);
    s.g = hsv_to_rgb_channel(hue, 1);
    s.b = hsv_to_rgb_channel(hue, 2);
    s.px = rng.uniform(0.0, cfg.frame_w - s.size);
    s.py = rng.uniform(0.0, cfg.frame_h - s.size);
    double ang = rng.uniform(0.0, 6.283185307179586);
    s.vx = cfg.sprite_velocity * std::cos(ang);
    s.vy = cfg.sprite_velocity * std::sin(ang);
    sprites.push_back(s);
  }

  // Background: hash-indexed high-contrast blocks, translating with the
  // ego-motion velocity so the context is temporally predictable.
  auto bg_value = [&](int t, int y, int x) {
    long gx = static_cast<long>(std::floor((x + cfg.ego_velocity_x * t) / cfg.background_block));
    long gy = static_cast<long>(std::floor((y + cfg.ego_velocity_y * t) / cfg.background_block));
    uint64_t h = splitmix64(static_cast<uint64_t>(gx) * 0x9E3779B97F4A7C15ULL ^
                            splitmix64(static_cast<uint64_t>(gy) ^ splitmix64(cfg.seed)));
    double u = static_cast<double>(h >> 40) / static_cast<double>(1 << 24);
    return 0.5 + (u - 0.5) * cfg.background_density;
  };

  Video out;
  for (int t = 0; t < cfg.num_frames; ++t) {
    Image img(cfg.frame_h, cfg.frame_w);
    for (int y = 0; y < cfg.frame_h; ++y)
      for (int x = 0; x < cfg.frame_w; ++x) {
        float v = static_cast<float>(bg_value(t, y, x));
        img.at(y, x, 0) = v;
        img.at(y, x, 1) = v;
        img.at(y, x, 2) = v;
      }
    std::vector<InstanceMask> anns;
    for (size_t i = 0; i < sprites.size(); ++i) {
      const Sprite& s = sprites[i];
      BinaryMask grid(cfg.frame_h, cfg.frame_w);
      int x0 = std::max(0, static_cast<int>(std::floor(s.px)) - 1);
      int y0 = std::max(0, static_cast<int>(std::floor(s.py)) - 1);
      int x1 = std::min(cfg.frame_w, x0 + s.size + 3);
      int y1 = std::min(cfg.frame_h, y0 + s.size + 3);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          if (sprite_covers(s, y, x)) {
            grid.at(y, x) = 1;
            img.at(y, x, 0) = static_cast<float>(s.r);
            img.at(y, x, 1) = static_cast<float>(s.g);
            img.at(y, x, 2) = static_cast<float>(s.b);
          }
      anns.push_back(InstanceMask::from_grid(std::move(grid), static_cast<int>(i)));
    }
    out.frames.push_back(std::move(img));
    out.annotations.push_back(std::move(anns));

    // Advance sprites; bounce off frame edges so masks stay in bounds.
    for (Sprite& s : sprites) {
      s.px += s.vx;
      s.py += s.vy;
      if (s.px < 0) { s.px = -s.px; s.vx = -s.vx; }
      if (s.py < 0) { s.py = -s.py; s.vy = -s.vy; }
      double mx = cfg.frame_w - s.size, my = cfg.frame_h - s.size;
      if (s.px > mx) { s.px = 2 * mx - s.px; s.vx = -s.vx; }
      if (s.py > my) { s.py = 2 * my - s.py; s.vy = -s.vy; }
      s.px = std::clamp(s.px, 0.0, mx);
      s.py = std::clamp(s.py, 0.0, my);
    }
  }
  return out;
}

// ---- annotation container ----

namespace {

constexpr char kMagic[8] = {'V', 'I', 'N', 'O', 'M', 'S', 'K', '1'};

struct Reader {
  std::ifstream f;
  size_t offset = 0;
  explicit Reader(const std::string& path) : f(path, std::ios::binary) {
    if (!f) throw DataError("cannot open: " + path);
  }
  void read(void* dst, size_t n, const char* what) {
    f.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!f)
      throw DataError(std::string("annotation parse error: truncated ") + what +
                      " at byte offset " + std::to_string(offset));
    offset += n;
  }
  uint32_t u32(const char* what) {
    uint32_t v;
    read(&v, 4, what);
    return v;
  }
  float f32(const char* what) {
    float v;
    read(&v, 4, what);
    return v;
  }
};

void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void write_f32(std::ofstream& f, float v) { f.write(reinterpret_cast<const char*>(&v), 4); }

std::vector<uint32_t> rle_encode(const BinaryMask& m) {
  // Runs alternate starting with the count of leading zeros.
  std::vector<uint32_t> runs;
  uint8_t cur = 0;
  uint32_t len = 0;
  for (uint8_t b : m.v) {
    if (b == cur) {
      ++len;
    } else {
      runs.push_back(len);
      cur = b;
      len = 1;
    }
  }
  runs.push_back(len);
  return runs;
}

}  // namespace

void save_annotations(const std::string& path,
                      const std::vector<std::vector<InstanceMask>>& per_frame, int h, int w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for write: " + path);
  f.write(kMagic, 8);
  write_u32(f, static_cast<uint32_t>(per_frame.size()));
  write_u32(f, static_cast<uint32_t>(h));
  write_u32(f, static_cast<uint32_t>(w));
  for (const auto& frame : per_frame) {
    write_u32(f, static_cast<uint32_t>(frame.size()));
    for (const auto& inst : frame) {
      if (inst.grid.h != h || inst.grid.w != w)
        throw DataError("save_annotations: mask shape mismatch");
      write_u32(f, static_cast<uint32_t>(inst.track_id));
      write_f32(f, static_cast<float>(inst.confidence));
      auto runs = rle_encode(inst.grid);
      write_u32(f, static_cast<uint32_t>(runs.size()));
      for (uint32_t r : runs) write_u32(f, r);
    }
  }
  if (!f) throw DataError("write failed: " + path);
}

std::vector<std::vector<InstanceMask>> load_annotations(const std::string& path) {
  Reader rd(path);
  char magic[8];
  rd.read(magic, 8, "magic");
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("annotation parse error: bad magic at byte offset 0");
  uint32_t nframes = rd.u32("frame count");
  uint32_t h = rd.u32("height");
  uint32_t w = rd.u32("width");
  if (h == 0 || w == 0 || h > 1u << 16 || w > 1u << 16)
    throw DataError("annotation parse error: implausible dimensions at byte offset 12");
  size_t npx = static_cast<size_t>(h) * w;

  std::vector<std::vector<InstanceMask>> out;
  for (uint32_t t = 0; t < nframes; ++t) {
    uint32_t count = rd.u32("instance count");
    std::vector<InstanceMask> frame;
    for (uint32_t k = 0; k < count; ++k) {
      int track_id = static_cast<int>(rd.u32("track id"));
      double conf = rd.f32("confidence");
      size_t run_off = rd.offset;
      uint32_t nruns = rd.u32("run count");
      BinaryMask grid(static_cast<int>(h), static_cast<int>(w));
      size_t pos = 0;
      uint8_t val = 0;
      for (uint32_t r = 0; r < nruns; ++r) {
        uint32_t len = rd.u32("run");
        if (pos + len > npx)
          throw DataError("annotation parse error: RLE overruns grid at byte offset " +
                          std::to_string(rd.offset - 4));
        if (val) std::fill(grid.v.begin() + static_cast<long>(pos),
                           grid.v.begin() + static_cast<long>(pos + len), uint8_t{1});
        pos += len;
        val ^= 1;
      }
      if (pos != npx)
        throw DataError("annotation parse error: RLE covers " + std::to_string(pos) + "/" +
                        std::to_string(npx) + " pixels, record at byte offset " +
                        std::to_string(run_off));
      frame.push_back(InstanceMask::from_grid(std::move(grid), track_id, conf));
    }
    out.push_back(std::move(frame));
  }
  return out;
}

// ---- disk layout ----

static std::string frame_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.ppm", i);
  return buf;
}

void write_video_dir(const std::string& dir, const Video& video) {
  fs::create_directories(dir);
  for (size_t i = 0; i < video.frames.size(); ++i)
    write_ppm((fs::path(dir) / frame_name(i)).string(), video.frames[i]);
  int h = video.frames.empty() ? 0 : video.frames[0].h;
  int w = video.frames.empty() ? 0 : video.frames[0].w;
  save_annotations((fs::path(dir) / "annotations.vinomsk").string(), video.annotations, h, w);
}

Video load_video_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".ppm") names.push_back(e.path().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw DataError("no .ppm frames in " + dir);
  Video v;
  for (const auto& n : names) v.frames.push_back(read_ppm(n));
  auto ann_path = fs::path(dir) / "annotations.vinomsk";
  if (fs::exists(ann_path)) {
    v.annotations = load_annotations(ann_path.string());
    if (v.annotations.size() != v.frames.size())
      throw DataError("annotation/frame count mismatch in " + dir);
  } else {
    v.annotations.resize(v.frames.size());
  }
  return v;
}

}  // namespace vino
