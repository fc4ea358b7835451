#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vino/videodata.hpp"

using namespace vino;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::pair<double, double> centroid(const BinaryMask& m) {
  double cy = 0, cx = 0;
  long n = 0;
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      if (m.at(y, x)) {
        cy += y;
        cx += x;
        ++n;
      }
  return {cy / n, cx / n};
}

}  // namespace

TEST_CASE("sample_tube index arithmetic") {
  SyntheticSceneConfig sc;
  sc.num_frames = 31;
  sc.num_sprites = 1;
  Video v = generate_synthetic_video(sc);

  Rng rng(1);
  // length 31, T=4, stride=10: only start 0 is valid
  for (int i = 0; i < 20; ++i) {
    Tube t = sample_tube(v, 4, 10, rng);
    REQUIRE(t.frames.size() == 4);
    CHECK(t.frames[0].index == 0);
    CHECK(t.frames[1].index == 10);
    CHECK(t.frames[2].index == 20);
    CHECK(t.frames[3].index == 30);
  }
  // degenerate single-frame tube
  Tube one = sample_tube(v, 1, 10, rng);
  CHECK(one.frames.size() == 1);
  // too short
  CHECK_THROWS_WITH_AS(sample_tube(v, 5, 10, rng),
                       doctest::Contains("insufficient frames"), DataError);
}

TEST_CASE("filter_masks thresholds and cap") {
  auto make = [](int side, double conf, int id) {
    BinaryMask g(20, 20);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) g.at(y, x) = 1;
    return InstanceMask::from_grid(g, id, conf);
  };

  // 12 passing masks, M=10 -> the 10 largest survive
  std::vector<InstanceMask> many;
  for (int i = 0; i < 12; ++i) many.push_back(make(3 + i, 0.9, i));
  auto kept = filter_masks(many, 1, 0.5, 10);
  REQUIRE(kept.size() == 10);
  CHECK(kept.front().area >= kept.back().area);
  for (auto& m : kept) CHECK(m.track_id >= 2);  // two smallest dropped

  CHECK(filter_masks({}, 1, 0.5, 10).empty());

  auto conf = filter_masks({make(5, 0.9, 0), make(5, 0.1, 1)}, 1, 0.5, 10);
  REQUIRE(conf.size() == 1);
  CHECK(conf[0].track_id == 0);
}

TEST_CASE("synthetic generation determinism and ground truth") {
  SyntheticSceneConfig sc;
  sc.num_frames = 12;
  sc.seed = 42;
  Video a = generate_synthetic_video(sc);
  Video b = generate_synthetic_video(sc);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a.frames[i].px == b.frames[i].px);
    REQUIRE(a.annotations[i].size() == b.annotations[i].size());
    for (size_t k = 0; k < a.annotations[i].size(); ++k)
      CHECK(a.annotations[i][k].grid == b.annotations[i][k].grid);
  }

  // masks within bounds, area consistent, stable track ids
  for (auto& frame : a.annotations)
    for (auto& inst : frame) {
      CHECK(inst.grid.h == sc.frame_h);
      CHECK(inst.grid.w == sc.frame_w);
      CHECK(inst.area == inst.grid.area());
      CHECK(inst.track_id >= 0);
    }
}

TEST_CASE("synthetic sprite motion is honored") {
  SyntheticSceneConfig sc;
  sc.num_sprites = 0;
  sc.num_frames = 5;
  Video none = generate_synthetic_video(sc);
  for (auto& f : none.annotations) CHECK(f.empty());

  // static sprite: identical mask each frame, same id
  SyntheticSceneConfig st;
  st.num_sprites = 1;
  st.sprite_velocity = 0.0;
  st.ego_velocity_x = 0.0;
  st.num_frames = 6;
  st.seed = 3;
  Video v = generate_synthetic_video(st);
  for (size_t t = 1; t < v.size(); ++t) {
    REQUIRE(v.annotations[t].size() == 1);
    CHECK(v.annotations[t][0].grid == v.annotations[0][0].grid);
    CHECK(v.annotations[t][0].track_id == v.annotations[0][0].track_id);
  }

  // moving sprite: centroid displacement per frame equals the configured speed
  SyntheticSceneConfig mv = st;
  mv.sprite_velocity = 2.0;
  mv.sprite_min_size = mv.sprite_max_size = 10;
  mv.seed = 5;
  Video mvid = generate_synthetic_video(mv);
  auto [cy0, cx0] = centroid(mvid.annotations[0][0].grid);
  auto [cy1, cx1] = centroid(mvid.annotations[1][0].grid);
  double step = std::hypot(cy1 - cy0, cx1 - cx0);
  CHECK(step == doctest::Approx(2.0).epsilon(0.3));
}

TEST_CASE("sprite larger than frame rejected") {
  SyntheticSceneConfig sc;
  sc.sprite_min_size = sc.sprite_max_size = 100;
  sc.frame_h = sc.frame_w = 64;
  CHECK_THROWS_AS(generate_synthetic_video(sc), ConfigError);
}

TEST_CASE("annotation round trip") {
  Rng rng(99);
  std::vector<std::vector<InstanceMask>> frames(4);
  for (auto& f : frames) {
    int k = rng.uniform_int(0, 3);
    for (int i = 0; i < k; ++i) {
      BinaryMask g(9, 7);
      for (auto& v : g.v) v = rng.bernoulli(0.35) ? 1 : 0;
      f.push_back(InstanceMask::from_grid(g, rng.uniform_int(0, 50),
                                          rng.uniform(0.0, 1.0)));
    }
  }
  std::string path = temp_path("vino_test_roundtrip.vinomsk");
  save_annotations(path, frames, 9, 7);
  auto back = load_annotations(path);
  REQUIRE(back.size() == frames.size());
  for (size_t t = 0; t < frames.size(); ++t) {
    REQUIRE(back[t].size() == frames[t].size());
    for (size_t k = 0; k < frames[t].size(); ++k) {
      CHECK(back[t][k].grid == frames[t][k].grid);
      CHECK(back[t][k].track_id == frames[t][k].track_id);
      CHECK(back[t][k].confidence ==
            doctest::Approx(frames[t][k].confidence).epsilon(1e-6));
    }
  }
  fs::remove(path);
}

TEST_CASE("hand-written RLE decodes to the expected grid") {
  // 2x2 grid [[1,0],[0,1]] flattens to [1,0,0,1]; runs alternate starting
  // with zeros: {0, 1, 2, 1}.
  std::string path = temp_path("vino_test_handrle.vinomsk");
  std::ofstream f(path, std::ios::binary);
  f.write("VINOMSK1", 8);
  uint32_t frames = 1, h = 2, w = 2;
  f.write(reinterpret_cast<char*>(&frames), 4);
  f.write(reinterpret_cast<char*>(&h), 4);
  f.write(reinterpret_cast<char*>(&w), 4);
  uint32_t count = 1;
  f.write(reinterpret_cast<char*>(&count), 4);
  uint32_t track = 7;
  float conf = 0.75f;
  f.write(reinterpret_cast<char*>(&track), 4);
  f.write(reinterpret_cast<char*>(&conf), 4);
  uint32_t nruns = 4;
  f.write(reinterpret_cast<char*>(&nruns), 4);
  uint32_t runs[4] = {0, 1, 2, 1};
  f.write(reinterpret_cast<char*>(runs), 16);
  f.close();

  auto anns = load_annotations(path);
  REQUIRE(anns.size() == 1);
  REQUIRE(anns[0].size() == 1);
  const BinaryMask& g = anns[0][0].grid;
  CHECK(g.at(0, 0) == 1);
  CHECK(g.at(0, 1) == 0);
  CHECK(g.at(1, 0) == 0);
  CHECK(g.at(1, 1) == 1);
  CHECK(anns[0][0].track_id == 7);
  fs::remove(path);
}

TEST_CASE("malformed annotation files raise parse errors with offsets") {
  std::string path = temp_path("vino_test_bad.vinomsk");
  {
    std::ofstream f(path, std::ios::binary);
    f.write("NOTMAGIC", 8);
  }
  CHECK_THROWS_AS(load_annotations(path), DataError);
  {
    // valid magic but truncated header
    std::ofstream f(path, std::ios::binary);
    f.write("VINOMSK1", 8);
    uint32_t frames = 1;
    f.write(reinterpret_cast<char*>(&frames), 4);
  }
  try {
    load_annotations(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("video directory round trip") {
  SyntheticSceneConfig sc;
  sc.num_frames = 3;
  sc.seed = 8;
  Video v = generate_synthetic_video(sc);
  std::string dir = temp_path("vino_test_videodir");
  write_video_dir(dir, v);
  Video back = load_video_dir(dir);
  REQUIRE(back.size() == v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    // PPM is 8-bit: allow quantization error
    REQUIRE(back.frames[i].px.size() == v.frames[i].px.size());
    for (size_t j = 0; j < v.frames[i].px.size(); ++j)
      CHECK(std::abs(back.frames[i].px[j] - v.frames[i].px[j]) <= 0.5f / 255.f + 1e-6f);
    REQUIRE(back.annotations[i].size() == v.annotations[i].size());
    for (size_t k = 0; k < v.annotations[i].size(); ++k)
      CHECK(back.annotations[i][k].grid == v.annotations[i][k].grid);
  }
  fs::remove_all(dir);
}
