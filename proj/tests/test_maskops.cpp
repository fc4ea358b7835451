#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "vino/maskops.hpp"

using namespace vino;

namespace {

BinaryMask from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  BinaryMask m(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()));
  int y = 0;
  for (auto& row : rows) {
    int x = 0;
    for (int v : row) m.at(y, x++) = static_cast<uint8_t>(v);
    ++y;
  }
  return m;
}

BinaryMask random_mask(int h, int w, double p, Rng& rng) {
  BinaryMask m(h, w);
  for (auto& v : m.v) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("union_mask basics") {
  CHECK(union_mask({}).area() == 0);
  BinaryMask a = from_rows({{1, 0}, {0, 0}});
  BinaryMask b = from_rows({{0, 0}, {0, 1}});
  CHECK(union_mask({a, b}) == from_rows({{1, 0}, {0, 1}}));

  // OR is order-independent
  Rng rng(3);
  BinaryMask x = random_mask(6, 6, 0.3, rng);
  BinaryMask y = random_mask(6, 6, 0.3, rng);
  BinaryMask z = random_mask(6, 6, 0.3, rng);
  CHECK(union_mask({x, y, z}) == union_mask({z, x, y}));

  CHECK_THROWS_AS(union_mask({BinaryMask(2, 2), BinaryMask(3, 2)}), ConfigError);
}

TEST_CASE("object_conditioned_mask formula") {
  // single object: (1-m)+m = 1 everywhere
  BinaryMask m = from_rows({{1, 1}, {0, 0}});
  BinaryMask cond = object_conditioned_mask(m, m);
  CHECK(cond.area() == 4);

  // 1x3 example: m1=[1,0,0], union=[1,1,0] -> [1,0,1]
  BinaryMask m1 = from_rows({{1, 0, 0}});
  BinaryMask u = from_rows({{1, 1, 0}});
  CHECK(object_conditioned_mask(u, m1) == from_rows({{1, 0, 1}}));

  // no objects at all -> all ones
  BinaryMask zero(2, 3);
  CHECK(object_conditioned_mask(zero, zero).area() == 6);

  // containment precondition
  CHECK_THROWS_AS(object_conditioned_mask(m1, u), ConfigError);
}

TEST_CASE("object_conditioned_mask suppression properties") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    int h = rng.uniform_int(4, 12), w = rng.uniform_int(4, 12);
    // two disjoint instances
    BinaryMask a(h, w), b(h, w);
    for (int i = 0; i < h * w; ++i) {
      int r = rng.uniform_int(0, 3);
      if (r == 0) a.v[static_cast<size_t>(i)] = 1;
      if (r == 1) b.v[static_cast<size_t>(i)] = 1;
    }
    BinaryMask u = union_mask({a, b});
    BinaryMask ca = object_conditioned_mask(u, a);
    for (int i = 0; i < h * w; ++i) {
      size_t s = static_cast<size_t>(i);
      CHECK((ca.v[s] & b.v[s]) == 0);             // competitor suppressed
      CHECK(ca.v[s] >= 1 - u.v[s]);               // background kept
      CHECK(ca.v[s] >= a.v[s]);                   // own object kept
      CHECK((ca.v[s] | u.v[s]) == 1);             // cond OR union = ones
    }
  }
}

TEST_CASE("warp_mask identity, flip involution, nearest mapping") {
  Rng rng(5);
  BinaryMask m = random_mask(8, 10, 0.4, rng);
  CHECK(warp_mask(m, CropGeometry::identity(8, 10)) == m);

  CropGeometry flip{{0, 0, 10, 8}, 8, 10, true};
  CHECK(warp_mask(warp_mask(m, flip), flip) == m);

  // 4x4 with single 1 at (0,0), crop left half, no resize
  BinaryMask s(4, 4);
  s.at(0, 0) = 1;
  CropGeometry left{{0, 0, 2, 4}, 4, 2, false};
  BinaryMask out = warp_mask(s, left);
  CHECK(out.at(0, 0) == 1);
  CHECK(out.area() == 1);
}

TEST_CASE("warp commutes with union") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    int h = rng.uniform_int(6, 16), w = rng.uniform_int(6, 16);
    std::vector<BinaryMask> masks;
    for (int k = 0; k < 3; ++k) masks.push_back(random_mask(h, w, 0.3, rng));
    int cw = rng.uniform_int(2, w), ch = rng.uniform_int(2, h);
    CropGeometry g{{rng.uniform_int(0, w - cw), rng.uniform_int(0, h - ch), cw, ch},
                   rng.uniform_int(2, 12), rng.uniform_int(2, 12), rng.bernoulli(0.5)};
    std::vector<BinaryMask> warped;
    for (auto& m : masks) warped.push_back(warp_mask(m, g));
    CHECK(warp_mask(union_mask(masks), g) == union_mask(warped));
  }
}

TEST_CASE("overlap_ratio counts pixels") {
  BinaryMask m(4, 4);
  for (int y = 0; y < 4; ++y) m.at(y, 0) = m.at(y, 1) = 1;  // left half fg

  CHECK(overlap_ratio({{0, 0, 2, 4}, 2, 2, false}, m) == doctest::Approx(1.0));
  CHECK(overlap_ratio({{2, 0, 2, 4}, 2, 2, false}, m) == doctest::Approx(0.0));
  // 2x2 crop straddling the boundary: two fg pixels of four
  CHECK(overlap_ratio({{1, 0, 2, 2}, 2, 2, false}, m) == doctest::Approx(0.5));
  CHECK_THROWS_AS(overlap_ratio({{0, 0, 0, 0}, 1, 1, false}, m), ConfigError);
}

TEST_CASE("overlap_ratio invariant under shared translation") {
  // moving both the crop rect and the mask content together preserves the ratio
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask m(12, 12);
    for (int y = 2; y < 6; ++y)
      for (int x = 3; x < 8; ++x) m.at(y, x) = 1;
    BinaryMask shifted(12, 12);
    int dy = rng.uniform_int(0, 4), dx = rng.uniform_int(0, 4);
    for (int y = 2; y < 6; ++y)
      for (int x = 3; x < 8; ++x) shifted.at(y + dy, x + dx) = 1;
    CropGeometry c{{2, 1, 6, 6}, 3, 3, false};
    CropGeometry cs{{2 + dx, 1 + dy, 6, 6}, 3, 3, false};
    CHECK(overlap_ratio(c, m) == doctest::Approx(overlap_ratio(cs, shifted)));
  }
}

TEST_CASE("bbox_of_mask and pad_bbox") {
  BinaryMask m(8, 8);
  m.at(3, 5) = 1;
  CHECK(bbox_of_mask(m) == Rect{5, 3, 1, 1});
  CHECK_THROWS_AS(bbox_of_mask(BinaryMask(4, 4)), DataError);

  CHECK(pad_bbox({0, 0, 10, 10}, 0.1, 100, 100) == Rect{0, 0, 11, 11});
  CHECK(pad_bbox({20, 20, 10, 10}, 0.0, 100, 100) == Rect{20, 20, 10, 10});
  CHECK(pad_bbox({20, 20, 10, 10}, 0.1, 100, 100) == Rect{19, 19, 12, 12});
}

TEST_CASE("sample_local_crop respects overlap or flags fallback") {
  // sprite occupying the center of its padded bbox
  BinaryMask m(32, 32);
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x) m.at(y, x) = 1;
  Rect region = pad_bbox(bbox_of_mask(m), 0.1, 32, 32);
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    LocalCropSample s = sample_local_crop(m, region, 0.4, 0.7, 0.6, rng);
    if (!s.fallback) CHECK(overlap_ratio(s.geom, m) >= 0.6);
    // area stays near the requested fraction of the sampling region
    // (side lengths are rounded to whole pixels)
    double rel = static_cast<double>(s.geom.src.area()) / static_cast<double>(region.area());
    CHECK(rel >= 0.3);
    CHECK(rel <= 0.8);
    // crop lies inside the region
    CHECK(s.geom.src.x >= region.x);
    CHECK(s.geom.src.y >= region.y);
    CHECK(s.geom.src.x + s.geom.src.w <= region.x + region.w);
    CHECK(s.geom.src.y + s.geom.src.h <= region.y + region.h);
  }

  // alpha = 0: constraint vacuous, never fallback
  Rng rng2(9);
  for (int i = 0; i < 100; ++i)
    CHECK_FALSE(sample_local_crop(m, region, 0.4, 0.7, 0.0, rng2).fallback);

  // alpha = 1 with bbox strictly inside solid foreground
  BinaryMask solid(16, 16);
  for (auto& v : solid.v) v = 1;
  Rng rng3(11);
  LocalCropSample s = sample_local_crop(solid, {4, 4, 8, 8}, 0.4, 0.7, 1.0, rng3);
  CHECK_FALSE(s.fallback);
  CHECK(overlap_ratio(s.geom, solid) == doctest::Approx(1.0));
}

TEST_CASE("crop_image matches mask geometry on a checker image") {
  Image img(4, 4);
  img.at(1, 2, 0) = 1.f;
  CropGeometry g{{2, 0, 2, 4}, 4, 2, false};
  Image out = crop_image(img, g);
  CHECK(out.h == 4);
  CHECK(out.w == 2);
  CHECK(out.at(1, 0, 0) == doctest::Approx(1.f));
}
