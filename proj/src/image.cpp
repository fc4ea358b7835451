#include "vino/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vino/common.hpp"

namespace vino {

Image Image::filled(int h, int w, float r, float g, float b) {
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ConfigError("resize_bilinear: non-positive output size");
  if (img.h == out_h && img.w == out_w) return img;
  Image out(out_h, out_w);
  const double sy = static_cast<double>(img.h) / out_h;
  const double sx = static_cast<double>(img.w) / out_w;
  for (int i = 0; i < out_h; ++i) {
    double fy = (i + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::min(y0 + 1, img.h - 1);
    y0 = std::clamp(y0, 0, img.h - 1);
    for (int j = 0; j < out_w; ++j) {
      double fx = (j + 0.5) * sx - 0.5;
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

static uint8_t quantize(float v) {
  int q = static_cast<int>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
  return static_cast<uint8_t>(std::clamp(q, 0, 255));
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for write: " + path);
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.w) * 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) row[static_cast<size_t>(x) * 3 + c] = quantize(img.at(y, x, c));
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw DataError("write failed: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw DataError("not a P6 ppm: " + path);
  auto next_int = [&](int& out) {
    // skip whitespace and '#' comments
    int ch;
    while ((ch = f.get()) != EOF) {
      if (ch == '#') {
        while ((ch = f.get()) != EOF && ch != '\n') {}
      } else if (!std::isspace(ch)) {
        f.unget();
        break;
      }
    }
    if (!(f >> out)) throw DataError("truncated ppm header: " + path);
  };
  int w, h, maxv;
  next_int(w);
  next_int(h);
  next_int(maxv);
  if (w <= 0 || h <= 0 || maxv != 255) throw DataError("unsupported ppm header: " + path);
  f.get();  // single whitespace after maxval
  Image img(h, w);
  std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!f) throw DataError("truncated ppm pixel data: " + path);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = row[static_cast<size_t>(x) * 3 + c] / 255.f;
  }
  return img;
}

// ---- minimal PNG writer ----

static uint32_t crc32_update(uint32_t crc, const uint8_t* buf, size_t len) {
  static uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (uint32_t n = 0; n < 256; ++n) {
      uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[n] = c;
    }
    init = true;
  }
  crc = ~crc;
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ buf[i]) & 0xff] ^ (crc >> 8);
  return ~crc;
}

static void put_u32be(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(static_cast<uint8_t>(x >> 24));
  v.push_back(static_cast<uint8_t>(x >> 16));
  v.push_back(static_cast<uint8_t>(x >> 8));
  v.push_back(static_cast<uint8_t>(x));
}

static void write_chunk(std::ofstream& f, const char type[4], const std::vector<uint8_t>& data) {
  std::vector<uint8_t> hdr;
  put_u32be(hdr, static_cast<uint32_t>(data.size()));
  f.write(reinterpret_cast<const char*>(hdr.data()), 4);
  uint8_t t[4] = {static_cast<uint8_t>(type[0]), static_cast<uint8_t>(type[1]),
                  static_cast<uint8_t>(type[2]), static_cast<uint8_t>(type[3])};
  uint32_t crc = crc32_update(0, t, 4);
  crc = crc32_update(crc, data.data(), data.size());
  f.write(reinterpret_cast<const char*>(t), 4);
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  std::vector<uint8_t> tail;
  put_u32be(tail, crc);
  f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

void write_png(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for write: " + path);
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(img.w));
  put_u32be(ihdr, static_cast<uint32_t>(img.h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  write_chunk(f, "IHDR", ihdr);

  // Raw scanlines, filter byte 0 per row.
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.h) * (static_cast<size_t>(img.w) * 3 + 1));
  for (int y = 0; y < img.h; ++y) {
    raw.push_back(0);
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) raw.push_back(quantize(img.at(y, x, c)));
  }

  // zlib stream with stored (uncompressed) deflate blocks.
  std::vector<uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  size_t pos = 0;
  while (pos < raw.size()) {
    size_t n = std::min<size_t>(65535, raw.size() - pos);
    bool last = pos + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<uint8_t>(n & 0xff));
    z.push_back(static_cast<uint8_t>(n >> 8));
    z.push_back(static_cast<uint8_t>(~n & 0xff));
    z.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + static_cast<long>(pos), raw.begin() + static_cast<long>(pos + n));
    pos += n;
  }
  uint32_t a = 1, b = 0;
  for (uint8_t byte : raw) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  put_u32be(z, (b << 16) | a);
  write_chunk(f, "IDAT", z);
  write_chunk(f, "IEND", {});
  if (!f) throw DataError("write failed: " + path);
}

void write_image(const std::string& path, const Image& img) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".png")
    write_png(path, img);
  else
    write_ppm(path, img);
}

Image read_image(const std::string& path) { return read_ppm(path); }

}  // namespace vino
