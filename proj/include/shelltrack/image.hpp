// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/vec.hpp"

namespace shelltrack {

/// RGB image, values in [0, 1], row-major.
struct ImageRGB {
  int width = 0, height = 0;
  std::vector<float> data;  // 3 floats per pixel

  ImageRGB() = default;
  ImageRGB(int w, int h, Vec3d fill = {0, 0, 0}) : width(w), height(h), data(3 * w * h) {
    for (int i = 0; i < w * h; ++i) set(i, fill);
  }

  Vec3d at(int x, int y) const { return at(y * width + x); }
  Vec3d at(int i) const { return {data[3 * i], data[3 * i + 1], data[3 * i + 2]}; }
  void set(int i, const Vec3d& c) {
    data[3 * i] = static_cast<float>(c.x);
    data[3 * i + 1] = static_cast<float>(c.y);
    data[3 * i + 2] = static_cast<float>(c.z);
  }
  void set(int x, int y, const Vec3d& c) { set(y * width + x, c); }
  int pixels() const { return width * height; }
};

/// Single-channel image in [0, 1].
struct ImageGray {
  int width = 0, height = 0;
  std::vector<float> data;

  ImageGray() = default;
  ImageGray(int w, int h, float fill = 0.f) : width(w), height(h), data(w * h, fill) {}
  float at(int x, int y) const { return data[y * width + x]; }
  void set(int x, int y, float v) { data[y * width + x] = v; }
  int pixels() const { return width * height; }
};

namespace detail {

inline std::uint8_t quantize8(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline void expect_magic(std::istream& is, const char* magic) {
  std::string tok;
  is >> tok;
  if (tok != magic) throw IoError(std::string("bad magic, expected ") + magic);
}

inline int read_pnm_int(std::istream& is) {
  // Skips whitespace and '#' comments.
  while (true) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int v = 0;
  is >> v;
  return v;
}

}  // namespace detail

// ---- PPM (P6) ----

inline void save_ppm(const std::string& path, const ImageRGB& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(3 * img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[3 * x + c] = detail::quantize8(img.data[3 * (y * img.width + x) + c]);
    os.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

inline ImageRGB load_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  detail::expect_magic(is, "P6");
  const int w = detail::read_pnm_int(is);
  const int h = detail::read_pnm_int(is);
  const int maxv = detail::read_pnm_int(is);
  if (maxv != 255) throw IoError("only 8-bit PPM supported");
  is.get();  // single whitespace after header
  ImageRGB img(w, h);
  std::vector<std::uint8_t> buf(3 * w * h);
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw IoError("truncated PPM: " + path);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0f;
  return img;
}

// ---- PGM (P5) ----

inline void save_pgm(const std::string& path, const ImageGray& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) row[x] = detail::quantize8(img.at(x, y));
    os.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

inline ImageGray load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  detail::expect_magic(is, "P5");
  const int w = detail::read_pnm_int(is);
  const int h = detail::read_pnm_int(is);
  const int maxv = detail::read_pnm_int(is);
  if (maxv != 255) throw IoError("only 8-bit PGM supported");
  is.get();
  ImageGray img(w, h);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h);
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw IoError("truncated PGM: " + path);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0f;
  return img;
}

// ---- PNG (8-bit, zlib-backed) ----

namespace detail {

inline void png_write_chunk(std::ofstream& os, const char* type,
                            const std::vector<std::uint8_t>& payload) {
  auto be32 = [&](std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                         static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  be32(static_cast<std::uint32_t>(payload.size()));
  os.write(type, 4);
  if (!payload.empty())
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size()));
  std::uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
  if (!payload.empty()) crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
  be32(crc);
}

}  // namespace detail

inline void save_png(const std::string& path, const ImageRGB& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  os.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr(13);
  auto put32 = [](std::uint8_t* p, std::uint32_t v) {
    p[0] = v >> 24;
    p[1] = v >> 16;
    p[2] = v >> 8;
    p[3] = v;
  };
  put32(ihdr.data(), img.width);
  put32(ihdr.data() + 4, img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // RGB
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  detail::png_write_chunk(os, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (1 + 3 * img.width));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        raw.push_back(detail::quantize8(img.data[3 * (y * img.width + x) + c]));
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("PNG deflate failed");
  compressed.resize(bound);
  detail::png_write_chunk(os, "IDAT", compressed);
  detail::png_write_chunk(os, "IEND", {});
}

inline ImageRGB load_png(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::uint8_t sig[8];
  is.read(reinterpret_cast<char*>(sig), 8);
  static const std::uint8_t expect[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (!is || std::memcmp(sig, expect, 8) != 0) throw IoError("not a PNG file: " + path);

  auto rd32 = [&]() {
    std::uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           b[3];
  };
  int w = 0, h = 0, color_type = -1;
  std::vector<std::uint8_t> idat;
  while (is) {
    const std::uint32_t len = rd32();
    char type[5] = {};
    is.read(type, 4);
    if (!is) break;
    std::vector<std::uint8_t> payload(len);
    if (len) is.read(reinterpret_cast<char*>(payload.data()), len);
    rd32();  // skip CRC
    if (std::strncmp(type, "IHDR", 4) == 0) {
      w = (payload[0] << 24) | (payload[1] << 16) | (payload[2] << 8) | payload[3];
      h = (payload[4] << 24) | (payload[5] << 16) | (payload[6] << 8) | payload[7];
      if (payload[8] != 8) throw IoError("only 8-bit PNG supported");
      color_type = payload[9];
      if (color_type != 0 && color_type != 2 && color_type != 6)
        throw IoError("unsupported PNG color type");
      if (payload[12] != 0) throw IoError("interlaced PNG not supported");
    } else if (std::strncmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload.begin(), payload.end());
    } else if (std::strncmp(type, "IEND", 4) == 0) {
      break;
    }
  }
  if (w <= 0 || h <= 0 || idat.empty()) throw IoError("malformed PNG: " + path);

  const int channels = color_type == 2 ? 3 : (color_type == 6 ? 4 : 1);
  const std::size_t stride = static_cast<std::size_t>(w) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * h);
  uLongf out_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &out_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      out_len != raw.size())
    throw IoError("PNG inflate failed: " + path);

  // Defilter in place into `pixels`.
  std::vector<std::uint8_t> pixels(stride * h);
  const int bpp = channels;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* dst = pixels.data() + y * stride;
    const std::uint8_t* up = y > 0 ? pixels.data() + (y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0:
          break;
        case 1:
          v += a;
          break;
        case 2:
          v += b;
          break;
        case 3:
          v += (a + b) / 2;
          break;
        case 4: {
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default:
          throw IoError("unknown PNG filter");
      }
      dst[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }

  ImageRGB img(w, h);
  for (int i = 0; i < w * h; ++i) {
    if (channels == 1) {
      const float g = pixels[i] / 255.0f;
      img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = g;
    } else {
      for (int c = 0; c < 3; ++c) img.data[3 * i + c] = pixels[i * channels + c] / 255.0f;
    }
  }
  return img;
}

/// Dispatch on extension (.ppm / .png).
inline void save_image(const std::string& path, const ImageRGB& img) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".png")
    save_png(path, img);
  else
    save_ppm(path, img);
}

inline ImageRGB load_image(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".png") return load_png(path);
  return load_ppm(path);
}

}  // namespace shelltrack
