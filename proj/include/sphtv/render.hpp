#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "sphtv/grid.hpp"

namespace sphtv {

struct MollweidePoint {
  double x = 0.0;  // in [-2 sqrt2, 2 sqrt2]
  double y = 0.0;  // in [-sqrt2, sqrt2]
};

// Forward Mollweide map of (latitude, longitude), unit radius. The
// auxiliary angle psi solves 2 psi + sin 2 psi = pi sin(lat) by Newton.
inline MollweidePoint mollweide_forward(double lat, double lon) {
  constexpr double pi = std::numbers::pi;
  if (!(lat >= -pi / 2 - 1e-12 && lat <= pi / 2 + 1e-12))
    throw std::invalid_argument("mollweide_forward: latitude outside [-pi/2, pi/2]");
  if (!(lon >= -pi - 1e-12 && lon <= pi + 1e-12))
    throw std::invalid_argument("mollweide_forward: longitude outside [-pi, pi]");
  const double target = pi * std::sin(lat);
  double psi = lat;
  // the derivative 2 + 2 cos(2 psi) vanishes at the poles, where psi = lat
  if (std::abs(std::abs(lat) - pi / 2) > 1e-12) {
    for (int k = 0; k < 100; ++k) {
      const double f = 2.0 * psi + std::sin(2.0 * psi) - target;
      if (std::abs(f) <= 1e-10) break;
      psi -= f / (2.0 + 2.0 * std::cos(2.0 * psi));
    }
  }
  const double s2 = std::sqrt(2.0);
  return {2.0 * s2 / pi * lon * std::cos(psi), s2 * std::sin(psi)};
}

struct MollweideLatLon {
  double lat = 0.0;
  double lon = 0.0;
  bool on_map = false;
};

// Closed-form inverse; points outside the 2:1 ellipse report off-map.
inline MollweideLatLon mollweide_inverse(double x, double y) {
  constexpr double pi = std::numbers::pi;
  const double s2 = std::sqrt(2.0);
  const double sy = y / s2;
  if (std::abs(sy) > 1.0) return {};
  const double psi = std::asin(sy);
  const double lat = std::asin(std::clamp((2.0 * psi + std::sin(2.0 * psi)) / pi, -1.0, 1.0));
  const double c = std::cos(psi);
  if (c <= 1e-15) {
    // pole row: the whole row collapses to a single point at x = 0
    if (std::abs(x) > 1e-12) return {};
    return {lat, 0.0, true};
  }
  const double lon = pi * x / (2.0 * s2 * c);
  if (std::abs(lon) > pi * (1.0 + 1e-12)) return {};
  return {lat, std::clamp(lon, -pi, pi), true};
}

inline int nearest_theta_index(const SphereGrid& g, double theta) {
  constexpr double pi = std::numbers::pi;
  double t = 0.0;
  if (g.scheme == Scheme::mw)
    t = (theta * (2.0 * g.band_limit - 1.0) / pi - 1.0) / 2.0;
  else
    t = (theta * 4.0 * g.band_limit / pi - 1.0) / 2.0;
  return std::clamp(static_cast<int>(std::lround(t)), 0, g.n_theta - 1);
}

inline int nearest_phi_index(const SphereGrid& g, double phi) {
  constexpr double pi = std::numbers::pi;
  while (phi < 0.0) phi += 2.0 * pi;
  while (phi >= 2.0 * pi) phi -= 2.0 * pi;
  const long p = std::lround(phi * g.n_phi / (2.0 * pi));
  return static_cast<int>(p % g.n_phi);
}

struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::uint8_t* at(int ix, int iy) { return rgb.data() + 3 * (static_cast<std::size_t>(iy) * width + ix); }
  const std::uint8_t* at(int ix, int iy) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(iy) * width + ix);
  }
};

// Nearest-sample Mollweide raster: north up, longitude zero at the
// center, black at lo ramping to yellow at hi, white off the ellipse.
inline Rgb8Image render_mollweide(const SphereImage& img, int width, double lo, double hi) {
  constexpr double pi = std::numbers::pi;
  if (width < 2) throw std::invalid_argument("render_mollweide: width must be >= 2");
  if (!(hi > lo)) throw std::invalid_argument("render_mollweide: need hi > lo");
  const int height = width / 2;
  const double s2 = std::sqrt(2.0);

  Rgb8Image out;
  out.width = width;
  out.height = height;
  out.rgb.assign(3 * static_cast<std::size_t>(width) * height, 255);

  for (int iy = 0; iy < height; ++iy) {
    const double y = s2 - (iy + 0.5) * (2.0 * s2 / height);
    for (int ix = 0; ix < width; ++ix) {
      const double x = (ix + 0.5) * (4.0 * s2 / width) - 2.0 * s2;
      const MollweideLatLon ll = mollweide_inverse(x, y);
      if (!ll.on_map) continue;
      const double theta = pi / 2 - ll.lat;
      const double phi = ll.lon < 0.0 ? ll.lon + 2.0 * pi : ll.lon;
      const double v = img.at(nearest_theta_index(img.grid, theta),
                              nearest_phi_index(img.grid, phi));
      const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
      const auto level = static_cast<std::uint8_t>(std::lround(255.0 * t));
      std::uint8_t* px = out.at(ix, iy);
      px[0] = level;
      px[1] = level;
      px[2] = 0;
    }
  }
  return out;
}

namespace detail {

inline void put_u32_be(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void png_chunk(std::string& out, const char type[4], const std::string& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  std::string block(type, 4);
  block += payload;
  out += block;
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(block.data()), static_cast<uInt>(block.size())));
  put_u32_be(out, crc);
}

}  // namespace detail

inline std::string png_encode(const Rgb8Image& img) {
  if (img.width < 1 || img.height < 1 ||
      img.rgb.size() != 3 * static_cast<std::size_t>(img.width) * img.height)
    throw std::invalid_argument("png_encode: inconsistent image dimensions");

  // raw stream: one filter byte (0 = none) before each row
  std::string raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (1 + 3 * img.width));
  for (int iy = 0; iy < img.height; ++iy) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(img.at(0, iy)), 3 * static_cast<std::size_t>(img.width));
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::string zdata(zlen, '\0');
  if (compress2(reinterpret_cast<Bytef*>(zdata.data()), &zlen,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                9) != Z_OK)
    throw std::runtime_error("png_encode: deflate failed");
  zdata.resize(zlen);

  std::string ihdr;
  detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr += '\x08';  // bit depth
  ihdr += '\x02';  // truecolor
  ihdr += '\0';    // deflate
  ihdr += '\0';    // adaptive filtering
  ihdr += '\0';    // no interlace

  std::string out("\x89PNG\r\n\x1a\n", 8);
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", zdata);
  detail::png_chunk(out, "IEND", "");
  return out;
}

inline void write_png(const std::string& path, const Rgb8Image& img) {
  const std::string bytes = png_encode(img);
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move '" + tmp.string() + "' into place: " + ec.message());
  }
}

}  // namespace sphtv
