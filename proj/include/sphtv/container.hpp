#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sphtv/grid.hpp"
#include "sphtv/harmonic.hpp"

namespace sphtv {

// Raised for anything that prevents reading a container: bad magic,
// truncated file, unparseable or inconsistent header, payload size
// mismatch. A well-formed container of the wrong kind is not an error
// at this layer.
struct ContainerError : std::runtime_error {
  explicit ContainerError(const std::string& what) : std::runtime_error(what) {}
};

enum class PayloadKind { image, coeffs, half_coeffs };

inline const char* kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::image: return "image";
    case PayloadKind::coeffs: return "coeffs";
    case PayloadKind::half_coeffs: return "half-coeffs";
  }
  throw std::invalid_argument("kind_name: unknown payload kind");
}

inline PayloadKind kind_from_name(const std::string& s) {
  if (s == "image") return PayloadKind::image;
  if (s == "coeffs") return PayloadKind::coeffs;
  if (s == "half-coeffs") return PayloadKind::half_coeffs;
  throw ContainerError("unknown payload kind '" + s + "'");
}

// Flat double count per kind: images store real samples, coefficient
// kinds store interleaved re/im pairs.
inline std::size_t payload_doubles(PayloadKind kind, Scheme scheme, int band_limit) {
  const std::size_t L = static_cast<std::size_t>(band_limit);
  switch (kind) {
    case PayloadKind::image:
      return static_cast<std::size_t>(build_grid(scheme, band_limit).n_samples());
    case PayloadKind::coeffs: return 2 * L * L;
    case PayloadKind::half_coeffs: return L * (L + 1);
  }
  throw std::invalid_argument("payload_doubles: unknown payload kind");
}

struct SignalContainer {
  Scheme scheme = Scheme::mw;
  int band_limit = 0;
  PayloadKind kind = PayloadKind::image;
  std::vector<double> data;

  static SignalContainer from_image(const SphereImage& img) {
    SignalContainer c;
    c.scheme = img.grid.scheme;
    c.band_limit = img.grid.band_limit;
    c.kind = PayloadKind::image;
    c.data = img.v;
    return c;
  }

  static SignalContainer from_coeffs(const HarmonicCoeffs& h, Scheme scheme) {
    SignalContainer c;
    c.scheme = scheme;
    c.band_limit = h.band_limit;
    c.kind = PayloadKind::coeffs;
    c.data.resize(2 * h.v.size());
    for (std::size_t i = 0; i < h.v.size(); ++i) {
      c.data[2 * i] = h.v[i].real();
      c.data[2 * i + 1] = h.v[i].imag();
    }
    return c;
  }

  static SignalContainer from_half_coeffs(const HalfCoeffs& h, Scheme scheme) {
    SignalContainer c;
    c.scheme = scheme;
    c.band_limit = h.band_limit;
    c.kind = PayloadKind::half_coeffs;
    c.data.resize(2 * h.v.size());
    for (std::size_t i = 0; i < h.v.size(); ++i) {
      c.data[2 * i] = h.v[i].real();
      c.data[2 * i + 1] = h.v[i].imag();
    }
    return c;
  }

  SphereImage to_image() const {
    require_kind(PayloadKind::image);
    SphereImage img(build_grid(scheme, band_limit));
    img.v = data;
    return img;
  }

  HarmonicCoeffs to_coeffs() const {
    require_kind(PayloadKind::coeffs);
    HarmonicCoeffs h(band_limit);
    for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] = {data[2 * i], data[2 * i + 1]};
    return h;
  }

  HalfCoeffs to_half_coeffs() const {
    require_kind(PayloadKind::half_coeffs);
    HalfCoeffs h(band_limit);
    for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] = {data[2 * i], data[2 * i + 1]};
    return h;
  }

 private:
  void require_kind(PayloadKind want) const {
    if (kind != want)
      throw std::logic_error(std::string("container holds ") + kind_name(kind) + ", expected " +
                             kind_name(want));
  }
};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::string& out, double v) {
  const std::uint64_t b = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((b >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

inline double get_f64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline std::string serialize_container(const SignalContainer& c) {
  if (c.band_limit < 1) throw std::invalid_argument("serialize_container: band limit must be >= 1");
  const std::size_t want = payload_doubles(c.kind, c.scheme, c.band_limit);
  if (c.data.size() != want)
    throw std::invalid_argument("serialize_container: payload holds " +
                                std::to_string(c.data.size()) + " doubles, kind needs " +
                                std::to_string(want));
  nlohmann::json header;
  header["scheme"] = scheme_name(c.scheme);
  header["L"] = c.band_limit;
  header["kind"] = kind_name(c.kind);
  header["count"] = c.data.size();
  header["endianness"] = "little";
  const std::string htext = header.dump();

  std::string out;
  out.reserve(8 + htext.size() + 8 * c.data.size());
  out += "SPH1";
  detail::put_u32_le(out, static_cast<std::uint32_t>(htext.size()));
  out += htext;
  for (double v : c.data) detail::put_f64_le(out, v);
  return out;
}

inline SignalContainer parse_container(const std::string& bytes) {
  if (bytes.size() < 8) throw ContainerError("container shorter than magic and header length");
  if (bytes.compare(0, 4, "SPH1") != 0) throw ContainerError("bad magic, expected SPH1");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t hlen = detail::get_u32_le(p + 4);
  if (hlen > 1u << 20) throw ContainerError("header length field is implausibly large");
  if (bytes.size() < 8 + static_cast<std::size_t>(hlen))
    throw ContainerError("file truncated inside the header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(std::string("header is not valid JSON: ") + e.what());
  }

  SignalContainer c;
  try {
    const std::string scheme = header.at("scheme").get<std::string>();
    if (scheme == "mw")
      c.scheme = Scheme::mw;
    else if (scheme == "dh")
      c.scheme = Scheme::dh;
    else
      throw ContainerError("unknown scheme '" + scheme + "'");
    c.band_limit = header.at("L").get<int>();
    c.kind = kind_from_name(header.at("kind").get<std::string>());
    const std::size_t count = header.at("count").get<std::size_t>();
    const std::string endian = header.at("endianness").get<std::string>();
    if (endian != "little") throw ContainerError("unsupported endianness '" + endian + "'");
    if (c.band_limit < 1) throw ContainerError("band limit must be >= 1");
    if (count != payload_doubles(c.kind, c.scheme, c.band_limit))
      throw ContainerError("count does not match kind and band limit");
    c.data.resize(count);
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(std::string("header field missing or mistyped: ") + e.what());
  }

  const std::size_t body = 8 + hlen;
  if (bytes.size() != body + 8 * c.data.size())
    throw ContainerError("payload size does not match the header-declared count");
  for (std::size_t i = 0; i < c.data.size(); ++i)
    c.data[i] = detail::get_f64_le(p + body + 8 * i);
  return c;
}

// Writes via a sibling temp file and renames, so a crash never leaves a
// half-written container at the destination.
inline void write_container(const std::string& path, const SignalContainer& c) {
  const std::string bytes = serialize_container(c);
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

inline SignalContainer read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContainerError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

}  // namespace sphtv
