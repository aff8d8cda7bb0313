#pragma once

// On-disk container shared by frames, packed images, calibration profiles,
// and sensor specs. Layout (all integers little-endian):
//
//   header   64 bytes   magic, version, kind, encoding, plane geometry,
//                       block lengths, CRC32 of header bytes [0, 60)
//   metadata N bytes    UTF-8 "key=value\n" lines, keys sorted
//   payload  M bytes    planes back to back, row-major, u16 or f32
//   trailer  4 bytes    CRC32 of every preceding byte
//
// docs/container_format.md has the byte-level table.

#include <algorithm>
#include <bit>
#include <boost/crc.hpp>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rawnoise/bayer.hpp"
#include "rawnoise/raw_frame.hpp"

namespace rawnoise {

inline constexpr std::array<std::uint8_t, 8> kContainerMagic{'R', 'N', 'C', 'F', '\r', '\n', 0x1A, '\n'};
inline constexpr std::uint16_t kContainerVersionMajor = 1;
inline constexpr std::uint16_t kContainerVersionMinor = 0;
inline constexpr std::size_t kContainerHeaderSize = 64;

enum class ContainerKind : std::uint16_t { mosaic = 1, packed = 2, calibration_profile = 3, sensor_spec = 4 };
enum class SampleEncoding : std::uint16_t { u16 = 1, f32 = 2 };

struct Container {
  ContainerKind kind = ContainerKind::mosaic;
  SampleEncoding encoding = SampleEncoding::u16;
  std::map<std::string, std::string> metadata;
  std::vector<Plane> planes;  // all planes share one shape
};

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(data, n);
  return crc.checksum();
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{p[i]} << (8 * i));
  return v;
}

}  // namespace detail

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view s, std::string_view key) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{} && res.ptr == s.data() + s.size(), ErrorCode::format,
          "metadata value for '" + std::string(key) + "' is not a number: " + std::string(s));
  return v;
}

inline std::vector<std::uint8_t> encode_container(const Container& c) {
  const std::size_t w = c.planes.empty() ? 0 : c.planes.front().width;
  const std::size_t h = c.planes.empty() ? 0 : c.planes.front().height;
  for (const Plane& p : c.planes)
    require(p.width == w && p.height == h && p.size() == w * h, ErrorCode::dimension,
            "container planes must share one shape");

  std::string meta;
  for (const auto& [key, value] : c.metadata) {
    require(!key.empty() && key.find_first_of("=\n") == std::string::npos, ErrorCode::format,
            "invalid metadata key: '" + key + "'");
    require(value.find('\n') == std::string::npos, ErrorCode::format, "metadata value contains newline: " + key);
    meta += key;
    meta += '=';
    meta += value;
    meta += '\n';
  }
  const std::size_t bytes_per_sample = c.encoding == SampleEncoding::u16 ? 2 : 4;
  const std::uint64_t payload_len = std::uint64_t{c.planes.size()} * w * h * bytes_per_sample;

  std::vector<std::uint8_t> out(kContainerMagic.begin(), kContainerMagic.end());
  out.reserve(kContainerHeaderSize + meta.size() + payload_len + 4);
  detail::put_le<std::uint16_t>(out, kContainerVersionMajor);
  detail::put_le<std::uint16_t>(out, kContainerVersionMinor);
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(c.kind));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(c.encoding));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.planes.size()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  detail::put_le<std::uint32_t>(out, 0);
  detail::put_le<std::uint64_t>(out, meta.size());
  detail::put_le<std::uint64_t>(out, payload_len);
  out.resize(60, 0);
  detail::put_le<std::uint32_t>(out, detail::crc32(out.data(), 60));

  out.insert(out.end(), meta.begin(), meta.end());
  for (const Plane& p : c.planes) {
    for (double v : p.data) {
      if (c.encoding == SampleEncoding::u16) {
        require(v >= 0.0 && v <= 65535.0 && v == std::floor(v), ErrorCode::format,
                "u16 payload requires integral values in [0, 65535]");
        detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(v));
      } else {
        detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  detail::put_le<std::uint32_t>(out, detail::crc32(out.data(), out.size()));
  return out;
}

inline Container decode_container(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= kContainerHeaderSize, ErrorCode::truncated, "file shorter than container header");
  const std::uint8_t* h = bytes.data();
  require(std::equal(kContainerMagic.begin(), kContainerMagic.end(), h), ErrorCode::corrupt_header,
          "bad container magic");
  require(detail::get_le<std::uint32_t>(h + 60) == detail::crc32(h, 60), ErrorCode::corrupt_header,
          "container header checksum mismatch");
  const auto major = detail::get_le<std::uint16_t>(h + 8);
  require(major == kContainerVersionMajor, ErrorCode::version_unsupported,
          "unsupported container version " + std::to_string(major));

  Container c;
  const auto kind = detail::get_le<std::uint16_t>(h + 12);
  const auto encoding = detail::get_le<std::uint16_t>(h + 14);
  require(kind >= 1 && kind <= 4, ErrorCode::corrupt_header, "unknown container kind");
  require(encoding == 1 || encoding == 2, ErrorCode::corrupt_header, "unknown sample encoding");
  c.kind = static_cast<ContainerKind>(kind);
  c.encoding = static_cast<SampleEncoding>(encoding);
  const std::uint64_t planes = detail::get_le<std::uint32_t>(h + 16);
  const std::uint64_t w = detail::get_le<std::uint32_t>(h + 20);
  const std::uint64_t ht = detail::get_le<std::uint32_t>(h + 24);
  const auto meta_len = detail::get_le<std::uint64_t>(h + 32);
  const auto payload_len = detail::get_le<std::uint64_t>(h + 40);
  const std::uint64_t bps = c.encoding == SampleEncoding::u16 ? 2 : 4;
  require(payload_len == planes * w * ht * bps, ErrorCode::corrupt_header, "payload length disagrees with geometry");
  require(meta_len <= bytes.size() && payload_len <= bytes.size() &&
              bytes.size() == kContainerHeaderSize + meta_len + payload_len + 4,
          ErrorCode::truncated, "container length does not match header");
  const std::size_t body_end = bytes.size() - 4;
  require(detail::get_le<std::uint32_t>(h + body_end) == detail::crc32(h, body_end), ErrorCode::checksum,
          "container checksum mismatch");

  const std::string_view meta(reinterpret_cast<const char*>(h + kContainerHeaderSize), meta_len);
  std::size_t pos = 0;
  while (pos < meta.size()) {
    const std::size_t eol = meta.find('\n', pos);
    require(eol != std::string_view::npos, ErrorCode::format, "metadata block not newline-terminated");
    const std::string_view line = meta.substr(pos, eol - pos);
    const std::size_t eq = line.find('=');
    require(eq != std::string_view::npos && eq > 0, ErrorCode::format, "metadata line without key: " + std::string(line));
    c.metadata.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    pos = eol + 1;
  }

  const std::uint8_t* p = h + kContainerHeaderSize + meta_len;
  c.planes.reserve(planes);
  for (std::uint64_t i = 0; i < planes; ++i) {
    Plane plane(w, ht);
    for (double& v : plane.data) {
      if (c.encoding == SampleEncoding::u16) {
        v = detail::get_le<std::uint16_t>(p);
        p += 2;
      } else {
        v = std::bit_cast<float>(detail::get_le<std::uint32_t>(p));
        p += 4;
      }
    }
    c.planes.push_back(std::move(plane));
  }
  return c;
}

// Writes to a sibling temp file and renames so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorCode::io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::io, "rename to " + path.string() + " failed: " + ec.message());
}

inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_container(const Container& c, const std::filesystem::path& path) {
  write_file_atomic(path, encode_container(c));
}

inline Container read_container_file(const std::filesystem::path& path) { return decode_container(read_file(path)); }

// ---------------------------------------------------------------------------
// Sensor metadata and frame mapping

inline void put_sensor_meta(std::map<std::string, std::string>& md, const SensorMeta& m) {
  md["sensor.width"] = std::to_string(m.width);
  md["sensor.height"] = std::to_string(m.height);
  md["sensor.cfa"] = m.cfa_pattern;
  std::string black;
  for (int i = 0; i < 4; ++i) black += (i ? "," : "") + format_number(m.black_level[i]);
  md["sensor.black_level"] = black;
  md["sensor.white_level"] = format_number(m.white_level);
  md["sensor.iso"] = std::to_string(m.iso);
  md["sensor.exposure_time"] = format_number(m.exposure_time);
  if (m.system_gain_k) md["sensor.system_gain_k"] = format_number(*m.system_gain_k);
}

inline const std::string& get_key(const std::map<std::string, std::string>& md, const std::string& key) {
  const auto it = md.find(key);
  require(it != md.end(), ErrorCode::format, "missing metadata key: " + key);
  return it->second;
}

inline std::vector<double> parse_number_list(std::string_view s, std::string_view key) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find(',', pos);
    out.push_back(parse_number(s.substr(pos, comma == std::string_view::npos ? s.npos : comma - pos), key));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline SensorMeta get_sensor_meta(const std::map<std::string, std::string>& md) {
  SensorMeta m;
  m.width = static_cast<std::uint32_t>(parse_number(get_key(md, "sensor.width"), "sensor.width"));
  m.height = static_cast<std::uint32_t>(parse_number(get_key(md, "sensor.height"), "sensor.height"));
  m.cfa_pattern = get_key(md, "sensor.cfa");
  const auto black = parse_number_list(get_key(md, "sensor.black_level"), "sensor.black_level");
  require(black.size() == 4, ErrorCode::format, "sensor.black_level needs 4 values");
  std::copy(black.begin(), black.end(), m.black_level.begin());
  m.white_level = parse_number(get_key(md, "sensor.white_level"), "sensor.white_level");
  m.iso = static_cast<std::uint32_t>(parse_number(get_key(md, "sensor.iso"), "sensor.iso"));
  m.exposure_time = parse_number(get_key(md, "sensor.exposure_time"), "sensor.exposure_time");
  if (const auto it = md.find("sensor.system_gain_k"); it != md.end())
    m.system_gain_k = parse_number(it->second, "sensor.system_gain_k");
  m.validate();
  return m;
}

namespace detail {

inline void put_frame_flags(std::map<std::string, std::string>& md, SampleKind kind, bool black_subtracted,
                            const std::map<std::string, std::string>& attributes) {
  md["frame.kind"] = kind == SampleKind::quantized ? "quantized" : "real";
  md["frame.black_subtracted"] = black_subtracted ? "1" : "0";
  for (const auto& [k, v] : attributes) md["attr." + k] = v;
}

template <typename Image>
void get_frame_flags(const Container& c, Image& img) {
  const std::string& kind = get_key(c.metadata, "frame.kind");
  require(kind == "quantized" || kind == "real", ErrorCode::format, "unknown frame.kind: " + kind);
  img.kind = kind == "quantized" ? SampleKind::quantized : SampleKind::real;
  img.black_subtracted = get_key(c.metadata, "frame.black_subtracted") == "1";
  for (const auto& [k, v] : c.metadata)
    if (k.starts_with("attr.")) img.attributes.emplace(k.substr(5), v);
}

}  // namespace detail

inline Container to_container(const RawFrame& frame) {
  frame.validate();
  Container c;
  c.kind = ContainerKind::mosaic;
  c.encoding = frame.kind == SampleKind::quantized ? SampleEncoding::u16 : SampleEncoding::f32;
  put_sensor_meta(c.metadata, frame.meta);
  detail::put_frame_flags(c.metadata, frame.kind, frame.black_subtracted, frame.attributes);
  c.planes.push_back(frame.pixels);
  return c;
}

inline Container to_container(const PackedImage& img) {
  img.validate();
  Container c;
  c.kind = ContainerKind::packed;
  c.encoding = img.kind == SampleKind::quantized ? SampleEncoding::u16 : SampleEncoding::f32;
  put_sensor_meta(c.metadata, img.meta);
  detail::put_frame_flags(c.metadata, img.kind, img.black_subtracted, img.attributes);
  c.metadata["attr.bayer.channel_sites"] = format_channel_sites(parse_cfa(img.meta.cfa_pattern));
  c.planes.assign(img.channels.begin(), img.channels.end());
  return c;
}

inline RawFrame frame_from_container(const Container& c) {
  require(c.kind == ContainerKind::mosaic, ErrorCode::format, "container does not hold a mosaic frame");
  require(c.planes.size() == 1, ErrorCode::format, "mosaic container must hold exactly one plane");
  RawFrame f;
  f.meta = get_sensor_meta(c.metadata);
  detail::get_frame_flags(c, f);
  f.pixels = c.planes.front();
  f.validate();
  return f;
}

inline PackedImage packed_from_container(const Container& c) {
  require(c.kind == ContainerKind::packed, ErrorCode::format, "container does not hold a packed image");
  require(c.planes.size() == kChannelCount, ErrorCode::format, "packed container must hold four planes");
  PackedImage img;
  img.meta = get_sensor_meta(c.metadata);
  detail::get_frame_flags(c, img);
  for (int i = 0; i < kChannelCount; ++i) img.channels[i] = c.planes[i];
  img.validate();
  return img;
}

inline void write_frame(const RawFrame& frame, const std::filesystem::path& path) {
  write_container(to_container(frame), path);
}

inline RawFrame read_frame(const std::filesystem::path& path) { return frame_from_container(read_container_file(path)); }

inline void write_packed(const PackedImage& img, const std::filesystem::path& path) {
  write_container(to_container(img), path);
}

inline PackedImage read_packed(const std::filesystem::path& path) {
  return packed_from_container(read_container_file(path));
}

// Either kind of image container, packed on load.
inline PackedImage read_as_packed(const std::filesystem::path& path) {
  const Container c = read_container_file(path);
  return c.kind == ContainerKind::packed ? packed_from_container(c) : pack_bayer(frame_from_container(c));
}

}  // namespace rawnoise
