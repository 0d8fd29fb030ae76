#pragma once

// Builds PNGs carrying the metadata a phone camera or editor would leave behind.

#include <zlib.h>

#include <string>
#include <vector>

#include "catchrel/png.hpp"

namespace catchrel::testing {

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::vector<std::uint8_t> make_chunk(const std::string& type, const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> out;
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  out.insert(out.end(), type.begin(), type.end());
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + 4, static_cast<uInt>(4 + data.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
  return out;
}

/// Big-endian TIFF/EXIF block whose IFD0 points at a GPS IFD holding a latitude.
inline std::vector<std::uint8_t> gps_exif() {
  std::vector<std::uint8_t> e = {'M', 'M', 0, 42, 0, 0, 0, 8};
  auto u16 = [&](std::uint16_t v) {
    e.push_back(static_cast<std::uint8_t>(v >> 8));
    e.push_back(static_cast<std::uint8_t>(v));
  };
  // IFD0 at 8: one entry, GPSInfo (0x8825) -> offset 26.
  u16(1);
  u16(0x8825);
  u16(4);
  put_be32(e, 1);
  put_be32(e, 26);
  put_be32(e, 0);
  // GPS IFD at 26: LatitudeRef 'S', Latitude -> 3 rationals at 56.
  u16(2);
  u16(0x0001);
  u16(2);
  put_be32(e, 2);
  e.insert(e.end(), {'S', 0, 0, 0});
  u16(0x0002);
  u16(5);
  put_be32(e, 3);
  put_be32(e, 56);
  put_be32(e, 0);
  for (std::uint32_t v : {8u, 1u, 39u, 1u, 0u, 1u}) put_be32(e, v);
  return e;
}

/// `png` with eXIf (GPS) and a tEXt comment inserted after IHDR.
inline std::vector<std::uint8_t> with_location_metadata(const std::vector<std::uint8_t>& png) {
  const std::size_t ihdr_end = 8 + 12 + 13;
  std::vector<std::uint8_t> out(png.begin(), png.begin() + ihdr_end);
  const auto exif = make_chunk("eXIf", gps_exif());
  const std::string text = std::string("Comment") + '\0' + "GPSLatitude -8.6512, 115.2167";
  const auto txt = make_chunk("tEXt", std::vector<std::uint8_t>(text.begin(), text.end()));
  out.insert(out.end(), exif.begin(), exif.end());
  out.insert(out.end(), txt.begin(), txt.end());
  out.insert(out.end(), png.begin() + ihdr_end, png.end());
  return out;
}

}  // namespace catchrel::testing
