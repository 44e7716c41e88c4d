#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ucad/displacement.hpp"
#include "ucad/grid.hpp"

namespace ucad {

namespace detail {

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::streamoff data_offset = 0;
};

inline PgmHeader read_pgm_header(std::ifstream& is, const std::string& path) {
  auto fail = [&](const char* what) {
    throw data_error("pgm: " + std::string(what) + " in " + path + " at byte offset " +
                     std::to_string(static_cast<long long>(is.tellg())));
  };
  auto next_token = [&]() {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
      if (ch == '#') {
        while ((ch = is.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    return tok;
  };
  if (next_token() != "P5") fail("expected P5 magic");
  PgmHeader h;
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    fail("malformed header");
  }
  if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 65535) fail("bad dimensions");
  h.data_offset = is.tellg();
  return h;
}

inline void write_pgm(const std::string& path, int width, int height, int maxval,
                      const std::vector<std::uint16_t>& px) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("pgm: cannot open " + path + " for writing");
  os << "P5\n" << width << ' ' << height << '\n' << maxval << '\n';
  if (maxval > 255) {
    for (std::uint16_t v : px) {
      unsigned char b[2] = {static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v & 0xff)};
      os.write(reinterpret_cast<const char*>(b), 2);
    }
  } else {
    for (std::uint16_t v : px) {
      unsigned char b = static_cast<unsigned char>(v);
      os.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
  if (!os) throw data_error("pgm: write failed for " + path);
}

inline std::vector<std::uint16_t> read_pgm(const std::string& path, PgmHeader& h) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("pgm: cannot open " + path);
  h = read_pgm_header(is, path);
  std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  std::vector<std::uint16_t> px(n);
  int bpp = h.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bpp);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size())
    throw data_error("pgm: truncated payload in " + path + " at byte offset " +
                     std::to_string(static_cast<long long>(h.data_offset) + is.gcount()));
  for (std::size_t i = 0; i < n; ++i)
    px[i] = bpp == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                     : raw[i];
  return px;
}

}  // namespace detail

// Images: 16-bit binary PGM, value = round(v * 65535).
inline void save_grid(const std::string& path, const Grid2D& g) {
  std::vector<std::uint16_t> px(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double v = std::min(1.0, std::max(0.0, g.values[i]));
    px[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  detail::write_pgm(path, g.width, g.height, 65535, px);
}

inline Grid2D load_grid(const std::string& path) {
  detail::PgmHeader h;
  std::vector<std::uint16_t> px = detail::read_pgm(path, h);
  if (h.maxval != 65535) throw data_error("pgm: expected 16-bit image in " + path);
  Grid2D g(h.height, h.width);
  for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = px[i] / 65535.0;
  return g;
}

// Labels: 8-bit binary PGM, value = class id.
inline void save_labels(const std::string& path, const LabelMap& y) {
  std::vector<std::uint16_t> px(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) px[i] = static_cast<std::uint16_t>(y.labels[i]);
  detail::write_pgm(path, y.width, y.height, 255, px);
}

inline LabelMap load_labels(const std::string& path, int num_classes) {
  detail::PgmHeader h;
  std::vector<std::uint16_t> px = detail::read_pgm(path, h);
  if (h.maxval != 255) throw data_error("pgm: expected 8-bit labels in " + path);
  LabelMap y(h.height, h.width, num_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (px[i] >= static_cast<std::uint16_t>(num_classes))
      throw data_error("pgm: label out of range in " + path);
    y.labels[i] = px[i];
  }
  return y;
}

// Masks export as 8-bit PGM with {0, 255}.
inline void save_mask(const std::string& path, const Mask& m) {
  std::vector<std::uint16_t> px(m.bits.size());
  for (std::size_t i = 0; i < m.bits.size(); ++i) px[i] = m.bits[i] ? 255 : 0;
  detail::write_pgm(path, m.width, m.height, 255, px);
}

}  // namespace ucad
