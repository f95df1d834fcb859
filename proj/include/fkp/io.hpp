#pragma once

// Diagnostics CSV and "FKPS" binary snapshots.
//
// Snapshot layout, little-endian:
//   char[4] "FKPS", u32 version (1), u32 nx, u32 ny,
//   f64 Lx, Ly (half widths), t, alpha, sigma, c,
//   nx*ny f64 samples, row-major with x fastest.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fkp/diagnostics.hpp"
#include "fkp/errors.hpp"
#include "fkp/params.hpp"
#include "fkp/spectral_core.hpp"

namespace fkp::io {

inline constexpr std::uint32_t snapshot_version = 1;
inline constexpr std::size_t snapshot_header_bytes = 64;

/// Shortest text that reads back to the same double (at most 17 digits).
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), end);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw PreconditionError("not a number: '" + std::string(s) + "'");
  return v;
}

inline const char* diagnostics_header = "t,sup_norm,mass,mass_rel_err,perturbation_sup,energy";

/// Optional columns are written empty when not tracked.
inline std::string diagnostics_csv(const DiagnosticsSeries& s) {
  std::string out = diagnostics_header;
  out += '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_double(s.t[i]) + ',' + format_double(s.sup_norm[i]) + ',' +
           format_double(s.mass[i]) + ',' + format_double(s.mass_rel_err[i]) + ',';
    if (s.has_perturbation()) out += format_double(s.perturbation_sup[i]);
    out += ',';
    if (s.has_energy()) out += format_double(s.energy[i]);
    out += '\n';
  }
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

inline DiagnosticsSeries parse_diagnostics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != diagnostics_header)
    throw PreconditionError("diagnostics CSV: missing or wrong header");
  DiagnosticsSeries s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw PreconditionError("diagnostics CSV: expected 6 fields");
    s.t.push_back(parse_double(f[0]));
    s.sup_norm.push_back(parse_double(f[1]));
    s.mass.push_back(parse_double(f[2]));
    s.mass_rel_err.push_back(parse_double(f[3]));
    if (!f[4].empty()) s.perturbation_sup.push_back(parse_double(f[4]));
    if (!f[5].empty()) s.energy.push_back(parse_double(f[5]));
  }
  if (s.has_perturbation() && s.perturbation_sup.size() != s.size())
    throw PreconditionError("diagnostics CSV: ragged perturbation column");
  if (s.has_energy() && s.energy.size() != s.size())
    throw PreconditionError("diagnostics CSV: ragged energy column");
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Snapshots

struct Snapshot {
  RealField2D field;
  double t = 0.0;
  FkpParams params;
};

namespace detail {

inline void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& b, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}
inline std::uint32_t get_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}
inline double get_f64(std::string_view b, std::size_t at) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace detail

inline std::string encode_snapshot(const Snapshot& s) {
  require_finite(s.field.values, "snapshot");
  const auto& g = s.field.grid;
  std::string b = "FKPS";
  detail::put_u32(b, snapshot_version);
  detail::put_u32(b, static_cast<std::uint32_t>(g.x.size()));
  detail::put_u32(b, static_cast<std::uint32_t>(g.y.size()));
  for (double v : {g.x.half_width(), g.y.half_width(), s.t, s.params.alpha,
                   static_cast<double>(s.params.sigma), s.params.c})
    detail::put_f64(b, v);
  b.reserve(b.size() + 8 * s.field.values.size());
  for (double v : s.field.values) detail::put_f64(b, v);
  return b;
}

inline Snapshot decode_snapshot(std::string_view b) {
  if (b.size() < snapshot_header_bytes) throw ValidityError("snapshot: truncated header");
  if (b.substr(0, 4) != "FKPS") throw ValidityError("snapshot: bad magic");
  if (detail::get_u32(b, 4) != snapshot_version) throw ValidityError("snapshot: unsupported version");
  const std::size_t nx = detail::get_u32(b, 8), ny = detail::get_u32(b, 12);
  double h[6];
  for (int i = 0; i < 6; ++i) h[i] = detail::get_f64(b, 16 + 8 * i);
  if (b.size() != snapshot_header_bytes + 8 * nx * ny)
    throw ValidityError("snapshot: payload length disagrees with header dims");
  Snapshot s{RealField2D(Grid2D{Grid1D(h[0], nx), Grid1D(h[1], ny)}), h[2],
             FkpParams{h[3], static_cast<int>(h[4]), h[5]}};
  for (std::size_t j = 0; j < nx * ny; ++j)
    s.field.values[j] = detail::get_f64(b, snapshot_header_bytes + 8 * j);
  require_finite(s.field.values, "snapshot");
  return s;
}

inline void write_snapshot(const Snapshot& s, const std::filesystem::path& path) {
  write_text(path, encode_snapshot(s));
}

inline Snapshot read_snapshot(const std::filesystem::path& path) { return decode_snapshot(read_bytes(path)); }

}  // namespace fkp::io
