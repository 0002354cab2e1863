#pragma once

// Binary little-endian PLY with float32 positions and normals, uint8 colors
// and uint8-counted uint32 triangle lists.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "tryon3d/recon.hpp"

namespace tryon3d {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}
inline void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

inline std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  return v;
}

inline const char* kPlyVertexProps[] = {"float x", "float y", "float z", "float nx", "float ny", "float nz",
                                        "uchar red", "uchar green", "uchar blue"};

}  // namespace detail

inline std::string encode_ply(const Mesh& mesh) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(mesh.vertices.size()) + "\n";
  for (const char* p : detail::kPlyVertexProps) out += std::string("property ") + p + "\n";
  out += "element face " + std::to_string(mesh.triangles.size()) + "\n";
  out += "property list uchar uint vertex_indices\nend_header\n";
  out.reserve(out.size() + mesh.vertices.size() * 27 + mesh.triangles.size() * 13);
  for (const auto& v : mesh.vertices) {
    for (double c : v.position) detail::put_f32(out, c);
    for (double c : v.normal) detail::put_f32(out, c);
    for (double c : v.color) out.push_back(static_cast<char>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)));
  }
  for (const auto& t : mesh.triangles) {
    out.push_back(3);
    for (auto i : t) detail::put_u32(out, i);
  }
  return out;
}

inline void export_ply(const Mesh& mesh, const std::filesystem::path& path) {
  for (const auto& t : mesh.triangles)
    for (auto i : t)
      if (i >= mesh.vertices.size()) throw InputError("export_ply: triangle index out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const std::string bytes = encode_ply(mesh);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

/// Parses the exact layout written by export_ply.
inline Mesh decode_ply(const std::string& bytes, const std::string& origin = "PLY") {
  auto fail = [&](const std::string& why) { return InputError("malformed PLY " + origin + ": " + why); };
  const std::size_t header_end = bytes.find("end_header\n");
  if (bytes.rfind("ply\n", 0) != 0) throw fail("bad magic");
  if (header_end == std::string::npos) throw fail("missing end_header");
  std::istringstream header(bytes.substr(0, header_end));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(header, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("comment", 0) == 0 || line.rfind("obj_info", 0) == 0 || line.empty()) continue;
    lines.push_back(line);
  }
  std::size_t k = 0;
  auto expect = [&](const std::string& want) {
    if (k >= lines.size() || lines[k] != want) throw fail("expected '" + want + "'");
    ++k;
  };
  auto count_of = [&](const std::string& prefix) -> std::size_t {
    if (k >= lines.size() || lines[k].rfind(prefix, 0) != 0) throw fail("expected '" + prefix + "<n>'");
    try {
      std::size_t used = 0;
      const auto rest = lines[k].substr(prefix.size());
      const unsigned long long v = std::stoull(rest, &used);
      if (used != rest.size()) throw fail("bad element count");
      ++k;
      return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw fail("bad element count");
    }
  };
  expect("ply");
  expect("format binary_little_endian 1.0");
  const std::size_t nv = count_of("element vertex ");
  for (const char* p : detail::kPlyVertexProps) expect(std::string("property ") + p);
  const std::size_t nf = count_of("element face ");
  if (k < lines.size() && lines[k] == "property list uchar int vertex_indices")
    ++k;
  else
    expect("property list uchar uint vertex_indices");
  if (k != lines.size()) throw fail("unexpected header line '" + lines[k] + "'");

  std::size_t pos = header_end + std::strlen("end_header\n");
  if (bytes.size() - pos != nv * 27 + nf * 13) throw fail("body size does not match element counts");
  Mesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) {
    for (auto& c : v.position) {
      c = std::bit_cast<float>(detail::get_u32(bytes, pos));
      pos += 4;
    }
    for (auto& c : v.normal) {
      c = std::bit_cast<float>(detail::get_u32(bytes, pos));
      pos += 4;
    }
    for (auto& c : v.color) c = static_cast<unsigned char>(bytes[pos++]) / 255.0;
  }
  mesh.triangles.resize(nf);
  for (auto& t : mesh.triangles) {
    if (static_cast<unsigned char>(bytes[pos++]) != 3) throw fail("non-triangle face");
    for (auto& i : t) {
      i = detail::get_u32(bytes, pos);
      pos += 4;
      if (i >= nv) throw fail("vertex index out of range");
    }
  }
  return mesh;
}

inline Mesh import_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_ply(bytes, path.string());
}

}  // namespace tryon3d
