#include "cgrkit/geometry/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "cgrkit/binary_io.hpp"

namespace cgrkit {

namespace {

long parse_index(const std::string& token, std::size_t vertex_count, int line_no) {
  const std::string head = token.substr(0, token.find('/'));
  long idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stol(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw Error("obj: bad face index '" + token + "' on line " + std::to_string(line_no));
  }
  if (idx < 0) idx += static_cast<long>(vertex_count) + 1;
  if (idx < 1 || idx > static_cast<long>(vertex_count))
    throw Error("obj: face index out of range on line " + std::to_string(line_no));
  return idx - 1;
}

}  // namespace

TriangleMesh read_obj(std::istream& is) {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw Error("obj: bad vertex on line " + std::to_string(line_no));
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(static_cast<std::uint32_t>(parse_index(tok, vertices.size(), line_no)));
      if (poly.size() < 3) throw Error("obj: face with fewer than 3 vertices on line " + std::to_string(line_no));
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) triangles.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  return {std::move(vertices), std::move(triangles)};
}

TriangleMesh read_stl(std::istream& is) {
  io::Reader r(is);
  r.bytes(80);
  const auto count = r.u32();
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::map<std::array<float, 3>, std::uint32_t> welded;
  triangles.reserve(count);
  for (std::uint32_t f = 0; f < count; ++f) {
    for (int i = 0; i < 3; ++i) r.f32();
    Triangle tri{};
    for (int v = 0; v < 3; ++v) {
      std::array<float, 3> key{r.f32(), r.f32(), r.f32()};
      auto [it, inserted] = welded.emplace(key, static_cast<std::uint32_t>(vertices.size()));
      if (inserted) vertices.emplace_back(key[0], key[1], key[2]);
      tri[v] = it->second;
    }
    r.u16();
    triangles.push_back(tri);
  }
  return {std::move(vertices), std::move(triangles)};
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    return read_obj(is);
  }
  if (ext == ".stl") {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    return read_stl(is);
  }
  throw Error("unsupported mesh format: " + path.string());
}

void write_obj(std::ostream& os, const TriangleMesh& mesh) {
  os << std::setprecision(17);
  for (const auto& v : mesh.vertices()) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!os) throw Error("write failed");
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_obj(os, mesh);
}

void write_stl(std::ostream& os, const TriangleMesh& mesh) {
  io::Writer w(os);
  w.bytes(std::string(80, '\0'));
  w.u32(static_cast<std::uint32_t>(mesh.triangle_count()));
  for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
    const Vec3& n = mesh.normals()[i];
    for (int k = 0; k < 3; ++k) w.f32(n[k]);
    for (const auto& c : mesh.corners(i))
      for (int k = 0; k < 3; ++k) w.f32(c[k]);
    w.u16(0);
  }
  w.check();
}

}  // namespace cgrkit
