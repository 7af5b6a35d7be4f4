#pragma once

#include <filesystem>
#include <iosfwd>

#include "cgrkit/geometry/mesh.hpp"

namespace cgrkit {

/// ASCII Wavefront OBJ: `v x y z` and `f a b c ...` records (polygons are
/// fan-triangulated, `a/b/c` index forms accepted, negative indices
/// resolved). Everything else is ignored. Units are meters.
TriangleMesh read_obj(std::istream& is);

/// Binary STL; coincident vertices are welded exactly so watertightness can
/// be detected. Stored facet normals are ignored.
TriangleMesh read_stl(std::istream& is);

/// Dispatches on the file extension (.obj / .stl, case-insensitive).
TriangleMesh load_mesh(const std::filesystem::path& path);

void write_obj(std::ostream& os, const TriangleMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
void write_stl(std::ostream& os, const TriangleMesh& mesh);

}  // namespace cgrkit
