#pragma once

// Geometry fixtures with known analytic CGRs.

#include <algorithm>
#include <cmath>
#include <limits>

#include "cgrkit/cgr/cgr.hpp"
#include "cgrkit/geometry/mesh.hpp"

namespace cgrkit::test {

/// Solid slab |x| <= 0.02, wide in y and z: the "two parallel plates" case.
inline TriangleMesh plates() { return make_box(Vec3(-0.02, -1, -1), Vec3(0.02, 1, 1)); }

inline TriangleMesh unit_cube() { return make_box(Vec3(1, 1, 1)); }

/// Analytic CGR for a frame inside the cube |x|,|y|,|z| <= h whose z axis is
/// a signed world axis and whose x axis is another world axis, so every
/// section is an axis-aligned square.
inline std::vector<CgrCell> analytic_box_cgr(const RigidTransform& frame, const CgrGridParams& p, double h) {
  std::vector<CgrCell> out(p.cell_count(), CgrCell{p.d_max, p.theta_sentinel});
  for (int j = 0; j < p.n_sections; ++j) {
    const Vec3 pole = frame.apply(Vec3(0, 0, p.section_depths[j]));
    if ((pole.cwiseAbs().array() >= h).any()) continue;
    for (int i = 0; i < p.n_angles; ++i) {
      const double a = p.angle(i);
      const Vec3 dir = frame.rotate(Vec3(std::cos(a), std::sin(a), 0));
      double best = std::numeric_limits<double>::infinity();
      double cosine = 0.0;
      for (int k = 0; k < 3; ++k) {
        if (std::abs(dir[k]) < 1e-15) continue;
        const double t = ((dir[k] > 0 ? h : -h) - pole[k]) / dir[k];
        if (t < best) best = t, cosine = std::abs(dir[k]);
      }
      if (best < p.d_max) out[j * p.n_angles + i] = {best, std::acos(std::min(1.0, cosine))};
    }
  }
  return out;
}

}  // namespace cgrkit::test
