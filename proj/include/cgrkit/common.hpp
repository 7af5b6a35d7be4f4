#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace cgrkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Raised for any contract violation, malformed input file or numerical
/// failure. The message names the offending field where there is one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs fn(i) for i in [0, n), spread over the hardware threads. Each index
/// is visited exactly once; callers write results into slot i so the output
/// order never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cgrkit
