#pragma once

#include <vector>

#include "ctin/geometry.hpp"

namespace ctin {

/// Position series in the navigation frame. Planar trajectories keep z = 0.
struct Trajectory {
  std::vector<double> timestamps;
  std::vector<Vec3> positions;

  std::size_t size() const { return positions.size(); }

  /// Throws DataError if lengths differ or timestamps do not increase.
  void validate() const;

  /// Copy with z dropped to 0.
  Trajectory planar() const;
};

}  // namespace ctin
