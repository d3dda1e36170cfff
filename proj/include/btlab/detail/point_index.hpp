#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "btlab/geometry.hpp"

namespace btlab::detail {

// Deduplicates points closer than `tol` via a uniform hash grid.
class PointIndex {
 public:
  explicit PointIndex(double tol = kGeomTol) : tol_(tol), cell_(std::max(tol * 1000.0, 1e-7)) {}

  std::size_t find_or_add(const Point& p) {
    const Key k = key(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = (p.dim == 3 ? -1 : 0); dz <= (p.dim == 3 ? 1 : 0); ++dz) {
          auto it = cells_.find(Key{k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == cells_.end()) continue;
          for (std::size_t idx : it->second)
            if (distance(points_[idx], p) <= tol_) return idx;
        }
    points_.push_back(p);
    cells_[k].push_back(points_.size() - 1);
    return points_.size() - 1;
  }

  const std::vector<Point>& points() const { return points_; }

 private:
  using Key = std::array<std::int64_t, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = 1469598103934665603ull;
      for (auto v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
      return h;
    }
  };
  Key key(const Point& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x[0] / cell_)),
            static_cast<std::int64_t>(std::floor(p.x[1] / cell_)),
            static_cast<std::int64_t>(std::floor(p.x[2] / cell_))};
  }

  double tol_;
  double cell_;
  std::vector<Point> points_;
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> cells_;
};

}  // namespace btlab::detail
