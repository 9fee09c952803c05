#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "primfit/geometry.hpp"

namespace primfit {

/// Exact k-nearest-neighbour index over a fixed point set (3-d tree).
/// The tree references `points`; the caller keeps them alive.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 8);

  std::size_t size() const noexcept { return points_.size(); }

  /// Indices of the k points closest to `query`, nearest first. Ties are
  /// broken by index. Throws std::invalid_argument when k > size().
  std::vector<std::size_t> knn(const Point3& query, std::size_t k) const;

  /// (index, distance) of the closest point.
  std::pair<std::size_t, double> nearest(const Point3& query) const;

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);

  std::span<const Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

}  // namespace primfit
