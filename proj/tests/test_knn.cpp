#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "primfit/knn.hpp"
#include "support.hpp"

namespace primfit {
namespace {

std::vector<std::size_t> brute_knn(const std::vector<Point3>& pts, const Point3& q, std::size_t k) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return (pts[a] - q).squaredNorm() < (pts[b] - q).squaredNorm(); });
  idx.resize(k);
  return idx;
}

TEST(KdTree, MatchesBruteForce) {
  Rng rng(1);
  for (std::size_t n : {1, 7, 50, 2000}) {
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(test::random_point(rng, 3.0));
    const KdTree tree(pts);
    for (int t = 0; t < 50; ++t) {
      const Point3 q = test::random_point(rng, 4.0);
      const std::size_t k = std::min<std::size_t>(n, 1 + t % 20);
      EXPECT_EQ(tree.knn(q, k), brute_knn(pts, q, k));
      const auto [i, d] = tree.nearest(q);
      EXPECT_EQ(i, brute_knn(pts, q, 1)[0]);
      EXPECT_DOUBLE_EQ(d, (pts[i] - q).norm());
    }
  }
}

TEST(KdTree, TiesBrokenByIndex) {
  const std::vector<Point3> pts = {{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}, {1, 0, 0}};
  const KdTree tree(pts, 1);
  EXPECT_EQ(tree.knn(Point3::Zero(), 5), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(tree.knn(Point3(1, 0, 0), 2), (std::vector<std::size_t>{0, 4}));
}

TEST(KdTree, RejectsTooManyNeighbours) {
  const std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}};
  const KdTree tree(pts);
  EXPECT_THROW(tree.knn(Point3::Zero(), 3), std::invalid_argument);
}

}  // namespace
}  // namespace primfit
