#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "calreif/kdtree.hpp"
#include "calreif/plane.hpp"

namespace calreif {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Finite sample set in R^n with a lazily built spatial index and a recorded
// sampling fineness h (max over points of the distance to the nearest other
// sample).
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(RowMat points);

  int size() const { return static_cast<int>(pts_.rows()); }
  int dim() const { return static_cast<int>(pts_.cols()); }
  bool empty() const { return pts_.rows() == 0; }

  const RowMat& points() const { return pts_; }
  Vec point(int i) const { return pts_.row(i).transpose(); }
  const double* row(int i) const { return pts_.row(i).data(); }

  // Sampling fineness; computed on first use and cached.
  double resolution() const;
  // Recomputes from scratch and compares with the cached value.
  bool verify_resolution(double tol = 1e-12) const;

  const KdTree& index() const;

  std::vector<int> points_in_ball(const Ball& ball) const;
  int nearest(const Vec& x) const;
  double distance_to(const Vec& x) const;

  double max_norm() const;  // radius of the smallest origin-centered ball

  // Declared region the sample set is meant to fill (certification domain).
  // Falls back to max_norm() when never set.
  void set_domain_radius(double r) { domain_radius_ = r; }
  double domain_radius() const;
  bool has_domain_radius() const { return domain_radius_.has_value(); }

 private:
  RowMat pts_;
  std::optional<double> domain_radius_;
  mutable std::optional<double> h_;
  mutable std::optional<KdTree> tree_;
};

}  // namespace calreif
