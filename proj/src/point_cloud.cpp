#include "calreif/point_cloud.hpp"

#include <cmath>

#include "calreif/errors.hpp"
#include "calreif/parallel.hpp"

namespace calreif {

PointCloud::PointCloud(RowMat points) : pts_(std::move(points)) {
  if (pts_.rows() > 0 && pts_.cols() < 1) {
    throw ContractViolation("point cloud needs ambient dimension >= 1");
  }
}

double PointCloud::resolution() const {
  if (h_) return *h_;
  if (size() < 2) {
    throw ResolutionError("resolution undefined for fewer than two points");
  }
  const KdTree& tree = index();
  std::vector<double> nn(static_cast<std::size_t>(size()));
  parallel_for(static_cast<std::size_t>(size()), [&](std::size_t i) {
    const auto hit = tree.nearest_excluding(row(static_cast<int>(i)), static_cast<int>(i));
    nn[i] = std::sqrt(hit.dist2);
  });
  double h = 0.0;
  for (double v : nn) h = std::max(h, v);
  h_ = h;
  return h;
}

bool PointCloud::verify_resolution(double tol) const {
  if (!h_) {
    resolution();
    return true;
  }
  const double cached = *h_;
  h_.reset();
  const double fresh = resolution();
  return std::abs(fresh - cached) <= tol;
}

const KdTree& PointCloud::index() const {
  if (!tree_) {
    tree_.emplace();
    tree_->build(pts_.data(), static_cast<std::size_t>(pts_.rows()), dim());
  }
  return *tree_;
}

std::vector<int> PointCloud::points_in_ball(const Ball& ball) const {
  if (ball.center.size() != dim()) {
    throw ContractViolation("ball dimension mismatch with cloud");
  }
  return index().radius(ball.center.data(), ball.radius);
}

int PointCloud::nearest(const Vec& x) const {
  if (x.size() != dim()) throw ContractViolation("query dimension mismatch");
  if (empty()) throw ContractViolation("nearest query on empty cloud");
  return index().nearest(x.data()).index;
}

double PointCloud::distance_to(const Vec& x) const {
  if (x.size() != dim()) throw ContractViolation("query dimension mismatch");
  if (empty()) throw ContractViolation("distance query on empty cloud");
  return std::sqrt(index().nearest(x.data()).dist2);
}

double PointCloud::max_norm() const {
  double m = 0.0;
  for (int i = 0; i < size(); ++i) m = std::max(m, pts_.row(i).norm());
  return m;
}

double PointCloud::domain_radius() const {
  if (domain_radius_) return *domain_radius_;
  return max_norm();
}

}  // namespace calreif
