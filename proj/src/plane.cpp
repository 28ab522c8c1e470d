#include "calreif/plane.hpp"

#include <cmath>
#include <limits>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace calreif {

Ball::Ball(Vec c, double r) : center(std::move(c)), radius(r) {
  if (!(radius > 0.0)) throw ContractViolation("ball radius must be positive");
}

bool Ball::contains(const Vec& x, double slack) const {
  return (x - center).norm() <= radius + slack;
}

OrientedPlane::OrientedPlane(Vec base, Mat frame)
    : base_(std::move(base)), frame_(std::move(frame)) {
  if (base_.size() != frame_.rows()) {
    throw ContractViolation("plane base and frame dimension mismatch");
  }
  if (frame_.cols() < 1 || frame_.cols() > frame_.rows()) {
    throw ContractViolation("plane dimension must satisfy 1 <= k <= n");
  }
  const Mat gram = frame_.transpose() * frame_;
  const double err = (gram - Mat::Identity(frame_.cols(), frame_.cols()))
                         .cwiseAbs()
                         .maxCoeff();
  if (err > 1e-12) {
    throw ContractViolation("plane frame is not orthonormal to 1e-12");
  }
}

OrientedPlane OrientedPlane::from_span(Vec base, const Mat& span) {
  const int k = static_cast<int>(span.cols());
  Eigen::HouseholderQR<Mat> qr(span);
  Mat Q = qr.householderQ() * Mat::Identity(span.rows(), k);
  Mat R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  for (int j = 0; j < k; ++j) {
    if (std::abs(R(j, j)) < 1e-12) {
      throw ContractViolation("degenerate span: columns not independent");
    }
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  }
  return OrientedPlane(std::move(base), std::move(Q));
}

Mat OrientedPlane::normal_frame() const {
  const int n = ambient_dim();
  const int k = dim();
  Eigen::HouseholderQR<Mat> qr(frame_);
  Mat Qfull = qr.householderQ();
  Mat N = Qfull.rightCols(n - k);
  // Fix each normal's sign by its largest-magnitude entry for determinism.
  for (int j = 0; j < N.cols(); ++j) {
    int imax = 0;
    N.col(j).cwiseAbs().maxCoeff(&imax);
    if (N(imax, j) < 0) N.col(j) = -N.col(j);
  }
  return N;
}

Vec OrientedPlane::project(const Vec& x) const {
  if (x.size() != base_.size()) throw ContractViolation("projection dimension mismatch");
  const Vec d = x - base_;
  return base_ + frame_ * (frame_.transpose() * d);
}

double OrientedPlane::distance(const Vec& x) const {
  if (x.size() != base_.size()) throw ContractViolation("distance dimension mismatch");
  const Vec d = x - base_;
  const Vec in_plane = frame_.transpose() * d;
  const double total2 = d.squaredNorm();
  const double along2 = in_plane.squaredNorm();
  return std::sqrt(std::max(0.0, total2 - along2));
}

double grassmann_distance(const OrientedPlane& a, const OrientedPlane& b) {
  if (a.ambient_dim() != b.ambient_dim() || a.dim() != b.dim()) {
    throw ContractViolation("grassmann distance needs planes of equal shape");
  }
  const Mat M = a.frame().transpose() * b.frame();
  Eigen::JacobiSVD<Mat> svd(M);
  const double smin = std::min(1.0, svd.singularValues().minCoeff());
  return std::sqrt(std::max(0.0, 1.0 - smin * smin));
}

double distance_to_plane_disk(const Vec& x, const OrientedPlane& plane,
                              const Ball& ball) {
  const Vec c = plane.project(ball.center);
  const double off2 = (ball.center - c).squaredNorm();
  const double rho2 = ball.radius * ball.radius - off2;
  if (rho2 <= 0.0) return std::numeric_limits<double>::infinity();
  const double rho = std::sqrt(rho2);
  const Vec d = x - c;
  const Vec u = plane.frame().transpose() * d;
  const double along = u.norm();
  const double perp2 = std::max(0.0, d.squaredNorm() - along * along);
  const double over = std::max(0.0, along - rho);
  return std::sqrt(perp2 + over * over);
}

}  // namespace calreif
