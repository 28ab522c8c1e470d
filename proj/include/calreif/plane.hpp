#pragma once

#include <Eigen/Dense>

#include "calreif/errors.hpp"

namespace calreif {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Ball {
  Vec center;
  double radius = 0.0;

  Ball() = default;
  Ball(Vec c, double r);
  bool contains(const Vec& x, double slack = 0.0) const;
};

// Affine k-plane with an oriented orthonormal frame. The frame matrix is
// n x k with orthonormal columns; swapping the sign of one column reverses
// the orientation.
class OrientedPlane {
 public:
  OrientedPlane() = default;
  // Throws ContractViolation unless the columns are orthonormal to 1e-12.
  OrientedPlane(Vec base, Mat frame);

  // Orthonormalizes the spanning columns (thin QR, R diagonal kept
  // positive so the result is deterministic in the input order).
  static OrientedPlane from_span(Vec base, const Mat& span);

  int dim() const { return static_cast<int>(frame_.cols()); }
  int ambient_dim() const { return static_cast<int>(frame_.rows()); }
  int codim() const { return ambient_dim() - dim(); }

  const Vec& base() const { return base_; }
  const Mat& frame() const { return frame_; }

  // Orthonormal basis of the normal space (deterministic).
  Mat normal_frame() const;

  Vec project(const Vec& x) const;
  double distance(const Vec& x) const;  // to the unclipped affine plane

  void flip_orientation() { frame_.col(0) = -frame_.col(0); }

 private:
  Vec base_;
  Mat frame_;
};

// Operator norm of the difference of the two orthogonal projectors.
// Equals the sine of the largest principal angle; ranges over [0,1].
double grassmann_distance(const OrientedPlane& a, const OrientedPlane& b);

// Distance from x to the k-disk obtained by cutting `plane` with `ball`.
// Returns +inf when the plane misses the ball.
double distance_to_plane_disk(const Vec& x, const OrientedPlane& plane,
                              const Ball& ball);

}  // namespace calreif
