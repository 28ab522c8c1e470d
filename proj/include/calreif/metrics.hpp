#pragma once

#include "calreif/point_cloud.hpp"

namespace calreif {

// Lattice sample of plane ∩ ball at the given spacing, lex order over the
// lattice with the disk center included. Empty when the plane misses the
// ball.
PointCloud discretize_patch(const OrientedPlane& plane, const Ball& ball,
                            double spacing);

// Symmetric Hausdorff distance between two finite samples.
double hausdorff_distance(const PointCloud& a, const PointCloud& b);

// Cloud against a plane patch; the patch is discretized at `spacing`
// (default: half the cloud's resolution).
double hausdorff_distance(const PointCloud& cloud, const OrientedPlane& plane,
                          const Ball& ball, double spacing = -1.0);

// sup over a of dist(a, B).
double one_sided_hausdorff(const PointCloud& a, const PointCloud& b);

}  // namespace calreif
