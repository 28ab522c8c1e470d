#pragma once

#include <optional>

#include "calreif/forms.hpp"
#include "calreif/metrics.hpp"
#include "calreif/point_cloud.hpp"

namespace calreif {

enum class FitMode {
  OneSided,   // minimize sup over in-ball samples of distance to the plane
  Symmetric,  // minimize Hausdorff distance between samples and plane disk
};

struct FitOptions {
  int max_iters = 500;
  double rel_tol = 1e-6;
  // Final symmetric objective discretizes the plane disk at r / final_div.
  int final_patch_div = 32;
  // Coarser grid and capped sample count steer the optimizer; the reported
  // objective is always re-evaluated on the full data at final_patch_div.
  int search_patch_div = 6;
  int search_cloud_cap = 256;
  // Plane points within this distance of a sample count as covered, so the
  // objective measures the shape of the sampled set rather than its sampling
  // fineness. Negative means: use the cloud's recorded resolution.
  double coverage_slack = -1.0;
  double init_offset_frac = 0.08;
  double init_tilt = 0.08;
};

struct PlaneFit {
  OrientedPlane plane;
  double objective = 0.0;
  double omega_value = 0.0;        // orienting form's value, when supplied
  bool orientation_ambiguous = false;
  bool degenerate = false;
  int evals = 0;
};

// Fewer than k+1 samples in the ball; carries the best-effort plane.
class DegenerateFit : public std::runtime_error {
 public:
  DegenerateFit(std::string what, OrientedPlane fallback)
      : std::runtime_error(std::move(what)), fallback(std::move(fallback)) {}
  OrientedPlane fallback;
};

// Best approximating affine k-plane for cloud ∩ ball: PCA seed at the
// in-ball centroid, then simplex refinement over normal offsets and tilt
// generators. When orient is given the returned frame is flipped so the
// form's value is nonnegative (ambiguous near zero).
PlaneFit best_fit_plane(const PointCloud& cloud, const Ball& ball, int k,
                        FitMode mode, const FitOptions& opts = {},
                        const ConstantKForm* orient = nullptr);

// PCA plane of the samples with the given row indices (top-k directions of
// the centered covariance, deterministic signs).
OrientedPlane pca_plane(const PointCloud& cloud, const std::vector<int>& rows,
                        int k);

// Sup over in-ball samples of the distance to the unclipped affine plane.
double one_sided_deviation(const PointCloud& cloud, const Ball& ball,
                           const OrientedPlane& plane);

}  // namespace calreif
