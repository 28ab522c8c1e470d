#pragma once

#include <string>
#include <vector>

#include "calreif/builder.hpp"
#include "calreif/forms.hpp"
#include "calreif/plane.hpp"
#include "calreif/point_cloud.hpp"

namespace calreif {

// volume of the unit ball in R^k
double unit_ball_volume(int k);

// k-volume of the stored surface inside the ball: per-cell area elements
// from the finite-difference edges, straddling cells weighted by the
// fraction of their corners inside. Requires >= 8 cells across the ball.
double hausdorff_measure(const ParamSurface& surface, const Ball& ball);

// integral of the constant form over the surface patch, cells clipped the
// same way; the form acts on the unnormalized difference edges so the cell
// k-volume is already folded in
double integrate_form(const ParamSurface& surface, const ConstantKForm& form,
                      const Ball& ball);

struct VolumeReport {
  int level = 0;
  double r = 0.0;
  double measure_unit_ball = 0.0;  // k-volume inside B_1
  double ahlfors_ratio = 0.0;      // measure / omega_k
  double integral_window = 0.0;    // form integral over the B_{1+eps} patch
  double quadrature_tol = 0.0;     // straddling-cell mass of the measure
  double omega_min = 0.0;          // min form value on unit cell frames
  bool pointwise_ok = false;       // omega_min >= alpha - 3 eps/2 - tol
  bool upper_ok = false;           // measure <= integral / (alpha - 3 eps/2)
};

struct BoundsOptions {
  double lower_c = 10.0;      // lower Ahlfors constant: (1 - C delta) omega_k
  double upper_c = 10.0;      // upper constant: (1 + C eps)/(alpha - 3 eps/2)
  double pointwise_tol = 0.01;
  double variation_tol = 0.02;  // allowed relative spread of the integrals
};

struct CalibrationBounds {
  double alpha = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  double lower_c = 0.0;
  double upper_c = 0.0;
  double lower_bound = 0.0;  // on measure/omega_k
  double upper_bound = 0.0;
  double integral_variation = 0.0;
  bool integrals_stable = false;
  bool all_pointwise = false;
  bool all_upper = false;
  std::vector<VolumeReport> levels;
};

// per-level volume and calibration-integral accounting for a built family;
// the window integral splits into an exact base-plane disk term plus the
// compactly supported deformation difference, so its level-to-level spread
// reflects geometry rather than clip noise
CalibrationBounds calibration_bounds_check(const SurfaceFamily& family,
                                           const CalibrationField& field,
                                           double alpha, double delta,
                                           const BoundsOptions& opts = {});

struct CoverageReport {
  double cell = 0.0;    // projection grid spacing
  double radius = 0.0;  // base disk radius checked
  long total_cells = 0;
  long occupied = 0;
  double fraction = 0.0;
  std::vector<Vec> missing;  // centers of unhit cells, capped at 64
};

// discrete surjectivity of the base-plane projection: images of stored
// nodes inside the unit ball must hit every grid cell of the disk of
// radius 1 - c * delta
CoverageReport projection_covering_check(const ParamSurface& surface,
                                         const OrientedPlane& base,
                                         double delta, double c = 10.0);

struct LocalizedOptions {
  BuildOptions build;
  BoundsOptions bounds;
  double alpha = 0.5;
  double delta = 0.02;
  double agreement_tol = 0.01;  // finest-three-level relative spread
};

struct LocalizedResult {
  Vec center;
  double scale = 0.0;          // measured region is the ball of this radius
  double measure = 0.0;        // k-volume, rescaled to the ambient frame
  double ahlfors_ratio = 0.0;  // measure / (omega_k scale^k)
  double agreement = 0.0;      // finest-three relative spread
  bool accepted = false;
  std::string refusal;
  bool family_complete = false;
  std::string family_failure;
  CalibrationBounds bounds;
};

// measure the data near ball.center at scale ball.radius: the doubled ball
// is mapped to the unit-scale window, the family is rebuilt there, and the
// unit-scale volume is scaled back by radius^k. Refuses (with the reason)
// when the family cannot be completed or the finest three levels disagree.
LocalizedResult localized_certify(const PointCloud& cloud,
                                  const CalibrationField& field,
                                  const Ball& ball,
                                  const LocalizedOptions& opts = {});

}  // namespace calreif
