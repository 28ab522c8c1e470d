#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "calreif/forms.hpp"
#include "calreif/plane.hpp"
#include "calreif/plane_fit.hpp"
#include "calreif/point_cloud.hpp"

namespace calreif {

// Piecewise-linear ball-radius rule: r near the core, epsilon far out.
struct ScaleFunction {
  double r = 0.0;
  double epsilon = 0.0;

  ScaleFunction(double r_in, double eps);
  // value at distance t from the origin: r for t <= 1, epsilon for
  // t >= 1 + epsilon, linear between
  double operator()(double t) const;
};

// Greedy ball cover with pairwise-disjoint fifth-balls and per-ball planes.
struct VitaliCover {
  std::vector<int> rows;
  RowMat centers;  // size() x n, gathered copies of the center points
  std::vector<double> radii;
  std::vector<OrientedPlane> planes;

  int size() const { return static_cast<int>(rows.size()); }
  bool verify_disjoint_fifths() const;
  // every cloud point with |p| <= 1 + epsilon lies inside some ball
  bool verify_covering(const PointCloud& cloud, double epsilon) const;
};

// Greedy selection in decreasing-radius order (ties to the lower row index);
// maximality of the accepted set yields the full-radius covering. Planes are
// local PCA fits oriented by the field. Throws ResolutionError when the
// cloud resolution exceeds a quarter of the smallest ball radius.
VitaliCover vitali_cover(const PointCloud& cloud, const ScaleFunction& fn,
                         const CalibrationField& field, int k);

class GlueError : public std::runtime_error {
 public:
  GlueError(std::string what, int ball, double distance)
      : std::runtime_error(std::move(what)),
        ball_index(ball),
        grassmann(distance) {}
  int ball_index;
  double grassmann;
};

// Surface stored as positions over a square lattice on the base plane.
// Outside the stored window the surface is the affine embedding by fiat;
// nodes beyond the identity radius hold bit-exact embedding values.
class ParamSurface {
 public:
  ParamSurface() = default;
  ParamSurface(OrientedPlane base, double spacing, double window_radius,
               double identity_radius);

  int k() const { return base_.dim(); }
  int n() const { return base_.ambient_dim(); }
  double spacing() const { return spacing_; }
  double window_radius() const { return window_radius_; }
  double identity_radius() const { return identity_radius_; }
  int half_width() const { return M_; }
  const OrientedPlane& base_plane() const { return base_; }

  long node_count() const { return positions_.rows(); }
  long cell_count() const;

  const RowMat& positions() const { return positions_; }
  RowMat& positions() { return positions_; }

  // lattice coordinates of a node, in base-plane parameters
  Vec node_coords(long idx) const;
  long node_index(const int* cell) const;  // k entries in [-M, M]

  Vec embed(const Vec& u) const;  // affine embedding of base coords

  // piecewise-multilinear position at arbitrary base coords; beyond the
  // stored lattice this is the affine embedding
  Vec eval(const Vec& u) const;

  // lower-corner lattice coords of a cell, from its linear index
  void cell_coords(long cell_idx, int* out) const;
  // forward-difference edge vectors of the cell (columns, unnormalized)
  Mat cell_edges(const int* cell) const;
  // cell through the given base coords, clamped to the stored lattice
  void locate_cell(const Vec& u, int* out) const;

 private:
  OrientedPlane base_;
  double spacing_ = 0.0;
  double window_radius_ = 0.0;
  double identity_radius_ = 0.0;
  int M_ = 0;
  RowMat positions_;
};

struct GlueOptions {
  double blend_factor = 2.0;     // bump support radius = factor * r_i
  double grassmann_guard = 0.5;  // abort when cover planes tilt past this
  double taper_hold = 0.5;       // displacement untouched below 1 + hold*eps
  double taper_end = 0.95;       // and zeroed above 1 + end*eps
};

// One refinement step: blend the surface toward the cover planes under a
// normalized quadratic partition of unity, tapered to the identity map at
// the window edge. Throws GlueError when a cover plane violates the
// Grassmann guard against the current frames.
ParamSurface glue_step(const ParamSurface& surface, const VitaliCover& cover,
                       const GlueOptions& opts = {});

struct BuildOptions {
  double epsilon = 1.0;
  int levels = 6;  // builds scales epsilon * 2^-a for a = 0..levels
  double grid_divisor = 8.0;
  long node_budget = 3000000;  // per-level cap on stored lattice nodes
  GlueOptions glue;
  FitOptions base_fit;
};

struct SurfaceFamily {
  OrientedPlane base;
  double epsilon = 0.0;
  std::vector<double> level_scales;
  std::vector<ParamSurface> levels;
  std::vector<VitaliCover> covers;  // covers[a] at scale r_a; a>=1 glued
  bool complete = false;
  int failed_level = -1;
  std::string failure;

  // linear interpolation between bracketing levels, on the finer grid
  ParamSurface interpolate(double r) const;
};

// Coarse-to-fine construction: level 0 is the base plane, each subsequent
// level glues toward its own Vitali cover. A failing level leaves the
// partial family flagged rather than throwing.
SurfaceFamily build_family(const PointCloud& cloud,
                           const CalibrationField& field,
                           const BuildOptions& opts = {});

struct LevelCheck {
  int level = 0;
  double r = 0.0;
  double hausdorff_to_cloud = 0.0;  // sampled at r/divisor, h-slack toward cloud
  double p3_ratio = 0.0;            // hausdorff / (delta * r)
  double grassmann_drift = 0.0;     // max over cells with image in B_1
  double p4_ratio = 0.0;
  double velocity = 0.0;            // sup |next - this| over the window
  double p5_ratio = 0.0;            // velocity / delta (last level: 0)
  double omega_min = 0.0;           // over all stored cells
  double positive_fraction = 0.0;   // cells clearing the eps/2 threshold
  bool identity_outside = false;
  double combined_ratio = 0.0;      // max of the available ratios
};

struct FamilyReport {
  double delta = 0.0;      // normalization for the ratios
  double eps_field = 0.0;  // positivity threshold source
  std::vector<LevelCheck> levels;
  double constant = 0.0;   // max combined ratio over levels
  double stability = 0.0;  // max/min combined ratio
  bool identity_outside_all = false;
  bool positivity_all = false;
  bool complete = false;   // copied from the family
};

struct CheckOptions {
  double sample_divisor = 8.0;
  // Per-level ratio normalization, e.g. the certified flatness at each
  // level's scale; levels beyond the vector fall back to the scalar delta.
  std::vector<double> level_deltas;
};

FamilyReport check_properties(const SurfaceFamily& family,
                              const PointCloud& cloud,
                              const CalibrationField& field, double delta,
                              const CheckOptions& opts = {});

}  // namespace calreif
