#pragma once

#include <vector>

#include "calreif/forms.hpp"
#include "calreif/plane.hpp"
#include "calreif/plane_fit.hpp"
#include "calreif/point_cloud.hpp"

namespace calreif {

// Flatness and positivity of one ball B_r(x).
struct FlatnessRecord {
  Vec center;
  double radius = 0.0;
  int scale_index = 0;       // dyadic exponent j, radius = coarsest * 2^-j
  double theta = 0.0;        // symmetric deviation / r
  double beta = 0.0;         // one-sided deviation / r, always <= theta
  double omega = 0.0;        // calibration value on the (oriented) theta-plane
  bool orientation_ambiguous = false;
  bool degenerate = false;   // too few samples; theta/beta meaningless
  OrientedPlane plane;       // the theta-plane
};

struct FlatnessOptions {
  FitOptions fit;
};

// Computes theta, beta and the calibration value for one ball. The reported
// beta is clamped by the theta-plane's one-sided deviation, so beta <= theta
// holds exactly. Degenerate balls (fewer than k+1 samples) come back flagged
// with the fallback plane.
FlatnessRecord flatness_at(const PointCloud& cloud, const CalibrationField& field,
                           const Vec& x, double r, int k,
                           const FlatnessOptions& opts = {});

struct ScaleSummary {
  int scale_index = 0;
  double radius = 0.0;
  int centers = 0;
  double theta_max = 0.0;
  double beta_max = 0.0;
  double omega_min = 0.0;
};

struct CertifyOptions {
  int coarsest_exp = 0;       // coarsest scale = 2^-coarsest_exp
  int finest_exp = 6;         // finest scale   = 2^-finest_exp
  double delta = 0.02;        // flatness threshold for the verdict
  double alpha = 0.5;         // positivity threshold for the verdict
  double net_slack = 0.5;     // center net spacing as a fraction of scale
  FlatnessOptions flat;
};

struct ReifenbergCertificate {
  int k = 0;
  int n = 0;
  double h = 0.0;             // cloud resolution
  double domain_radius = 0.0;
  double delta = 0.0;         // thresholds the verdict was taken against
  double alpha = 0.0;
  double net_slack = 0.0;
  std::vector<double> scales;
  std::vector<ScaleSummary> per_scale;
  std::vector<FlatnessRecord> records;
  double delta_star = 0.0;    // max theta over all records
  double beta_star = 0.0;     // max beta
  double alpha_star = 0.0;    // min omega
  double delta_star_net = 0.0;  // delta_star inflated by the net slack
  double dini_max = 0.0;      // max over coarse-net centers of the dyadic sum
  int dini_centers = 0;
  bool flat_enough = false;   // delta_star <= delta
  bool positive_enough = false;  // alpha_star > alpha
  bool verdict = false;
};

// Multiscale certification: for each dyadic scale s enumerates a greedy
// farthest-point (net_slack * s)-net over cloud points whose ball stays
// inside the domain ball, profiles every (center, s), and aggregates.
// Throws ResolutionError when the finest scale is below 4h.
ReifenbergCertificate certify(const PointCloud& cloud,
                              const CalibrationField& field, int k,
                              const CertifyOptions& opts = {});

struct DiniReport {
  std::vector<double> scales;   // the valid scales, coarse to fine
  std::vector<double> thetas;
  double sum = 0.0;             // sum of theta^2 * ln 2 over valid scales
  double truncated_at = 0.0;    // 4h floor; scales below it were dropped
  int requested_scales = 0;
  int used_scales = 0;
};

// Dyadic square-function sum at one point, truncated at the 4h floor.
DiniReport dini_profile(const PointCloud& cloud, const Vec& x, int k,
                        int coarsest_exp, int finest_exp,
                        const FlatnessOptions& opts = {});

// Greedy farthest-point net over the given candidate rows; returns chosen
// rows in selection order. Deterministic: starts from the row closest to the
// origin (ties to the lower index) and stops when every candidate is within
// `spacing` of a chosen one.
std::vector<int> farthest_point_net(const PointCloud& cloud,
                                    const std::vector<int>& candidates,
                                    double spacing);

}  // namespace calreif
