#include "calreif/measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "calreif/errors.hpp"

namespace calreif {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kSub = 4;  // per-axis subdivision of straddling cells

double sq(double x) { return x * x; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double gram_volume(const Mat& edges) {
  return std::sqrt(
      std::max(0.0, (edges.transpose() * edges).determinant()));
}

// Cell walk clipped against the ball: interior cells pass through whole,
// straddling cells are subdivided and weighted by corner fractions.
// Returns the residual straddle mass (half the area still cut by the
// boundary after subdivision). emit(edges, weight) receives unnormalized
// difference edges, so k-volume factors are already included.
template <typename Emit>
double walk_clipped(const ParamSurface& surf, const Ball& ball, Emit&& emit) {
  const int k = surf.k();
  const int n = surf.n();
  const int corners = 1 << k;
  const RowMat& pos = surf.positions();
  const double r2 = sq(ball.radius);
  const double g = surf.spacing();
  const auto inside = [&](const double* p) {
    double d2 = 0.0;
    for (int d = 0; d < n; ++d) d2 += sq(p[d] - ball.center[d]);
    return d2 <= r2;
  };

  double tol = 0.0;
  int cc[3];
  int nb[3];
  const int side = kSub + 1;
  std::vector<double> subpos;
  std::vector<char> subin;
  Vec u(k);

  for (long ci = 0; ci < surf.cell_count(); ++ci) {
    surf.cell_coords(ci, cc);
    int cnt = 0;
    for (int m = 0; m < corners; ++m) {
      for (int d = 0; d < k; ++d) nb[d] = cc[d] + ((m >> d) & 1);
      if (inside(pos.row(surf.node_index(nb)).data())) ++cnt;
    }
    if (cnt == 0) continue;
    if (cnt == corners) {
      emit(surf.cell_edges(cc), 1.0);
      continue;
    }

    // straddling: sample the multilinear patch on a finer sub-lattice
    long points = 1;
    for (int d = 0; d < k; ++d) points *= side;
    subpos.assign(static_cast<std::size_t>(points) * n, 0.0);
    subin.assign(static_cast<std::size_t>(points), 0);
    for (long si = 0; si < points; ++si) {
      long t = si;
      for (int d = k - 1; d >= 0; --d) {
        u[d] = (cc[d] + static_cast<double>(t % side) / kSub) * g;
        t /= side;
      }
      const Vec p = surf.eval(u);
      for (int d = 0; d < n; ++d) subpos[si * n + d] = p[d];
      subin[si] = inside(&subpos[si * n]) ? 1 : 0;
    }
    const auto sub_index = [&](const int* q) {
      long idx = 0;
      for (int d = 0; d < k; ++d) idx = idx * side + q[d];
      return idx;
    };
    long subcells = 1;
    for (int d = 0; d < k; ++d) subcells *= kSub;
    int qq[3];
    for (long si = 0; si < subcells; ++si) {
      long t = si;
      for (int d = k - 1; d >= 0; --d) {
        qq[d] = static_cast<int>(t % kSub);
        t /= kSub;
      }
      int scnt = 0;
      for (int m = 0; m < corners; ++m) {
        for (int d = 0; d < k; ++d) nb[d] = qq[d] + ((m >> d) & 1);
        if (subin[sub_index(nb)]) ++scnt;
      }
      if (scnt == 0) continue;
      Mat e(n, k);
      const long base_idx = sub_index(qq);
      for (int d = 0; d < k; ++d) {
        for (int i = 0; i < k; ++i) nb[i] = qq[i];
        nb[d] += 1;
        const long ni = sub_index(nb);
        for (int dd = 0; dd < n; ++dd) {
          e(dd, d) = subpos[ni * n + dd] - subpos[base_idx * n + dd];
        }
      }
      if (scnt < corners) tol += 0.5 * gram_volume(e);
      emit(e, static_cast<double>(scnt) / corners);
    }
  }
  return tol;
}

void require_resolved(const ParamSurface& surf, const Ball& ball) {
  if (ball.center.size() != surf.n()) {
    throw ContractViolation("ball dimension mismatch with surface");
  }
  if (!(ball.radius > 0.0)) throw InputError("ball radius must be positive");
  if (2.0 * ball.radius / surf.spacing() < 8.0) {
    throw ResolutionError("surface grid resolves fewer than 8 cells across the ball");
  }
}

}  // namespace

double unit_ball_volume(int k) {
  if (k < 0) throw InputError("dimension must be nonnegative");
  return std::pow(std::numbers::pi, 0.5 * k) / std::tgamma(0.5 * k + 1.0);
}

double hausdorff_measure(const ParamSurface& surface, const Ball& ball) {
  require_resolved(surface, ball);
  double total = 0.0;
  walk_clipped(surface, ball, [&](const Mat& edges, double w) {
    total += w * gram_volume(edges);
  });
  return total;
}

double integrate_form(const ParamSurface& surface, const ConstantKForm& form,
                      const Ball& ball) {
  require_resolved(surface, ball);
  if (form.ambient_dim() != surface.n() || form.degree() != surface.k()) {
    throw InputError("form shape mismatch with surface");
  }
  double total = 0.0;
  walk_clipped(surface, ball, [&](const Mat& edges, double w) {
    total += w * form.evaluate_frame(edges);
  });
  return total;
}

CalibrationBounds calibration_bounds_check(const SurfaceFamily& family,
                                           const CalibrationField& field,
                                           double alpha, double delta,
                                           const BoundsOptions& opts) {
  if (family.levels.empty()) throw InputError("family holds no surfaces");
  const int n = family.base.ambient_dim();
  const int k = family.base.dim();
  if (field.constant_part().ambient_dim() != n ||
      field.constant_part().degree() != k) {
    throw InputError("calibration field shape mismatch with family");
  }
  const double eps = field.epsilon();
  const double floor_val = alpha - 1.5 * eps;
  if (!(floor_val > 0.0)) {
    throw InputError("alpha must exceed 3 eps/2 for the volume bounds");
  }

  CalibrationBounds out;
  out.alpha = alpha;
  out.eps = eps;
  out.delta = delta;
  out.lower_c = opts.lower_c;
  out.upper_c = opts.upper_c;
  out.lower_bound = 1.0 - opts.lower_c * delta;
  out.upper_bound = (1.0 + opts.upper_c * eps) / floor_val;

  const double wk = unit_ball_volume(k);
  const ConstantKForm omega0 = field.constant_part();
  const double vbase = omega0.evaluate(family.base);
  const double window_r = 1.0 + family.epsilon;
  const double dperp = family.base.distance(Vec::Zero(n));
  const double disk2 = sq(window_r) - sq(dperp);
  if (!(disk2 > 0.0)) throw InputError("base plane misses the window ball");
  const double plane_term = vbase * wk * std::pow(std::sqrt(disk2), k);

  const Ball unit{Vec::Zero(n), 1.0};
  const double pointwise_floor = floor_val - opts.pointwise_tol;

  for (std::size_t a = 0; a < family.levels.size(); ++a) {
    const ParamSurface& surf = family.levels[a];
    VolumeReport vr;
    vr.level = static_cast<int>(a);
    vr.r = family.level_scales[a];

    require_resolved(surf, unit);
    double measure = 0.0;
    vr.quadrature_tol = walk_clipped(surf, unit, [&](const Mat& e, double w) {
      measure += w * gram_volume(e);
    });
    vr.measure_unit_ball = measure;
    vr.ahlfors_ratio = measure / wk;

    // window integral: exact plane disk plus the compactly supported
    // deformation difference summed over the whole stored lattice
    const double plane_cell = vbase * std::pow(surf.spacing(), k);
    double diff = 0.0;
    double omega_min = kInf;
    int cc[3];
    for (long ci = 0; ci < surf.cell_count(); ++ci) {
      surf.cell_coords(ci, cc);
      const Mat edges = surf.cell_edges(cc);
      const double value = omega0.evaluate_frame(edges);
      diff += value - plane_cell;
      const double area = gram_volume(edges);
      omega_min = std::min(omega_min, area > 0.0 ? value / area : -1.0);
    }
    vr.integral_window = plane_term + diff;
    vr.omega_min = omega_min;
    vr.pointwise_ok = omega_min >= pointwise_floor;
    vr.upper_ok = measure <= vr.integral_window / floor_val;
    out.levels.push_back(vr);
  }

  double ilo = kInf, ihi = -kInf;
  for (const auto& vr : out.levels) {
    ilo = std::min(ilo, vr.integral_window);
    ihi = std::max(ihi, vr.integral_window);
  }
  if (ilo > 0.0) {
    out.integral_variation = (ihi - ilo) / ilo;
  } else {
    out.integral_variation = ihi == ilo ? 0.0 : kInf;
  }
  out.integrals_stable = out.integral_variation <= opts.variation_tol;
  out.all_pointwise = true;
  out.all_upper = true;
  for (const auto& vr : out.levels) {
    out.all_pointwise = out.all_pointwise && vr.pointwise_ok;
    out.all_upper = out.all_upper && vr.upper_ok;
  }
  return out;
}

CoverageReport projection_covering_check(const ParamSurface& surface,
                                         const OrientedPlane& base,
                                         double delta, double c) {
  const int n = surface.n();
  const int k = surface.k();
  if (base.ambient_dim() != n || base.dim() != k) {
    throw InputError("projection plane shape mismatch with surface");
  }
  CoverageReport rep;
  rep.radius = 1.0 - c * delta;
  if (!(rep.radius > 0.0)) {
    throw InputError("coverage disk is empty: c * delta >= 1");
  }
  rep.cell = 2.0 * surface.spacing();
  const int half = static_cast<int>(std::ceil(rep.radius / rep.cell));
  const long side = 2L * half;
  long total = 1;
  for (int d = 0; d < k; ++d) total *= side;
  std::vector<char> hit(static_cast<std::size_t>(total), 0);

  const RowMat& pos = surface.positions();
  const Mat frame_t = base.frame().transpose();
  for (long j = 0; j < surface.node_count(); ++j) {
    if (pos.row(j).squaredNorm() > 1.0) continue;
    const Vec v = frame_t * (pos.row(j).transpose() - base.base());
    long idx = 0;
    bool in_range = true;
    for (int d = 0; d < k; ++d) {
      const long q = static_cast<long>(std::floor(v[d] / rep.cell)) + half;
      if (q < 0 || q >= side) {
        in_range = false;
        break;
      }
      idx = idx * side + q;
    }
    if (in_range) hit[static_cast<std::size_t>(idx)] = 1;
  }

  // count only cells whose center lies inside the disk
  int qq[3];
  for (long ci = 0; ci < total; ++ci) {
    long t = ci;
    for (int d = k - 1; d >= 0; --d) {
      qq[d] = static_cast<int>(t % side);
      t /= side;
    }
    double c2 = 0.0;
    for (int d = 0; d < k; ++d) {
      c2 += sq((qq[d] - half + 0.5) * rep.cell);
    }
    if (c2 > sq(rep.radius)) continue;
    ++rep.total_cells;
    if (hit[static_cast<std::size_t>(ci)]) {
      ++rep.occupied;
    } else if (rep.missing.size() < 64) {
      Vec center(k);
      for (int d = 0; d < k; ++d) center[d] = (qq[d] - half + 0.5) * rep.cell;
      rep.missing.push_back(center);
    }
  }
  rep.fraction = rep.total_cells > 0
                     ? static_cast<double>(rep.occupied) / rep.total_cells
                     : 0.0;
  return rep;
}

LocalizedResult localized_certify(const PointCloud& cloud,
                                  const CalibrationField& field,
                                  const Ball& ball,
                                  const LocalizedOptions& opts) {
  const int n = cloud.dim();
  if (ball.center.size() != n) {
    throw ContractViolation("ball dimension mismatch with cloud");
  }
  const double s = ball.radius;
  if (!(s > 0.0)) throw InputError("ball radius must be positive");
  const double rdom = cloud.domain_radius();
  const double h = cloud.resolution();
  if (ball.center.norm() + 2.0 * s > rdom + h) {
    throw InputError("doubled ball escapes the data domain");
  }
  const int k = field.constant_part().degree();

  LocalizedResult res;
  res.center = ball.center;
  res.scale = s;

  RowMat shifted = cloud.points();
  for (long i = 0; i < shifted.rows(); ++i) {
    shifted.row(i) = (shifted.row(i) - ball.center.transpose()) / s;
  }
  PointCloud local(std::move(shifted));
  local.set_domain_radius((rdom - ball.center.norm()) / s);
  const CalibrationField local_field = field.localized(ball.center, s);

  BuildOptions build = opts.build;
  const double hl = h / s;
  int a_max = -1;
  if (4.0 * hl <= build.epsilon) {
    a_max = static_cast<int>(
        std::floor(std::log2(build.epsilon / (4.0 * hl)) + 1e-12));
  }
  if (a_max < 2) {
    res.refusal = "resolution supports fewer than three refinement levels";
    return res;
  }
  build.levels = std::min(build.levels, a_max);

  const SurfaceFamily fam = build_family(local, local_field, build);
  res.family_complete = fam.complete;
  res.family_failure = fam.failure;
  if (!fam.complete) {
    res.refusal = "family construction failed at level " +
                  std::to_string(fam.failed_level) + ": " + fam.failure;
    return res;
  }

  res.bounds = calibration_bounds_check(fam, local_field, opts.alpha,
                                        opts.delta, opts.bounds);
  if (res.bounds.levels.size() < 3) {
    res.refusal = "fewer than three levels were built";
    return res;
  }
  double lo = kInf, hi = -kInf;
  for (std::size_t i = res.bounds.levels.size() - 3;
       i < res.bounds.levels.size(); ++i) {
    lo = std::min(lo, res.bounds.levels[i].measure_unit_ball);
    hi = std::max(hi, res.bounds.levels[i].measure_unit_ball);
  }
  res.agreement = lo > 0.0 ? (hi - lo) / lo : kInf;
  if (res.agreement > opts.agreement_tol) {
    res.refusal = "finest levels disagree: relative spread " +
                  num(res.agreement) + " exceeds " + num(opts.agreement_tol);
    return res;
  }

  const double unit_measure = res.bounds.levels.back().measure_unit_ball;
  res.measure = std::pow(s, k) * unit_measure;
  res.ahlfors_ratio = unit_measure / unit_ball_volume(k);
  res.accepted = true;
  return res;
}

}  // namespace calreif
