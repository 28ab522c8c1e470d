#include "calreif/builder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <vector>

#include "calreif/errors.hpp"
#include "calreif/kdtree.hpp"
#include "calreif/parallel.hpp"

namespace calreif {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxGridDim = 6;  // 3^n neighbor scans stay cheap up to here

double sq(double x) { return x * x; }

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

uint64_t mix(uint64_t h, int64_t v) {
  uint64_t x = h ^ (static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ULL +
                    (h << 6) + (h >> 2));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

uint64_t key_of(const int64_t* c, int n) {
  uint64_t h = 0x243f6a8885a308d3ULL;
  for (int d = 0; d < n; ++d) h = mix(h, c[d]);
  return h;
}

// One hash grid per dyadic radius class. Cell side 2^{c+2}/5 bounds the
// fifth-ball conflict reach (r_a + r_b)/5 whenever the query radius does not
// exceed the class radii, so a single ring of neighbors suffices.
struct ClassGrid {
  double side = 0.0;
  double r_hi = 0.0;
  double min_norm = kInf;
  double max_norm = -kInf;
  std::unordered_map<uint64_t, std::vector<int>> buckets;
};

int radius_class(double r) { return static_cast<int>(std::floor(std::log2(r))); }

void grid_insert(std::map<int, ClassGrid>& grids, const double* p, int n,
                 double r, double norm, int id) {
  const int c = radius_class(r);
  auto& g = grids[c];
  if (g.side == 0.0) g.side = std::ldexp(1.0, c + 2) / 5.0;
  g.r_hi = std::max(g.r_hi, r);
  g.min_norm = std::min(g.min_norm, norm);
  g.max_norm = std::max(g.max_norm, norm);
  int64_t cc[32];
  for (int d = 0; d < n; ++d) {
    cc[d] = static_cast<int64_t>(std::floor(p[d] / g.side));
  }
  g.buckets[key_of(cc, n)].push_back(id);
}

// True when a previously inserted ball's fifth-ball meets the query's.
// Valid only while query radii arrive in non-increasing order.
bool grid_conflict(const std::map<int, ClassGrid>& grids, const double* p,
                   int n, double r, double norm, const RowMat& centers,
                   const std::vector<double>& radii) {
  for (const auto& [cls, g] : grids) {
    const double bound = (r + g.r_hi) / 5.0;
    if (norm + bound < g.min_norm || norm - bound > g.max_norm) continue;
    int64_t base[32];
    for (int d = 0; d < n; ++d) {
      base[d] = static_cast<int64_t>(std::floor(p[d] / g.side));
    }
    int64_t cc[32];
    int od[32];
    for (int d = 0; d < n; ++d) od[d] = -1;
    while (true) {
      for (int d = 0; d < n; ++d) cc[d] = base[d] + od[d];
      auto it = g.buckets.find(key_of(cc, n));
      if (it != g.buckets.end()) {
        for (int j : it->second) {
          double d2 = 0.0;
          for (int d = 0; d < n; ++d) d2 += sq(p[d] - centers(j, d));
          if (d2 < sq((r + radii[j]) / 5.0)) return true;
        }
      }
      int d = 0;
      while (d < n && od[d] == 1) od[d++] = -1;
      if (d == n) break;
      ++od[d];
    }
  }
  return false;
}

// Gram-Schmidt with a refinement pass; throws on a collapsed span.
Mat gs_frame(const Mat& edges) {
  const int k = static_cast<int>(edges.cols());
  Mat f = edges;
  for (int j = 0; j < k; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i < j; ++i) {
        f.col(j) -= f.col(i).dot(f.col(j)) * f.col(i);
      }
    }
    const double nn = f.col(j).norm();
    if (!(nn > 1e-8 * edges.col(j).norm()) || !(nn > 0.0)) {
      throw ContractViolation("degenerate cell frame");
    }
    f.col(j) /= nn;
  }
  return f;
}

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

// Exact squared distance from p to the multilinear image of the lattice
// cell at base coords c: clamped Gauss-Newton in the unit cell box. The
// cells are tiny and near-affine, so a handful of steps saturates.
double cell_distance2(const ParamSurface& surf, const int* c, const double* p) {
  const int k = surf.k();
  const int n = surf.n();
  const RowMat& pos = surf.positions();
  const int corners = 1 << k;
  long cidx[8];
  int cc[3];
  for (int m = 0; m < corners; ++m) {
    for (int d = 0; d < k; ++d) cc[d] = c[d] + ((m >> d) & 1);
    cidx[m] = surf.node_index(cc);
  }
  double t[3];
  for (int d = 0; d < k; ++d) t[d] = 0.5;
  double f[32], J[32 * 3], w[8], dw[8];
  for (int it = 0; it < 10; ++it) {
    for (int m = 0; m < corners; ++m) {
      double acc = 1.0;
      for (int d = 0; d < k; ++d) acc *= ((m >> d) & 1) ? t[d] : 1.0 - t[d];
      w[m] = acc;
    }
    for (int i = 0; i < n; ++i) f[i] = 0.0;
    for (int m = 0; m < corners; ++m) {
      const double* row = pos.data() + cidx[m] * n;
      for (int i = 0; i < n; ++i) f[i] += w[m] * row[i];
    }
    for (int j = 0; j < k; ++j) {
      for (int m = 0; m < corners; ++m) {
        double acc = ((m >> j) & 1) ? 1.0 : -1.0;
        for (int d = 0; d < k; ++d) {
          if (d != j) acc *= ((m >> d) & 1) ? t[d] : 1.0 - t[d];
        }
        dw[m] = acc;
      }
      double* col = J + j * n;
      for (int i = 0; i < n; ++i) col[i] = 0.0;
      for (int m = 0; m < corners; ++m) {
        const double* row = pos.data() + cidx[m] * n;
        for (int i = 0; i < n; ++i) col[i] += dw[m] * row[i];
      }
    }
    // normal equations, k x k with a tiny ridge
    double H[9], g[3];
    for (int a = 0; a < k; ++a) {
      g[a] = 0.0;
      for (int i = 0; i < n; ++i) g[a] += J[a * n + i] * (f[i] - p[i]);
      for (int b = a; b < k; ++b) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += J[a * n + i] * J[b * n + i];
        H[a * k + b] = acc;
        H[b * k + a] = acc;
      }
      H[a * k + a] += 1e-14;
    }
    double dt[3];
    for (int a = 0; a < k; ++a) dt[a] = -g[a];
    for (int a = 0; a < k; ++a) {  // gaussian elimination, partial pivot
      int piv = a;
      for (int b = a + 1; b < k; ++b) {
        if (std::abs(H[b * k + a]) > std::abs(H[piv * k + a])) piv = b;
      }
      if (piv != a) {
        for (int j = 0; j < k; ++j) std::swap(H[a * k + j], H[piv * k + j]);
        std::swap(dt[a], dt[piv]);
      }
      const double diag = H[a * k + a];
      if (std::abs(diag) < 1e-300) return kInf;
      for (int b = a + 1; b < k; ++b) {
        const double m = H[b * k + a] / diag;
        for (int j = a; j < k; ++j) H[b * k + j] -= m * H[a * k + j];
        dt[b] -= m * dt[a];
      }
    }
    for (int a = k - 1; a >= 0; --a) {
      for (int j = a + 1; j < k; ++j) dt[a] -= H[a * k + j] * dt[j];
      dt[a] /= H[a * k + a];
    }
    double moved = 0.0;
    for (int d = 0; d < k; ++d) {
      const double nt = std::min(1.0, std::max(0.0, t[d] + dt[d]));
      moved = std::max(moved, std::abs(nt - t[d]));
      t[d] = nt;
    }
    if (moved < 1e-12) break;
  }
  for (int m = 0; m < corners; ++m) {
    double acc = 1.0;
    for (int d = 0; d < k; ++d) acc *= ((m >> d) & 1) ? t[d] : 1.0 - t[d];
    w[m] = acc;
  }
  double out = 0.0;
  for (int i = 0; i < n; ++i) {
    double fi = 0.0;
    for (int m = 0; m < corners; ++m) fi += w[m] * pos(cidx[m], i);
    out += sq(fi - p[i]);
  }
  return out;
}

// Distance from a point to the surface: the base-plane projection picks the
// containing cell, the 3^k ring around it absorbs tilt.
double point_to_surface2(const ParamSurface& surf, const Vec& p) {
  const int k = surf.k();
  const int M = surf.half_width();
  const Vec u = surf.base_plane().frame().transpose() * (p - surf.base_plane().base());
  int cell[3];
  surf.locate_cell(u, cell);
  double best = kInf;
  int off[3] = {0, 0, 0};
  for (int d = 0; d < k; ++d) off[d] = -1;
  while (true) {
    int c[3];
    for (int d = 0; d < k; ++d) {
      c[d] = std::min(M - 1, std::max(-M, cell[d] + off[d]));
    }
    best = std::min(best, cell_distance2(surf, c, p.data()));
    int d = 0;
    while (d < k && off[d] == 1) off[d++] = -1;
    if (d == k) break;
    ++off[d];
  }
  return best;
}

}  // namespace

ScaleFunction::ScaleFunction(double r_in, double eps) : r(r_in), epsilon(eps) {
  if (!(r > 0.0) || !(epsilon >= r)) {
    throw InputError("scale function needs 0 < r <= epsilon");
  }
}

double ScaleFunction::operator()(double t) const {
  if (t <= 1.0) return r;
  if (t >= 1.0 + epsilon) return epsilon;
  return r + (epsilon - r) * (t - 1.0) / epsilon;
}

bool VitaliCover::verify_disjoint_fifths() const {
  const int m = size();
  const int n = static_cast<int>(centers.cols());
  if (m == 0) return true;
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (radii[a] != radii[b]) return radii[a] > radii[b];
    return a < b;
  });
  if (n > kMaxGridDim) {
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        const double lim = (radii[a] + radii[b]) / 5.0;
        if ((centers.row(a) - centers.row(b)).squaredNorm() < sq(lim)) {
          return false;
        }
      }
    }
    return true;
  }
  std::map<int, ClassGrid> grids;
  std::vector<double> pt(n);
  for (int oi : order) {
    for (int d = 0; d < n; ++d) pt[d] = centers(oi, d);
    const double norm = centers.row(oi).norm();
    if (grid_conflict(grids, pt.data(), n, radii[oi], norm, centers, radii)) {
      return false;
    }
    grid_insert(grids, pt.data(), n, radii[oi], norm, oi);
  }
  return true;
}

bool VitaliCover::verify_covering(const PointCloud& cloud,
                                  double epsilon) const {
  const int n = cloud.dim();
  if (size() == 0) return false;
  if (static_cast<int>(centers.cols()) != n) {
    throw ContractViolation("cover dimension mismatch with cloud");
  }
  struct Group {
    std::vector<int> ids;
    RowMat buf;
    KdTree tree;
    double r_hi = 0.0;
  };
  std::map<int, Group> groups;
  for (int i = 0; i < size(); ++i) {
    auto& g = groups[radius_class(radii[i])];
    g.ids.push_back(i);
    g.r_hi = std::max(g.r_hi, radii[i]);
  }
  for (auto& [cls, g] : groups) {
    g.buf.resize(static_cast<long>(g.ids.size()), n);
    for (std::size_t j = 0; j < g.ids.size(); ++j) {
      g.buf.row(static_cast<long>(j)) = centers.row(g.ids[j]);
    }
    g.tree.build(g.buf.data(), g.ids.size(), n);
  }
  const double reach = 1.0 + epsilon;
  const auto& pts = cloud.points();
  for (int i = 0; i < cloud.size(); ++i) {
    if (pts.row(i).norm() > reach) continue;
    bool covered = false;
    for (const auto& [cls, g] : groups) {
      const auto hits = g.tree.radius(pts.row(i).data(), g.r_hi);
      for (int hid : hits) {
        const int j = g.ids[hid];
        if ((pts.row(i) - centers.row(j)).squaredNorm() <= sq(radii[j])) {
          covered = true;
          break;
        }
      }
      if (covered) break;
    }
    if (!covered) return false;
  }
  return true;
}

VitaliCover vitali_cover(const PointCloud& cloud, const ScaleFunction& fn,
                         const CalibrationField& field, int k) {
  const int n = cloud.dim();
  if (k < 1 || k >= n) {
    throw InputError("cover plane dimension must satisfy 1 <= k < n");
  }
  if (field.constant_part().ambient_dim() != n ||
      field.constant_part().degree() != k) {
    throw InputError("calibration field shape mismatch in cover construction");
  }
  const double h = cloud.resolution();
  if (h > fn.r / 4.0) {
    throw ResolutionError("cloud resolution " + num(h) +
                          " exceeds a quarter of the ball radius " +
                          num(fn.r));
  }

  const auto& pts = cloud.points();
  const double reach = 1.0 + fn.epsilon;
  std::vector<int> cand;
  std::vector<double> cnorm, crad;
  for (int i = 0; i < cloud.size(); ++i) {
    const double norm = pts.row(i).norm();
    if (norm <= reach) {
      cand.push_back(i);
      cnorm.push_back(norm);
      crad.push_back(fn(norm));
    }
  }
  if (cand.empty()) {
    throw InputError("no cloud points inside the covering window");
  }
  std::vector<int> order(cand.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (crad[a] != crad[b]) return crad[a] > crad[b];
    return cand[a] < cand[b];
  });

  VitaliCover cov;
  std::vector<double> pt(n);
  // grow the gathered-center matrix geometrically
  long cap = 256;
  cov.centers.resize(cap, n);
  const bool use_grid = n <= kMaxGridDim;
  std::map<int, ClassGrid> grids;
  for (int oi : order) {
    const int row = cand[oi];
    const double r_y = crad[oi];
    for (int d = 0; d < n; ++d) pt[d] = pts(row, d);
    bool conflict = false;
    if (use_grid) {
      conflict = grid_conflict(grids, pt.data(), n, r_y, cnorm[oi],
                               cov.centers, cov.radii);
    } else {
      for (int j = 0; j < cov.size(); ++j) {
        const double lim = (r_y + cov.radii[j]) / 5.0;
        if ((pts.row(row) - cov.centers.row(j)).squaredNorm() < sq(lim)) {
          conflict = true;
          break;
        }
      }
    }
    if (conflict) continue;
    const int id = cov.size();
    if (id == cap) {
      cap *= 2;
      cov.centers.conservativeResize(cap, n);
    }
    cov.centers.row(id) = pts.row(row);
    cov.rows.push_back(row);
    cov.radii.push_back(r_y);
    if (use_grid) grid_insert(grids, pt.data(), n, r_y, cnorm[oi], id);
  }
  cov.centers.conservativeResize(cov.size(), n);

  cov.planes.reserve(cov.rows.size());
  for (int i = 0; i < cov.size(); ++i) {
    const Vec center = cov.centers.row(i).transpose();
    const auto inside = cloud.points_in_ball(Ball{center, cov.radii[i]});
    if (static_cast<int>(inside.size()) < k + 1) {
      throw ResolutionError("cover ball at row " + std::to_string(cov.rows[i]) +
                            " holds fewer than k+1 points");
    }
    OrientedPlane plane = pca_plane(cloud, inside, k);
    if (field.at(center).evaluate(plane) < 0.0) plane.flip_orientation();
    cov.planes.push_back(std::move(plane));
  }
  return cov;
}

ParamSurface::ParamSurface(OrientedPlane base, double spacing,
                           double window_radius, double identity_radius)
    : base_(std::move(base)),
      spacing_(spacing),
      window_radius_(window_radius),
      identity_radius_(identity_radius) {
  if (!(spacing_ > 0.0)) throw InputError("surface spacing must be positive");
  if (!(identity_radius_ > 1.0) || !(window_radius_ >= identity_radius_)) {
    throw InputError("surface window must contain the identity collar");
  }
  const int k = base_.dim();
  if (k < 1 || k > 3) {
    throw InputError("stored surfaces support plane dimension 1..3");
  }
  M_ = static_cast<int>(std::ceil(window_radius_ / spacing_ - 1e-12));
  if (M_ < 1) M_ = 1;
  const long side = 2L * M_ + 1;
  long count = 1;
  for (int d = 0; d < k; ++d) {
    if (count > (1L << 40) / side) {
      throw InputError("surface lattice too large");
    }
    count *= side;
  }
  positions_.resize(count, n());
  for (long idx = 0; idx < count; ++idx) {
    positions_.row(idx) = embed(node_coords(idx)).transpose();
  }
}

long ParamSurface::cell_count() const {
  long count = 1;
  for (int d = 0; d < k(); ++d) count *= 2L * M_;
  return count;
}

Vec ParamSurface::node_coords(long idx) const {
  const long side = 2L * M_ + 1;
  Vec u(k());
  for (int d = k() - 1; d >= 0; --d) {
    u[d] = static_cast<double>(idx % side - M_) * spacing_;
    idx /= side;
  }
  return u;
}

long ParamSurface::node_index(const int* cell) const {
  const long side = 2L * M_ + 1;
  long idx = 0;
  for (int d = 0; d < k(); ++d) idx = idx * side + (cell[d] + M_);
  return idx;
}

Vec ParamSurface::embed(const Vec& u) const {
  return base_.base() + base_.frame() * u;
}

Vec ParamSurface::eval(const Vec& u) const {
  if (u.size() != k()) throw ContractViolation("surface coordinate mismatch");
  const double limit = M_ * spacing_;
  for (int d = 0; d < k(); ++d) {
    if (std::abs(u[d]) > limit) return embed(u);
  }
  int c[3];
  double t[3];
  for (int d = 0; d < k(); ++d) {
    const double s = u[d] / spacing_;
    int cd = static_cast<int>(std::floor(s));
    cd = std::min(std::max(cd, -M_), M_ - 1);
    c[d] = cd;
    t[d] = s - cd;
  }
  Vec out = Vec::Zero(n());
  const int corners = 1 << k();
  int cc[3];
  for (int m = 0; m < corners; ++m) {
    double w = 1.0;
    for (int d = 0; d < k(); ++d) {
      const int bit = (m >> d) & 1;
      w *= bit ? t[d] : 1.0 - t[d];
      cc[d] = c[d] + bit;
    }
    if (w == 0.0) continue;
    out += w * positions_.row(node_index(cc)).transpose();
  }
  return out;
}

void ParamSurface::cell_coords(long cell_idx, int* out) const {
  const long side = 2L * M_;
  for (int d = k() - 1; d >= 0; --d) {
    out[d] = static_cast<int>(cell_idx % side) - M_;
    cell_idx /= side;
  }
}

Mat ParamSurface::cell_edges(const int* cell) const {
  Mat e(n(), k());
  const long base_idx = node_index(cell);
  int nb[3];
  for (int d = 0; d < k(); ++d) {
    for (int i = 0; i < k(); ++i) nb[i] = cell[i];
    nb[d] += 1;
    e.col(d) =
        (positions_.row(node_index(nb)) - positions_.row(base_idx)).transpose();
  }
  return e;
}

void ParamSurface::locate_cell(const Vec& u, int* out) const {
  for (int d = 0; d < k(); ++d) {
    int cd = static_cast<int>(std::floor(u[d] / spacing_));
    out[d] = std::min(std::max(cd, -M_), M_ - 1);
  }
}

ParamSurface glue_step(const ParamSurface& surface, const VitaliCover& cover,
                       const GlueOptions& opts) {
  const int n = surface.n();
  if (cover.size() == 0) return surface;
  if (static_cast<int>(cover.centers.cols()) != n) {
    throw ContractViolation("cover dimension mismatch with surface");
  }
  const double eps_eff = surface.identity_radius() - 1.0;
  const double hold = 1.0 + opts.taper_hold * eps_eff;
  const double end = 1.0 + opts.taper_end * eps_eff;
  if (!(end > hold)) throw InputError("taper window is empty");

  // tilt guard: every cover plane against the current frame at its center
  {
    const OrientedPlane& bp = surface.base_plane();
    int cell[3];
    for (int i = 0; i < cover.size(); ++i) {
      const Vec u = bp.frame().transpose() *
                    (cover.centers.row(i).transpose() - bp.base());
      surface.locate_cell(u, cell);
      Mat frame;
      try {
        frame = gs_frame(surface.cell_edges(cell));
      } catch (const ContractViolation&) {
        throw GlueError("surface cell collapsed at a cover ball", i, 1.0);
      }
      const double d = grassmann_distance(
          OrientedPlane(Vec::Zero(n), frame), cover.planes[i]);
      if (d > opts.grassmann_guard) {
        throw GlueError("cover plane tilt exceeds the Grassmann guard", i, d);
      }
    }
  }

  struct Bin {
    std::vector<int> ids;
    RowMat buf;
    KdTree tree;
    double r_hi = 0.0;
  };
  std::map<int, Bin> bins;
  for (int i = 0; i < cover.size(); ++i) {
    auto& b = bins[radius_class(cover.radii[i])];
    b.ids.push_back(i);
    b.r_hi = std::max(b.r_hi, cover.radii[i]);
  }
  for (auto& [cls, b] : bins) {
    b.buf.resize(static_cast<long>(b.ids.size()), n);
    for (std::size_t j = 0; j < b.ids.size(); ++j) {
      b.buf.row(static_cast<long>(j)) = cover.centers.row(b.ids[j]);
    }
    b.tree.build(b.buf.data(), b.ids.size(), n);
  }

  ParamSurface out = surface;
  RowMat& newpos = out.positions();
  const RowMat& oldpos = surface.positions();
  parallel_for(static_cast<std::size_t>(surface.node_count()),
               [&](std::size_t j) {
                 const Vec u = surface.node_coords(static_cast<long>(j));
                 const double t = u.norm();
                 if (t >= end) return;  // untouched: bit-exact copy
                 const double chi =
                     t <= hold ? 1.0 : smoothstep((end - t) / (end - hold));
                 const Vec x = oldpos.row(static_cast<long>(j)).transpose();
                 Vec drift = Vec::Zero(n);
                 double total = 0.0;
                 for (const auto& [cls, b] : bins) {
                   const auto hits =
                       b.tree.radius(x.data(), opts.blend_factor * b.r_hi);
                   for (int hid : hits) {
                     const int bi = b.ids[hid];
                     const double rr = sq(opts.blend_factor * cover.radii[bi]);
                     const double d2 =
                         (x - cover.centers.row(bi).transpose()).squaredNorm();
                     if (d2 >= rr) continue;
                     const double w = sq(1.0 - d2 / rr);
                     total += w;
                     drift += w * (cover.planes[bi].project(x) - x);
                   }
                 }
                 if (total > 0.0) {
                   newpos.row(static_cast<long>(j)) =
                       (x + (chi / total) * drift).transpose();
                 }
               });
  return out;
}

ParamSurface SurfaceFamily::interpolate(double r) const {
  if (levels.empty()) throw InputError("family holds no surfaces");
  if (r >= level_scales.front()) return levels.front();
  if (r <= level_scales.back()) return levels.back();
  std::size_t a = 0;
  while (a + 1 < level_scales.size() && level_scales[a + 1] > r) ++a;
  if (level_scales[a + 1] == r) return levels[a + 1];
  const double t =
      (level_scales[a] - r) / (level_scales[a] - level_scales[a + 1]);
  ParamSurface out = levels[a + 1];
  RowMat& pos = out.positions();
  for (long j = 0; j < out.node_count(); ++j) {
    const Vec u = out.node_coords(j);
    const Vec fine = pos.row(j).transpose();
    pos.row(j) = ((1.0 - t) * levels[a].eval(u) + t * fine).transpose();
  }
  return out;
}

SurfaceFamily build_family(const PointCloud& cloud,
                           const CalibrationField& field,
                           const BuildOptions& opts) {
  const int n = cloud.dim();
  const int k = field.constant_part().degree();
  if (field.constant_part().ambient_dim() != n) {
    throw InputError("calibration field dimension mismatch with cloud");
  }
  if (!(opts.epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (opts.levels < 0) throw InputError("level count must be nonnegative");

  const double eps = opts.epsilon;
  const double window = 1.0 + 2.0 * eps;
  const double id_radius = 1.0 + eps;

  const Vec origin = Vec::Zero(n);
  const ConstantKForm at_origin = field.at(origin);
  const PlaneFit fit = best_fit_plane(cloud, Ball{origin, id_radius}, k,
                                      FitMode::Symmetric, opts.base_fit,
                                      &at_origin);

  SurfaceFamily fam;
  fam.base = fit.plane;
  fam.epsilon = eps;

  long m_cap = static_cast<long>(
      std::floor((std::pow(static_cast<double>(opts.node_budget), 1.0 / k) -
                  1.0) /
                 2.0));
  if (m_cap < 8) m_cap = 8;
  const auto spacing_for = [&](double r) {
    return std::max(r / opts.grid_divisor,
                    window / static_cast<double>(m_cap));
  };

  fam.level_scales.push_back(eps);
  fam.levels.emplace_back(fam.base, spacing_for(eps), window, id_radius);
  try {
    fam.covers.push_back(
        vitali_cover(cloud, ScaleFunction(eps, eps), field, k));
  } catch (const ResolutionError& e) {
    fam.complete = false;
    fam.failed_level = 0;
    fam.failure = e.what();
    return fam;
  }

  for (int a = 1; a <= opts.levels; ++a) {
    const double r = eps * std::ldexp(1.0, -a);
    try {
      fam.covers.push_back(
          vitali_cover(cloud, ScaleFunction(r, eps), field, k));
    } catch (const ResolutionError& e) {
      fam.complete = false;
      fam.failed_level = a;
      fam.failure = e.what();
      return fam;
    }
    ParamSurface next(fam.base, spacing_for(r), window, id_radius);
    const ParamSurface& prev = fam.levels.back();
    RowMat& pos = next.positions();
    parallel_for(static_cast<std::size_t>(next.node_count()),
                 [&](std::size_t j) {
                   const Vec u = next.node_coords(static_cast<long>(j));
                   if (u.norm() >= id_radius) return;  // already exact
                   pos.row(static_cast<long>(j)) = prev.eval(u).transpose();
                 });
    try {
      fam.levels.push_back(glue_step(next, fam.covers.back(), opts.glue));
    } catch (const GlueError& e) {
      fam.complete = false;
      fam.failed_level = a;
      fam.failure = std::string(e.what()) + " (ball " +
                    std::to_string(e.ball_index) + ", distance " +
                    num(e.grassmann) + ")";
      return fam;
    }
    fam.level_scales.push_back(r);
  }
  fam.complete = true;
  return fam;
}

FamilyReport check_properties(const SurfaceFamily& fam,
                              const PointCloud& cloud,
                              const CalibrationField& field, double delta,
                              const CheckOptions& opts) {
  if (fam.levels.empty()) throw InputError("family holds no surfaces");
  if (!(delta > 0.0)) throw InputError("delta must be positive");
  if (fam.covers.size() < fam.levels.size()) {
    throw InputError("family is missing covers for its levels");
  }
  const int n = fam.base.ambient_dim();
  const int k = fam.base.dim();
  if (cloud.dim() != n) throw InputError("cloud dimension mismatch");
  const double h = cloud.resolution();

  FamilyReport rep;
  rep.delta = delta;
  rep.eps_field = field.epsilon();
  rep.complete = fam.complete;

  // cloud restricted to the unit ball, shared by every level
  const auto& pts = cloud.points();
  std::vector<int> core_rows;
  for (int i = 0; i < cloud.size(); ++i) {
    if (pts.row(i).squaredNorm() <= 1.0) core_rows.push_back(i);
  }
  if (core_rows.empty()) {
    throw InputError("no cloud points inside the unit ball");
  }
  RowMat core(static_cast<long>(core_rows.size()), n);
  for (std::size_t i = 0; i < core_rows.size(); ++i) {
    core.row(static_cast<long>(i)) = pts.row(core_rows[i]);
  }
  KdTree core_tree;
  core_tree.build(core.data(), core_rows.size(), n);

  const double threshold = field.epsilon() / 2.0;
  const bool constant_field = !field.has_perturbation();
  const ConstantKForm omega0 = field.constant_part();

  for (std::size_t a = 0; a < fam.levels.size(); ++a) {
    LevelCheck lc;
    lc.level = static_cast<int>(a);
    const double r = fam.level_scales[a];
    lc.r = r;
    const double delta_a = a < opts.level_deltas.size()
                               ? std::max(opts.level_deltas[a], 1e-15)
                               : delta;
    const ParamSurface& surf = fam.levels[a];

    // two-sided distance to the cloud inside the unit ball, sampled at a
    // spacing proportional to the level scale
    {
      const double s = r / opts.sample_divisor;
      const int range = static_cast<int>(std::floor(1.2 / s));
      std::vector<double> samples;
      Vec u(k);
      int idx[3];
      for (int d = 0; d < k; ++d) idx[d] = -range;
      while (true) {
        double un2 = 0.0;
        for (int d = 0; d < k; ++d) {
          u[d] = idx[d] * s;
          un2 += sq(u[d]);
        }
        if (un2 <= 1.44) {
          const Vec p = surf.eval(u);
          if (p.squaredNorm() <= 1.0) {
            for (int d = 0; d < n; ++d) samples.push_back(p[d]);
          }
        }
        int d = 0;
        while (d < k && idx[d] == range) idx[d++] = -range;
        if (d == k) break;
        ++idx[d];
      }
      const long m = static_cast<long>(samples.size()) / n;
      if (m == 0) throw InputError("surface misses the unit ball");
      double worst2 = 0.0;
      for (long i = 0; i < m; ++i) {
        worst2 = std::max(worst2, core_tree.nearest(&samples[i * n]).dist2);
      }
      const double d_sc = std::max(0.0, std::sqrt(worst2) - h);
      // back side: exact distance to the multilinear patches, so the check
      // measures geometry rather than the lattice pitch
      std::vector<double> back(static_cast<std::size_t>(core.rows()));
      parallel_for(static_cast<std::size_t>(core.rows()), [&](std::size_t i) {
        const Vec p = core.row(static_cast<long>(i)).transpose();
        back[i] = point_to_surface2(surf, p);
      });
      double back2 = 0.0;
      for (double v : back) back2 = std::max(back2, v);
      lc.hausdorff_to_cloud = std::max(d_sc, std::sqrt(back2));
      lc.p3_ratio = lc.hausdorff_to_cloud / (delta_a * r);
    }

    // tilt drift and calibration positivity over the stored cells
    {
      const VitaliCover& cov = fam.covers[a];
      KdTree ctree;
      ctree.build(cov.centers.data(), static_cast<std::size_t>(cov.size()), n);
      double drift = 0.0;
      double omega_min = kInf;
      long positive = 0;
      const long cells = surf.cell_count();
      int cc[3];
      for (long ci = 0; ci < cells; ++ci) {
        surf.cell_coords(ci, cc);
        const Mat edges = surf.cell_edges(cc);
        Mat frame;
        try {
          frame = gs_frame(edges);
        } catch (const ContractViolation&) {
          omega_min = std::min(omega_min, -1.0);
          continue;
        }
        double w;
        if (constant_field) {
          w = omega0.evaluate_frame(frame);
        } else {
          Vec center =
              surf.positions().row(surf.node_index(cc)).transpose();
          for (int d = 0; d < k; ++d) center += 0.5 * edges.col(d);
          w = field.at(center).evaluate_frame(frame);
        }
        omega_min = std::min(omega_min, w);
        if (w > threshold) ++positive;
        const double corner2 =
            surf.positions().row(surf.node_index(cc)).squaredNorm();
        if (corner2 <= 1.0 && cov.size() > 0) {
          const auto hit =
              ctree.nearest(surf.positions().row(surf.node_index(cc)).data());
          const double g = grassmann_distance(OrientedPlane(Vec::Zero(n), frame),
                                              cov.planes[hit.index]);
          drift = std::max(drift, g);
        }
      }
      lc.grassmann_drift = drift;
      lc.p4_ratio = drift / delta_a;
      lc.omega_min = omega_min == kInf ? 0.0 : omega_min;
      lc.positive_fraction =
          cells > 0 ? static_cast<double>(positive) / cells : 0.0;
    }

    // stored nodes beyond the identity radius must be exact embeddings
    {
      bool ident = true;
      for (long j = 0; j < surf.node_count() && ident; ++j) {
        const Vec u = surf.node_coords(j);
        if (u.norm() < surf.identity_radius()) continue;
        const Vec e = surf.embed(u);
        for (int d = 0; d < n; ++d) {
          if (surf.positions()(j, d) != e[d]) {
            ident = false;
            break;
          }
        }
      }
      lc.identity_outside = ident;
    }

    // velocity toward the next level, sampled at the finer level's spacing
    if (a + 1 < fam.levels.size()) {
      const ParamSurface& finer = fam.levels[a + 1];
      const double r2 = fam.level_scales[a + 1];
      const double s = r2 / opts.sample_divisor;
      const double rad = surf.identity_radius();
      const int range = static_cast<int>(std::floor(rad / s));
      Vec u(k);
      int idx[3];
      for (int d = 0; d < k; ++d) idx[d] = -range;
      double v2 = 0.0;
      while (true) {
        double un2 = 0.0;
        for (int d = 0; d < k; ++d) {
          u[d] = idx[d] * s;
          un2 += sq(u[d]);
        }
        if (un2 <= sq(rad)) {
          // measure only where the surface sits inside the unit ball, as the
          // drift check does; the collar beyond carries glue scaffolding only
          const Vec p0 = surf.eval(u);
          if (p0.squaredNorm() <= 1.0) {
            v2 = std::max(v2, (finer.eval(u) - p0).squaredNorm());
          }
        }
        int d = 0;
        while (d < k && idx[d] == range) idx[d++] = -range;
        if (d == k) break;
        ++idx[d];
      }
      lc.velocity = std::sqrt(v2);
      lc.p5_ratio = lc.velocity / ((r - r2) * delta_a);
    }

    lc.combined_ratio = std::max(lc.p3_ratio, lc.p4_ratio);
    if (a + 1 < fam.levels.size()) {
      lc.combined_ratio = std::max(lc.combined_ratio, lc.p5_ratio);
    }
    rep.levels.push_back(lc);
  }

  rep.constant = 0.0;
  rep.identity_outside_all = true;
  rep.positivity_all = true;
  for (const auto& lc : rep.levels) {
    rep.constant = std::max(rep.constant, lc.combined_ratio);
    rep.identity_outside_all = rep.identity_outside_all && lc.identity_outside;
    rep.positivity_all = rep.positivity_all && lc.positive_fraction == 1.0;
  }
  // The band is taken over levels carrying all three components; the last
  // level has no velocity term, so its smaller combined ratio says nothing
  // about drift across levels.
  double hi = 0.0, lo = kInf;
  for (std::size_t a = 0; a + 1 < rep.levels.size(); ++a) {
    hi = std::max(hi, rep.levels[a].combined_ratio);
    lo = std::min(lo, rep.levels[a].combined_ratio);
  }
  if (rep.levels.size() <= 1) {
    rep.stability = 1.0;
  } else {
    rep.stability = lo > 0.0 ? hi / lo : kInf;
  }
  return rep;
}

}  // namespace calreif
