#include "calreif/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "calreif/errors.hpp"
#include "calreif/measure.hpp"

namespace calreif {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// Sum of a few fixed-frequency cosine modes per output dimension, with the
// amplitude split so the vector sup norm stays below `amp`.
struct SmoothField {
  int in_dim = 0;
  int out_dim = 0;
  int modes = 0;
  double amp_each = 0.0;
  std::vector<Vec> wave;       // out_dim * modes entries
  std::vector<double> phase;

  static SmoothField make(int in_dim, int out_dim, double amp, double freq,
                          int modes, std::uint64_t seed) {
    SmoothField f;
    f.in_dim = in_dim;
    f.out_dim = out_dim;
    f.modes = modes;
    f.amp_each = amp / (std::sqrt(static_cast<double>(out_dim)) * modes);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int m = 0; m < out_dim; ++m) {
      for (int t = 0; t < modes; ++t) {
        Vec w(in_dim);
        double norm2 = 0.0;
        do {
          for (int d = 0; d < in_dim; ++d) w(d) = gauss(rng);
          norm2 = w.squaredNorm();
        } while (norm2 < 1e-12);
        f.wave.push_back(w * (freq / std::sqrt(norm2)));
        f.phase.push_back(uniform(rng) * kTau);
      }
    }
    return f;
  }

  Vec value(const Vec& u) const {
    Vec out = Vec::Zero(out_dim);
    for (int m = 0; m < out_dim; ++m) {
      for (int t = 0; t < modes; ++t) {
        const std::size_t idx = static_cast<std::size_t>(m * modes + t);
        out(m) += amp_each * std::cos(wave[idx].dot(u) + phase[idx]);
      }
    }
    return out;
  }

  Mat jacobian(const Vec& u) const {
    Mat J = Mat::Zero(out_dim, in_dim);
    for (int m = 0; m < out_dim; ++m) {
      for (int t = 0; t < modes; ++t) {
        const std::size_t idx = static_cast<std::size_t>(m * modes + t);
        J.row(m) -= amp_each * std::sin(wave[idx].dot(u) + phase[idx]) *
                    wave[idx].transpose();
      }
    }
    return J;
  }
};

double operator_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig(m.transpose() * m);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

// Lattice g*Z^k clipped to the closed disk of radius R, lex order.
std::vector<Vec> disk_lattice(int k, double g, double R) {
  const int M = static_cast<int>(std::floor(R / g + 1e-12));
  std::vector<Vec> out;
  std::vector<int> odo(static_cast<std::size_t>(k), -M);
  while (true) {
    Vec u(k);
    for (int d = 0; d < k; ++d) u(d) = odo[static_cast<std::size_t>(d)] * g;
    if (u.squaredNorm() <= R * R) out.push_back(std::move(u));
    int d = k - 1;
    while (d >= 0 && odo[static_cast<std::size_t>(d)] == M) {
      odo[static_cast<std::size_t>(d)] = -M;
      --d;
    }
    if (d < 0) break;
    ++odo[static_cast<std::size_t>(d)];
  }
  return out;
}

PointCloud cloud_from_rows(const std::vector<Vec>& rows, int n,
                           double domain_radius) {
  if (rows.size() < 2) throw InputError("generator produced fewer than two points");
  RowMat m(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  PointCloud cloud(std::move(m));
  cloud.set_domain_radius(domain_radius);
  return cloud;
}

GeneratedCloud generate_graph(const GeneratorSpec& spec) {
  const int n = spec.n, k = spec.k;
  if (k < 1 || k >= n) throw InputError("graph generator needs 1 <= k < n");
  Mat A = spec.gradient;
  if (A.size() == 0) A = Mat::Zero(n - k, k);
  if (A.rows() != n - k || A.cols() != k) {
    throw InputError("graph gradient must be (n-k) x k");
  }
  const bool noisy = spec.noise_amplitude > 0.0;
  SmoothField field;
  if (noisy) {
    if (spec.noise_modes < 1) throw InputError("noise needs at least one mode");
    field = SmoothField::make(k, n - k, spec.noise_amplitude,
                              spec.noise_frequency, spec.noise_modes, spec.seed);
  }

  const double gb_prior =
      operator_norm(A) + (noisy ? spec.noise_amplitude * spec.noise_frequency : 0.0);
  const double g = 0.995 * spec.h / std::sqrt(1.0 + gb_prior * gb_prior);
  const std::vector<Vec> lattice = disk_lattice(k, g, spec.domain_radius);

  std::vector<Vec> rows;
  rows.reserve(lattice.size());
  double grad_bound = 0.0;
  double min_calib = 1.0;
  for (const Vec& u : lattice) {
    Vec p(n);
    p.head(k) = u;
    Vec f = A * u;
    if (noisy) f += field.value(u);
    p.tail(n - k) = f;
    rows.push_back(std::move(p));

    Mat Df = A;
    if (noisy) Df += field.jacobian(u);
    grad_bound = std::max(grad_bound, operator_norm(Df));
    const double det = (Mat::Identity(k, k) + Df.transpose() * Df).determinant();
    min_calib = std::min(min_calib, 1.0 / std::sqrt(det));
  }

  GeneratedCloud out(cloud_from_rows(rows, n, spec.domain_radius));
  out.gradient_bound = grad_bound;
  out.predicted_min_calibration = min_calib;
  if (!noisy) {
    const double det = (Mat::Identity(k, k) + A.transpose() * A).determinant();
    out.true_measure = unit_ball_volume(k) *
                       std::pow(spec.domain_radius, k) * std::sqrt(det);
  }
  Vec base0 = Vec::Zero(n);
  Mat Df0 = A;
  if (noisy) {
    base0.tail(n - k) = field.value(Vec::Zero(k));
    Df0 += field.jacobian(Vec::Zero(k));
  }
  Mat span(n, k);
  span.topRows(k) = Mat::Identity(k, k);
  span.bottomRows(n - k) = Df0;
  out.tangent_at_origin = OrientedPlane::from_span(base0, span);
  out.has_tangent = true;
  return out;
}

GeneratedCloud generate_complex_curve(const GeneratorSpec& spec) {
  if (spec.n != 4 || spec.k != 2) {
    throw InputError("complex curve lives in C^2 = R^4 with k = 2");
  }
  const double c = spec.curve_coeff;
  const double R = spec.domain_radius;
  const double gb_prior = 2.0 * std::abs(c) * R;
  const double g = 0.995 * spec.h / std::sqrt(1.0 + gb_prior * gb_prior);
  const std::vector<Vec> lattice = disk_lattice(2, g, R);

  std::vector<Vec> rows;
  rows.reserve(lattice.size());
  double grad_bound = 0.0;
  for (const Vec& u : lattice) {
    const double x = u(0), y = u(1);
    Vec p(4);
    p << x, y, c * (x * x - y * y), 2.0 * c * x * y;
    rows.push_back(std::move(p));
    grad_bound = std::max(grad_bound, 2.0 * std::abs(c) * u.norm());
  }

  GeneratedCloud out(cloud_from_rows(rows, 4, R));
  out.gradient_bound = grad_bound;
  out.predicted_min_calibration = 1.0;  // holomorphic tangents are calibrated
  out.true_measure = unit_ball_volume(2) * R * R * (1.0 + 2.0 * c * c * R * R);
  Mat span(4, 2);
  span << 1, 0, 0, 1, 0, 0, 0, 0;
  out.tangent_at_origin = OrientedPlane(Vec::Zero(4), span);
  out.has_tangent = true;
  return out;
}

GeneratedCloud generate_calibrated_plane(const GeneratorSpec& spec) {
  const int n = spec.n, k = spec.k;
  if (static_cast<int>(spec.monomial.size()) != k) {
    throw InputError("monomial must list k axis indices");
  }
  for (std::size_t i = 0; i < spec.monomial.size(); ++i) {
    const int idx = spec.monomial[i];
    if (idx < 1 || idx > n) throw InputError("monomial index out of range");
    if (i > 0 && spec.monomial[i - 1] >= idx) {
      throw InputError("monomial indices must be strictly increasing");
    }
  }
  const double g = 0.995 * spec.h;
  const std::vector<Vec> lattice = disk_lattice(k, g, spec.domain_radius);
  std::vector<Vec> rows;
  rows.reserve(lattice.size());
  for (const Vec& u : lattice) {
    Vec p = Vec::Zero(n);
    for (int d = 0; d < k; ++d) p(spec.monomial[static_cast<std::size_t>(d)] - 1) = u(d);
    rows.push_back(std::move(p));
  }
  GeneratedCloud out(cloud_from_rows(rows, n, spec.domain_radius));
  out.true_measure = unit_ball_volume(k) * std::pow(spec.domain_radius, k);
  out.predicted_min_calibration = 1.0;
  Mat frame = Mat::Zero(n, k);
  for (int d = 0; d < k; ++d) frame(spec.monomial[static_cast<std::size_t>(d)] - 1, d) = 1.0;
  out.tangent_at_origin = OrientedPlane(Vec::Zero(n), frame);
  out.has_tangent = true;
  return out;
}

GeneratedCloud generate_koch(const GeneratorSpec& spec) {
  if (spec.n != 2 || spec.k != 1) throw InputError("koch lives in R^2 with k = 1");
  if (spec.depth < 0) throw InputError("koch depth must be nonnegative");
  if (spec.eta.empty()) throw InputError("koch needs at least one eta value");
  if (spec.eta.size() != 1 &&
      static_cast<int>(spec.eta.size()) < spec.depth) {
    throw InputError("eta sequence shorter than depth");
  }
  for (double e : spec.eta) {
    if (e < 0.0) throw InputError("eta must be nonnegative");
  }

  using V2 = Eigen::Vector2d;
  const double R = spec.domain_radius;
  std::vector<V2> verts{V2(-R, 0.0), V2(R, 0.0)};
  for (int gen = 1; gen <= spec.depth; ++gen) {
    const double eta =
        spec.eta.size() == 1 ? spec.eta[0] : spec.eta[static_cast<std::size_t>(gen - 1)];
    std::vector<V2> next;
    next.reserve(verts.size() * 4);
    for (std::size_t i = 0; i + 1 < verts.size(); ++i) {
      const V2 a = verts[i], b = verts[i + 1];
      const V2 ab = b - a;
      const double len = ab.norm();
      const V2 normal(-ab.y() / len, ab.x() / len);
      next.push_back(a);
      next.push_back(a + ab / 3.0);
      next.push_back(a + ab * 0.5 + normal * (eta * len / 3.0));
      next.push_back(a + ab * (2.0 / 3.0));
    }
    next.push_back(verts.back());
    verts = std::move(next);
  }

  double length = 0.0;
  double min_cos = 1.0;
  std::vector<Vec> rows;
  for (std::size_t i = 0; i + 1 < verts.size(); ++i) {
    const V2 a = verts[i], b = verts[i + 1];
    const double len = (b - a).norm();
    length += len;
    min_cos = std::min(min_cos, std::abs((b.x() - a.x()) / len));
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / (0.97 * spec.h))));
    for (int t = 0; t < pieces; ++t) {
      const V2 p = a + (b - a) * (static_cast<double>(t) / pieces);
      Vec row(2);
      row << p.x(), p.y();
      rows.push_back(std::move(row));
    }
  }
  Vec last(2);
  last << verts.back().x(), verts.back().y();
  rows.push_back(std::move(last));

  GeneratedCloud out(cloud_from_rows(rows, 2, R));
  out.true_measure = length;
  out.predicted_min_calibration = min_cos;
  return out;
}

GeneratedCloud generate_perturbed(const GeneratorSpec& spec) {
  if (!spec.base) throw InputError("perturbed needs a base spec");
  if (spec.delta < 0.0) throw InputError("delta must be nonnegative");
  GeneratorSpec base = *spec.base;
  // Keep the emitted resolution within the requested h despite the jostling.
  if (spec.h <= 2.0 * spec.delta) {
    throw InputError("delta too large for the target resolution");
  }
  base.h = spec.h - 2.0 * spec.delta;
  GeneratedCloud base_gen = generate(base);
  if (!base_gen.has_tangent) {
    throw InputError("perturbed base must carry tangent metadata");
  }
  const int n = base_gen.cloud.dim();
  const int codim = base_gen.tangent_at_origin.codim();
  const Mat N = base_gen.tangent_at_origin.normal_frame();

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  RowMat pts(base_gen.cloud.size(), n);
  for (int i = 0; i < base_gen.cloud.size(); ++i) {
    Vec dir(codim);
    double norm2 = 0.0;
    do {
      for (int d = 0; d < codim; ++d) dir(d) = gauss(rng);
      norm2 = dir.squaredNorm();
    } while (norm2 < 1e-12);
    const double radius =
        spec.delta * std::pow(uniform(rng), 1.0 / static_cast<double>(codim));
    pts.row(i) = (base_gen.cloud.point(i) + N * (dir * (radius / std::sqrt(norm2))))
                     .transpose();
  }
  PointCloud cloud(std::move(pts));
  cloud.set_domain_radius(base_gen.cloud.domain_radius());
  GeneratedCloud out(std::move(cloud));
  out.gradient_bound = base_gen.gradient_bound;
  out.tangent_at_origin = base_gen.tangent_at_origin;
  out.has_tangent = base_gen.has_tangent;
  return out;
}

}  // namespace

GeneratedCloud generate(const GeneratorSpec& spec) {
  if (spec.h <= 0.0) throw InputError("target resolution must be positive");
  if (spec.domain_radius <= 0.0) throw InputError("domain radius must be positive");
  switch (spec.kind) {
    case GeneratorSpec::Kind::Plane: {
      GeneratorSpec flat = spec;
      flat.gradient = Mat::Zero(spec.n - spec.k, spec.k);
      flat.noise_amplitude = 0.0;
      return generate_graph(flat);
    }
    case GeneratorSpec::Kind::Graph:
      return generate_graph(spec);
    case GeneratorSpec::Kind::ComplexCurve:
      return generate_complex_curve(spec);
    case GeneratorSpec::Kind::CalibratedPlane:
      return generate_calibrated_plane(spec);
    case GeneratorSpec::Kind::Koch:
      return generate_koch(spec);
    case GeneratorSpec::Kind::Perturbed:
      return generate_perturbed(spec);
  }
  throw InputError("unknown generator kind");
}

double graph_gradient_bound(const GeneratorSpec& spec) {
  if (spec.kind != GeneratorSpec::Kind::Plane &&
      spec.kind != GeneratorSpec::Kind::Graph &&
      spec.kind != GeneratorSpec::Kind::ComplexCurve) {
    throw InputError("gradient bound is defined for graph-like generators");
  }
  return generate(spec).gradient_bound;
}

double koch_generation_factor(double eta) {
  if (eta < 0.0) throw InputError("eta must be nonnegative");
  using V2 = Eigen::Vector2d;
  const V2 a(0.0, 0.0), b(1.0, 0.0);
  const V2 third = (b - a) / 3.0;
  const V2 apex = a + (b - a) * 0.5 + V2(0.0, eta / 3.0);
  const V2 pts[5] = {a, a + third, apex, b - third, b};
  double len = 0.0;
  for (int i = 0; i < 4; ++i) len += (pts[i + 1] - pts[i]).norm();
  return len;
}

}  // namespace calreif
