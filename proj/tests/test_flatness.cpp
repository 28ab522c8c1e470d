#include <cmath>
#include <random>
#include <vector>

#include "calreif/flatness.hpp"
#include "calreif/generators.hpp"
#include "calreif/plane_fit.hpp"
#include "doctest.h"

using namespace calreif;

namespace {

PointCloud cloud_of(const std::vector<Vec>& rows) {
  RowMat m(static_cast<int>(rows.size()), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<int>(i)) = rows[i];
  return PointCloud(std::move(m));
}

PointCloud segment_cloud(double spacing, double half_len, double lift = 0.0) {
  std::vector<Vec> rows;
  for (double x = -half_len; x <= half_len + 1e-12; x += spacing) {
    Vec p(2);
    p << x, lift;
    rows.push_back(p);
  }
  return cloud_of(rows);
}

OrientedPlane x_axis_line() {
  Mat f(2, 1);
  f << 1, 0;
  return OrientedPlane(Vec::Zero(2), f);
}

CalibrationField axis_field_2d() {
  ConstantKForm f(2, 1);
  f.add_term({1}, 1.0);
  return CalibrationField(f, 0.01);
}

CalibrationField volume_field(int n, int k, double eps = 0.01) {
  return CalibrationField(base_volume_form(n, k), eps);
}

GeneratorSpec noisy_plane_spec(double h, double delta, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Perturbed;
  spec.n = 3;
  spec.k = 2;
  spec.h = h;
  spec.delta = delta;
  spec.seed = seed;
  spec.base = std::make_shared<GeneratorSpec>();
  spec.base->kind = GeneratorSpec::Kind::Plane;
  spec.base->n = 3;
  spec.base->k = 2;
  return spec;
}

}  // namespace

TEST_SUITE("flatness") {

TEST_CASE("one-sided deviation closed form") {
  std::vector<Vec> rows;
  for (double x = -1.0; x <= 1.0 + 1e-12; x += 0.1) {
    Vec p(2);
    p << x, 0.0;
    rows.push_back(p);
  }
  Vec outlier(2);
  outlier << 0.0, 0.5;
  rows.push_back(outlier);
  const PointCloud pc = cloud_of(rows);

  const double dev = one_sided_deviation(pc, Ball(Vec::Zero(2), 1.0), x_axis_line());
  CHECK(dev == doctest::Approx(0.5).epsilon(1e-12));

  // out-of-ball points are ignored
  const double tight = one_sided_deviation(pc, Ball(Vec::Zero(2), 0.3), x_axis_line());
  CHECK(tight == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("best fit recovers exact lines") {
  const PointCloud pc = segment_cloud(0.01, 1.0);
  const Ball ball(Vec::Zero(2), 1.0);

  for (const FitMode mode : {FitMode::OneSided, FitMode::Symmetric}) {
    const PlaneFit fit = best_fit_plane(pc, ball, 1, mode);
    CHECK(!fit.degenerate);
    CHECK(grassmann_distance(fit.plane, x_axis_line()) <= 1e-5);
    if (mode == FitMode::OneSided) {
      CHECK(fit.objective <= 1e-7);
    } else {
      // symmetric objective also charges for patch coverage, which the
      // slack keeps at zero for a complete sample
      CHECK(fit.objective <= 1e-7);
    }
  }

  // a shifted line is found at its offset, not at the axis
  const PointCloud lifted = segment_cloud(0.01, 1.0, 0.25);
  const PlaneFit fit = best_fit_plane(lifted, ball, 1, FitMode::OneSided);
  CHECK(std::abs(fit.plane.base()(1) - 0.25) <= 1e-5 + 0.25 * 1e-3);
  CHECK(fit.objective <= 1e-5);
}

TEST_CASE("degenerate balls are flagged") {
  const PointCloud pc = segment_cloud(0.05, 1.0);
  Vec far_center(2);
  far_center << 0.0, 3.0;
  const FlatnessRecord rec =
      flatness_at(pc, axis_field_2d(), far_center, 0.1, 1);
  CHECK(rec.degenerate);
}

TEST_CASE("parabola flatness matches the equioscillation scale") {
  // y = a x^2: the best sup-norm affine fit on [-r, r] misses by a r^2 / 2,
  // so theta and beta at the origin sit near a r / 2.
  const double a = 0.5;
  std::vector<Vec> rows;
  for (double x = -0.5; x <= 0.5 + 1e-12; x += 0.002) {
    Vec p(2);
    p << x, a * x * x;
    rows.push_back(p);
  }
  const PointCloud pc = cloud_of(rows);

  for (const double r : {0.2, 0.4}) {
    const FlatnessRecord rec =
        flatness_at(pc, axis_field_2d(), Vec::Zero(2), r, 1);
    CHECK(!rec.degenerate);
    const double predicted = a * r / 2.0;
    CHECK(rec.beta <= 1.3 * predicted);
    CHECK(rec.beta >= 0.5 * predicted);
    CHECK(rec.theta >= rec.beta);
    CHECK(rec.theta <= 2.5 * predicted);
  }

  // finer scales are flatter: theta(0.1) < theta(0.4)
  const double t1 = flatness_at(pc, axis_field_2d(), Vec::Zero(2), 0.1, 1).theta;
  const double t4 = flatness_at(pc, axis_field_2d(), Vec::Zero(2), 0.4, 1).theta;
  CHECK(t1 < t4);
}

TEST_CASE("beta never exceeds theta") {
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> g(0.0, 1.0);
  const CalibrationField field = volume_field(3, 2);
  for (int rep = 0; rep < 40; ++rep) {
    const GeneratedCloud gen =
        generate(noisy_plane_spec(0.05, 0.012, 1000 + rep));
    Vec c = Vec::Zero(3);
    c(0) = 0.2 * g(rng);
    c(1) = 0.2 * g(rng);
    const double r = 0.3 + 0.1 * std::abs(g(rng));
    const FlatnessRecord rec = flatness_at(gen.cloud, field, c, r, 2);
    CHECK(rec.beta <= rec.theta);
    CHECK(rec.beta >= 0.0);
    CHECK(rec.omega <= 1.0 + 1e-9);
  }
}

TEST_CASE("orientation ambiguity on a transverse field") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Plane;
  spec.n = 4;
  spec.k = 2;
  spec.h = 0.02;
  const GeneratedCloud gen = generate(spec);

  // field aligned with the plane: omega 1, orientation resolved
  ConstantKForm aligned(4, 2);
  aligned.add_term({1, 2}, 1.0);
  const FlatnessRecord ra = flatness_at(
      gen.cloud, CalibrationField(aligned, 0.01), Vec::Zero(4), 0.5, 2);
  CHECK(ra.omega == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(!ra.orientation_ambiguous);
  CHECK(ra.theta <= 0.05);

  // field vanishing on the plane: value pinned near zero, flag raised
  ConstantKForm transverse(4, 2);
  transverse.add_term({3, 4}, 1.0);
  const FlatnessRecord rt = flatness_at(
      gen.cloud, CalibrationField(transverse, 0.01), Vec::Zero(4), 0.5, 2);
  CHECK(std::abs(rt.omega) <= 0.05);
  CHECK(rt.orientation_ambiguous);
}

TEST_CASE("farthest point net covers and separates") {
  std::vector<Vec> rows;
  for (int i = 0; i <= 10; ++i) {
    Vec p(2);
    p << static_cast<double>(i), 0.0;
    rows.push_back(p);
  }
  const PointCloud pc = cloud_of(rows);
  std::vector<int> all(11);
  for (int i = 0; i < 11; ++i) all[i] = i;

  const double spacing = 2.5;
  const std::vector<int> net = farthest_point_net(pc, all, spacing);
  REQUIRE(!net.empty());
  CHECK(net[0] == 0);  // closest to the origin
  if (net.size() > 1) CHECK(net[1] == 10);  // farthest from the start

  for (int cand : all) {
    double best = 1e300;
    for (int sel : net) {
      best = std::min(best, (pc.point(cand) - pc.point(sel)).norm());
    }
    CHECK(best <= spacing + 1e-12);
  }
  for (std::size_t i = 0; i < net.size(); ++i) {
    for (std::size_t j = i + 1; j < net.size(); ++j) {
      CHECK((pc.point(net[i]) - pc.point(net[j])).norm() > spacing);
    }
  }
  CHECK(farthest_point_net(pc, all, spacing) == net);
}

TEST_CASE("certificate accepts a flat noisy plane") {
  const GeneratedCloud gen = generate(noisy_plane_spec(0.02, 0.002, 5));
  const CalibrationField field = volume_field(3, 2);

  CertifyOptions opts;
  opts.coarsest_exp = 0;
  opts.finest_exp = 3;
  opts.delta = 0.02;
  opts.alpha = 0.5;

  const ReifenbergCertificate cert = certify(gen.cloud, field, 2, opts);
  CHECK(cert.verdict);
  CHECK(cert.flat_enough);
  CHECK(cert.positive_enough);
  CHECK(cert.delta_star <= 0.02);
  CHECK(cert.alpha_star > 0.9);
  CHECK(cert.k == 2);
  CHECK(cert.n == 3);
  REQUIRE(cert.scales.size() == 4);
  CHECK(cert.scales[0] == 1.0);
  CHECK(cert.scales[3] == 0.125);
  CHECK(cert.delta_star_net ==
        doctest::Approx(cert.delta_star * (1.0 + 2.0 * cert.net_slack)).epsilon(1e-14));

  // aggregates reproduce from the records
  double dmax = 0.0, bmax = 0.0, omin = 1e300;
  for (const FlatnessRecord& rec : cert.records) {
    CHECK(rec.beta <= rec.theta);
    CHECK(!rec.degenerate);
    dmax = std::max(dmax, rec.theta);
    bmax = std::max(bmax, rec.beta);
    omin = std::min(omin, rec.omega);
    // centers may overshoot the domain ball by one sample spacing
    CHECK(rec.center.norm() + rec.radius <=
          gen.cloud.domain_radius() + gen.cloud.resolution() + 1e-9);
  }
  CHECK(cert.delta_star == dmax);
  CHECK(cert.beta_star == bmax);
  CHECK(cert.alpha_star == omin);
  CHECK(cert.beta_star <= cert.delta_star);

  for (const ScaleSummary& s : cert.per_scale) {
    double smax = 0.0, so = 1e300;
    int count = 0;
    for (const FlatnessRecord& rec : cert.records) {
      if (rec.scale_index != s.scale_index) continue;
      smax = std::max(smax, rec.theta);
      so = std::min(so, rec.omega);
      ++count;
    }
    CHECK(count == s.centers);
    CHECK(s.theta_max == smax);
    CHECK(s.omega_min == so);
  }
}

TEST_CASE("certificate rejects the zigzag") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Koch;
  spec.n = 2;
  spec.k = 1;
  spec.h = 0.005;
  spec.eta = {0.5};
  spec.depth = 4;
  const GeneratedCloud gen = generate(spec);

  CertifyOptions opts;
  opts.finest_exp = 3;
  opts.delta = 0.02;
  opts.alpha = 0.95;

  const ReifenbergCertificate cert = certify(gen.cloud, axis_field_2d(), 1, opts);
  CHECK(!cert.verdict);
  CHECK(!cert.flat_enough);
  CHECK(cert.delta_star > 0.1);
  CHECK(cert.alpha_star < 0.95);
}

TEST_CASE("resolution guard") {
  const GeneratedCloud gen = generate(noisy_plane_spec(0.02, 0.002, 5));
  CertifyOptions opts;
  opts.finest_exp = 6;  // 2^-6 = 0.015625 < 4h = 0.08
  CHECK_THROWS_AS(certify(gen.cloud, volume_field(3, 2), 2, opts),
                  ResolutionError);
}

TEST_CASE("dini profile truncation and monotonicity") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Plane;
  spec.n = 3;
  spec.k = 2;
  spec.h = 0.01;
  const GeneratedCloud flat = generate(spec);

  const DiniReport rep = dini_profile(flat.cloud, Vec::Zero(3), 2, 0, 6);
  CHECK(rep.requested_scales == 7);
  CHECK(rep.truncated_at == doctest::Approx(4.0 * flat.cloud.resolution()));
  CHECK(rep.used_scales == static_cast<int>(rep.scales.size()));
  for (double s : rep.scales) CHECK(s >= rep.truncated_at - 1e-15);
  CHECK(rep.used_scales >= 4);
  CHECK(rep.sum <= 1e-6);  // flat data has a vanishing square function

  GeneratorSpec kspec;
  kspec.kind = GeneratorSpec::Kind::Koch;
  kspec.n = 2;
  kspec.k = 1;
  kspec.h = 0.004;
  kspec.eta = {0.5};
  kspec.depth = 4;
  const GeneratedCloud rough = generate(kspec);
  const DiniReport krep = dini_profile(rough.cloud, Vec::Zero(2), 1, 0, 4);
  CHECK(krep.sum > 10.0 * rep.sum);
  CHECK(krep.sum > 0.01);
}

TEST_CASE("coordinate permutation equivariance") {
  const GeneratedCloud gen = generate(noisy_plane_spec(0.03, 0.005, 9));
  const CalibrationField field = volume_field(3, 2);
  const FlatnessRecord base =
      flatness_at(gen.cloud, field, Vec::Zero(3), 0.5, 2);

  // cycle coordinates (x,y,z) -> (z,x,y); the fitted geometry must follow
  RowMat rotated(gen.cloud.size(), 3);
  for (int i = 0; i < gen.cloud.size(); ++i) {
    const Vec p = gen.cloud.point(i);
    rotated(i, 0) = p(2);
    rotated(i, 1) = p(0);
    rotated(i, 2) = p(1);
  }
  PointCloud moved(std::move(rotated));
  moved.set_domain_radius(gen.cloud.domain_radius());

  ConstantKForm perm_form(3, 2);
  perm_form.add_term({2, 3}, 1.0);  // image of e^{12} under the cycle
  const FlatnessRecord rot = flatness_at(
      moved, CalibrationField(perm_form, 0.01), Vec::Zero(3), 0.5, 2);

  CHECK(std::abs(rot.theta - base.theta) <= 1e-8);
  CHECK(std::abs(rot.beta - base.beta) <= 1e-8);
  CHECK(std::abs(std::abs(rot.omega) - std::abs(base.omega)) <= 1e-8);
}

}  // TEST_SUITE
