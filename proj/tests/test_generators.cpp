#include <cmath>
#include <cstring>
#include <memory>
#include <vector>

#include "calreif/generators.hpp"
#include "calreif/measure.hpp"
#include "calreif/metrics.hpp"
#include "doctest.h"

using namespace calreif;

namespace {

constexpr double kPi = 3.14159265358979323846;

// One apex replacement turns a unit segment into 2/3 of straight run plus
// two slants of sqrt((1/6)^2 + (eta/3)^2) each.
double apex_factor(double eta) {
  return (2.0 + std::sqrt(1.0 + 4.0 * eta * eta)) / 3.0;
}

double polyline_length(const PointCloud& pc) {
  double acc = 0.0;
  for (int i = 0; i + 1 < pc.size(); ++i) {
    acc += (pc.point(i + 1) - pc.point(i)).norm();
  }
  return acc;
}

bool same_bytes(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) return false;
  return std::memcmp(a.points().data(), b.points().data(),
                     sizeof(double) * static_cast<std::size_t>(a.size()) *
                         static_cast<std::size_t>(a.dim())) == 0;
}

}  // namespace

TEST_SUITE("generators") {

TEST_CASE("plane patch") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Plane;
  spec.n = 4;
  spec.k = 2;
  spec.h = 0.05;

  const GeneratedCloud g = generate(spec);
  CHECK(g.cloud.dim() == 4);
  CHECK(g.cloud.resolution() <= spec.h);
  CHECK(g.cloud.domain_radius() == 1.0);
  for (int i = 0; i < g.cloud.size(); ++i) {
    const Vec p = g.cloud.point(i);
    CHECK(p(2) == 0.0);
    CHECK(p(3) == 0.0);
    CHECK(p.head(2).norm() <= 1.0 + 1e-12);
  }
  CHECK(g.true_measure == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(g.predicted_min_calibration == doctest::Approx(1.0));
  REQUIRE(g.has_tangent);
  CHECK(g.tangent_at_origin.dim() == 2);
  CHECK(g.tangent_at_origin.base().norm() == 0.0);

  CHECK(same_bytes(generate(spec).cloud, g.cloud));
}

TEST_CASE("linear graph bookkeeping") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Graph;
  spec.n = 4;
  spec.k = 2;
  spec.h = 0.04;
  spec.gradient = Mat::Zero(2, 2);
  spec.gradient(0, 0) = 0.1;

  const GeneratedCloud g = generate(spec);
  CHECK(g.cloud.resolution() <= spec.h);
  for (int i = 0; i < g.cloud.size(); ++i) {
    const Vec p = g.cloud.point(i);
    CHECK(p(2) == doctest::Approx(0.1 * p(0)).epsilon(1e-14).scale(1.0));
    CHECK(p(3) == 0.0);
  }
  // graph of a linear map: area scales by sqrt(det(I + A^T A))
  CHECK(g.true_measure == doctest::Approx(kPi * std::sqrt(1.01)).epsilon(1e-12));
  CHECK(g.gradient_bound == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g.predicted_min_calibration ==
        doctest::Approx(1.0 / std::sqrt(1.01)).epsilon(1e-12));
  CHECK(graph_gradient_bound(spec) == g.gradient_bound);

  // zero map reduces to the flat patch
  GeneratorSpec flat = spec;
  flat.gradient = Mat();
  const GeneratedCloud gf = generate(flat);
  CHECK(gf.true_measure == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(gf.predicted_min_calibration == doctest::Approx(1.0));
  CHECK(gf.gradient_bound == 0.0);
}

TEST_CASE("noisy graph stays inside the declared envelope") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Graph;
  spec.n = 4;
  spec.k = 2;
  spec.h = 0.05;
  spec.seed = 11;
  spec.gradient = Mat::Zero(2, 2);
  spec.gradient(0, 0) = 0.1;
  spec.noise_amplitude = 0.005;
  spec.noise_frequency = 2.0;
  spec.noise_modes = 3;

  const GeneratedCloud g = generate(spec);
  double worst = 0.0;
  for (int i = 0; i < g.cloud.size(); ++i) {
    const Vec p = g.cloud.point(i);
    Vec lin(2);
    lin << 0.1 * p(0), 0.0;
    worst = std::max(worst, (p.tail(2) - lin).norm());
  }
  CHECK(worst <= spec.noise_amplitude + 1e-12);
  CHECK(worst > 0.0);
  CHECK(g.true_measure == -1.0);  // no closed form under noise
  CHECK(g.gradient_bound >= 0.1 - 1e-12);
  CHECK(g.gradient_bound <= 0.1 + spec.noise_amplitude * spec.noise_frequency + 1e-9);
  CHECK(g.predicted_min_calibration <= 1.0 / std::sqrt(1.01) + 1e-12);
  CHECK(g.predicted_min_calibration >= 1.0 / std::sqrt(1.01) - 0.01);

  CHECK(same_bytes(generate(spec).cloud, g.cloud));
  GeneratorSpec other = spec;
  other.seed = 12;
  CHECK(!same_bytes(generate(other).cloud, g.cloud));
}

TEST_CASE("complex curve satisfies its defining equation") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::ComplexCurve;
  spec.n = 4;
  spec.k = 2;
  spec.h = 0.02;
  spec.curve_coeff = 0.3;

  const GeneratedCloud g = generate(spec);
  for (int i = 0; i < g.cloud.size(); ++i) {
    const Vec p = g.cloud.point(i);
    // w = c z^2 with z = p0 + i p1, w = p2 + i p3
    const double re = spec.curve_coeff * (p(0) * p(0) - p(1) * p(1));
    const double im = spec.curve_coeff * 2.0 * p(0) * p(1);
    CHECK(std::abs(p(2) - re) <= 1e-12);
    CHECK(std::abs(p(3) - im) <= 1e-12);
  }
  // area of a holomorphic graph over the unit disk:
  // integral of 1 + |f'|^2 with f' = 2cz gives pi (1 + 2 c^2)
  const double c = spec.curve_coeff;
  CHECK(g.true_measure == doctest::Approx(kPi * (1.0 + 2.0 * c * c)).epsilon(1e-12));
  CHECK(g.predicted_min_calibration == 1.0);
  REQUIRE(g.has_tangent);
  CHECK(g.tangent_at_origin.frame()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("koch generation factor") {
  CHECK(koch_generation_factor(0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(koch_generation_factor(0.5) ==
        doctest::Approx((2.0 + std::sqrt(2.0)) / 3.0).epsilon(1e-12));
  for (const double eta : {0.2, 0.25, 0.8, 1.0}) {
    CHECK(koch_generation_factor(eta) ==
          doctest::Approx(apex_factor(eta)).epsilon(1e-12));
  }
}

TEST_CASE("koch polyline length telescopes") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Koch;
  spec.n = 2;
  spec.k = 1;
  spec.h = 0.01;
  spec.eta = {0.5};
  spec.depth = 3;

  const GeneratedCloud g = generate(spec);
  const double want = 2.0 * std::pow(apex_factor(0.5), 3);
  CHECK(std::abs(g.true_measure - want) <= 1e-9);
  CHECK(std::abs(polyline_length(g.cloud) - want) <= 1e-9);
  CHECK(g.cloud.resolution() <= spec.h);

  // depth 0 is the plain segment
  GeneratorSpec flat = spec;
  flat.depth = 0;
  CHECK(generate(flat).true_measure == doctest::Approx(2.0));

  // per-generation eta sequence multiplies the factors
  GeneratorSpec seq = spec;
  seq.depth = 2;
  seq.eta = {0.5, 0.25};
  CHECK(generate(seq).true_measure ==
        doctest::Approx(2.0 * apex_factor(0.5) * apex_factor(0.25)).epsilon(1e-12));

  // shrinking eta keeps the length bounded: partial products converge
  GeneratorSpec dini = spec;
  dini.depth = 6;
  dini.eta.clear();
  for (int j = 1; j <= 6; ++j) dini.eta.push_back(std::pow(2.0, -j));
  double prod = 1.0;
  for (double e : dini.eta) prod *= apex_factor(e);
  CHECK(generate(dini).true_measure == doctest::Approx(2.0 * prod).epsilon(1e-12));
  CHECK(prod < 1.2);  // the eta_j = 2^-j ladder keeps the length bounded
}

TEST_CASE("calibrated axis plane") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::CalibratedPlane;
  spec.n = 4;
  spec.k = 2;
  spec.h = 0.05;
  spec.monomial = {1, 3};

  const GeneratedCloud g = generate(spec);
  for (int i = 0; i < g.cloud.size(); ++i) {
    const Vec p = g.cloud.point(i);
    CHECK(p(1) == 0.0);
    CHECK(p(3) == 0.0);
  }
  CHECK(g.true_measure == doctest::Approx(kPi).epsilon(1e-12));
  REQUIRE(g.has_tangent);
  CHECK(g.tangent_at_origin.frame()(0, 0) == 1.0);
  CHECK(g.tangent_at_origin.frame()(2, 1) == 1.0);
}

TEST_CASE("perturbed cloud respects the noise bound") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Perturbed;
  spec.n = 3;
  spec.k = 2;
  spec.h = 0.04;
  spec.delta = 0.005;
  spec.seed = 21;
  spec.base = std::make_shared<GeneratorSpec>();
  spec.base->kind = GeneratorSpec::Kind::Plane;
  spec.base->n = 3;
  spec.base->k = 2;

  const GeneratedCloud g = generate(spec);
  CHECK(g.cloud.resolution() <= spec.h + 1e-12);
  double worst = 0.0;
  for (int i = 0; i < g.cloud.size(); ++i) {
    worst = std::max(worst, std::abs(g.cloud.point(i)(2)));
  }
  CHECK(worst <= spec.delta + 1e-15);
  CHECK(worst > 0.0);

  CHECK(same_bytes(generate(spec).cloud, g.cloud));
  GeneratorSpec other = spec;
  other.seed = 22;
  CHECK(!same_bytes(generate(other).cloud, g.cloud));
}

TEST_CASE("invalid specs are rejected") {
  GeneratorSpec bad;
  bad.kind = GeneratorSpec::Kind::Koch;
  bad.n = 3;  // wrong ambient dimension
  bad.k = 1;
  bad.eta = {0.5};
  CHECK_THROWS_AS(generate(bad), InputError);

  GeneratorSpec short_eta;
  short_eta.kind = GeneratorSpec::Kind::Koch;
  short_eta.n = 2;
  short_eta.k = 1;
  short_eta.depth = 3;
  short_eta.eta = {0.5, 0.5};  // one value per generation, or exactly one
  CHECK_THROWS_AS(generate(short_eta), InputError);

  GeneratorSpec no_base;
  no_base.kind = GeneratorSpec::Kind::Perturbed;
  CHECK_THROWS_AS(generate(no_base), InputError);

  GeneratorSpec coarse;
  coarse.kind = GeneratorSpec::Kind::Perturbed;
  coarse.h = 0.01;
  coarse.delta = 0.005;  // noise eats the whole resolution budget
  coarse.base = std::make_shared<GeneratorSpec>();
  coarse.base->n = 3;
  coarse.base->k = 2;
  coarse.n = 3;
  coarse.k = 2;
  CHECK_THROWS_AS(generate(coarse), InputError);

  GeneratorSpec shape;
  shape.kind = GeneratorSpec::Kind::Graph;
  shape.n = 4;
  shape.k = 2;
  shape.gradient = Mat::Zero(3, 3);
  CHECK_THROWS_AS(generate(shape), InputError);
}

}  // TEST_SUITE
