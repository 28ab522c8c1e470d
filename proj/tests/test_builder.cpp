#include <cmath>
#include <cstring>
#include <vector>

#include "calreif/builder.hpp"
#include "calreif/generators.hpp"
#include "doctest.h"

using namespace calreif;

namespace {

PointCloud cloud_of(const std::vector<Vec>& rows) {
  RowMat m(static_cast<int>(rows.size()), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<int>(i)) = rows[i];
  return PointCloud(std::move(m));
}

// plane z = height over the unit disk, optionally sloped in x
PointCloud lifted_plane(double h, double height, double slope = 0.0,
                        double extent = 2.0) {
  std::vector<Vec> rows;
  for (double x = -extent; x <= extent + 1e-12; x += h) {
    for (double y = -extent; y <= extent + 1e-12; y += h) {
      Vec p(3);
      p << x, y, height + slope * x;
      rows.push_back(p);
    }
  }
  PointCloud pc = cloud_of(rows);
  pc.set_domain_radius(extent);
  return pc;
}

OrientedPlane xy_plane() {
  Mat f(3, 2);
  f << 1, 0, 0, 1, 0, 0;
  return OrientedPlane(Vec::Zero(3), f);
}

CalibrationField volume_field(int n, int k, double eps = 0.01) {
  return CalibrationField(base_volume_form(n, k), eps);
}

GeneratedCloud noisy_plane(double h, double delta, std::uint64_t seed) {
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
  return generate(spec);
}

bool rows_equal(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_SUITE("builder") {

TEST_CASE("scale function is a clamped ramp") {
  const ScaleFunction fn(0.25, 1.0);
  CHECK(fn(0.0) == 0.25);
  CHECK(fn(1.0) == 0.25);
  CHECK(fn(2.0) == 1.0);
  CHECK(fn(5.0) == 1.0);
  CHECK(fn(1.5) == doctest::Approx(0.625).epsilon(1e-15));

  const ScaleFunction tight(0.1, 0.5);
  CHECK(tight(1.25) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(tight(1.5) == 0.5);
}

TEST_CASE("vitali cover invariants") {
  const GeneratedCloud gen = noisy_plane(0.02, 0.002, 31);
  const CalibrationField field = volume_field(3, 2);
  const ScaleFunction fn(0.25, 1.0);

  const VitaliCover cover = vitali_cover(gen.cloud, fn, field, 2);
  REQUIRE(cover.size() > 0);
  CHECK(cover.verify_disjoint_fifths());
  CHECK(cover.verify_covering(gen.cloud, 1.0));
  CHECK(static_cast<int>(cover.radii.size()) == cover.size());
  CHECK(static_cast<int>(cover.planes.size()) == cover.size());
  CHECK(cover.centers.rows() == cover.size());

  for (int i = 0; i < cover.size(); ++i) {
    CHECK(cover.radii[i] >= 0.25 - 1e-12);
    CHECK(cover.radii[i] <= 1.0 + 1e-12);
    // cover planes hug the ground truth
    CHECK(grassmann_distance(cover.planes[i], xy_plane()) <= 0.1);
    CHECK(rows_equal(cover.centers.row(i), gen.cloud.points().row(cover.rows[i])));
  }

  // a cover scale under 4h is refused
  CHECK_THROWS_AS(vitali_cover(gen.cloud, ScaleFunction(0.05, 1.0), field, 2),
                  ResolutionError);
}

TEST_CASE("param surface lattice accounting") {
  const ParamSurface surf(xy_plane(), 0.25, 2.0, 1.5);
  CHECK(surf.k() == 2);
  CHECK(surf.n() == 3);
  const int M = surf.half_width();
  CHECK(M == 8);  // ceil(2 / 0.25)
  CHECK(surf.node_count() == (2L * M + 1) * (2L * M + 1));
  CHECK(surf.cell_count() == (2L * M) * (2L * M));

  // coords <-> index round trip
  for (long idx : {0L, 1L, 37L, surf.node_count() - 1}) {
    const Vec u = surf.node_coords(idx);
    int cell[2] = {static_cast<int>(std::llround(u(0) / 0.25)),
                   static_cast<int>(std::llround(u(1) / 0.25))};
    CHECK(surf.node_index(cell) == idx);
  }

  // a fresh surface is the affine embedding everywhere
  Vec u(2);
  u << 0.3, -0.7;
  CHECK((surf.eval(u) - surf.embed(u)).norm() <= 1e-14);
  u << 5.0, 5.0;  // far beyond the stored window
  CHECK((surf.eval(u) - surf.embed(u)).norm() == 0.0);

  // embedding respects the base plane
  Vec e = surf.embed(u);
  CHECK(e(0) == u(0));
  CHECK(e(1) == u(1));
  CHECK(e(2) == 0.0);

  // cell edges of the flat surface are the scaled frame
  int cell[2] = {0, 0};
  const Mat edges = surf.cell_edges(cell);
  CHECK(edges.cols() == 2);
  CHECK((edges.col(0) - 0.25 * xy_plane().frame().col(0)).norm() <= 1e-14);

  CHECK_THROWS_AS(ParamSurface(xy_plane(), -0.1, 2.0, 1.5), InputError);
  CHECK_THROWS_AS(ParamSurface(xy_plane(), 0.25, 1.2, 1.5), InputError);
}

TEST_CASE("glue step pulls the sheet toward the cover") {
  const PointCloud lifted = lifted_plane(0.05, 0.1);
  const CalibrationField field = volume_field(3, 2);

  ParamSurface surf(xy_plane(), 0.1, 2.2, 2.0);
  const VitaliCover cover = vitali_cover(lifted, ScaleFunction(0.5, 1.0), field, 2);

  const ParamSurface glued = glue_step(surf, cover, GlueOptions{});
  Vec u = Vec::Zero(2);
  const double z0 = glued.eval(u)(2);
  CHECK(z0 == doctest::Approx(0.1).epsilon(0.05));

  // identity collar nodes never move
  bool checked_far = false;
  for (long idx = 0; idx < glued.node_count(); ++idx) {
    if (glued.node_coords(idx).norm() > glued.identity_radius()) {
      CHECK(rows_equal(glued.positions().row(idx), surf.positions().row(idx)));
      checked_far = true;
    }
  }
  CHECK(checked_far);
}

TEST_CASE("glue step rejects wild cover planes") {
  const PointCloud steep = lifted_plane(0.05, 0.0, 2.0);  // z = 2x
  const CalibrationField field = volume_field(3, 2);
  const VitaliCover cover = vitali_cover(steep, ScaleFunction(0.5, 1.0), field, 2);

  ParamSurface surf(xy_plane(), 0.1, 2.2, 2.0);
  GlueOptions opts;
  opts.grassmann_guard = 0.5;  // tan gap of the steep sheet is ~0.89
  try {
    glue_step(surf, cover, opts);
    FAIL("expected GlueError");
  } catch (const GlueError& e) {
    CHECK(e.ball_index >= 0);
    CHECK(e.grassmann > 0.5);
  }
}

TEST_CASE("family construction on a noisy plane") {
  const GeneratedCloud gen = noisy_plane(0.025, 0.003, 77);
  const CalibrationField field = volume_field(3, 2);

  BuildOptions opts;
  opts.epsilon = 1.0;
  opts.levels = 3;

  const SurfaceFamily family = build_family(gen.cloud, field, opts);
  REQUIRE(family.complete);
  CHECK(family.failed_level == -1);
  REQUIRE(family.levels.size() == 4);
  REQUIRE(family.level_scales.size() == 4);
  CHECK(family.level_scales[0] == 1.0);
  CHECK(family.level_scales[3] == 0.125);
  CHECK(family.covers.size() == 4);
  CHECK(grassmann_distance(family.base, xy_plane()) <= 0.05);

  // level 0 is the untouched base plane
  const ParamSurface& first = family.levels[0];
  for (long idx = 0; idx < std::min(200L, first.node_count()); ++idx) {
    CHECK((first.positions().row(idx).transpose() -
           first.embed(first.node_coords(idx))).norm() <= 1e-14);
  }

  // every level: identity collar bit-exact to the embedding
  for (const ParamSurface& s : family.levels) {
    long outside = 0;
    for (long idx = 0; idx < s.node_count(); ++idx) {
      if (s.node_coords(idx).norm() > s.identity_radius()) {
        const Vec want = s.embed(s.node_coords(idx));
        const Vec got = s.positions().row(idx).transpose();
        CHECK(std::memcmp(want.data(), got.data(), sizeof(double) * 3) == 0);
        if (++outside > 500) break;  // spot check, the full sweep is slow
      }
    }
    CHECK(outside > 0);
  }

  // fine levels hug the samples near the core
  const ParamSurface& last = family.levels.back();
  double worst = 0.0;
  for (int i = 0; i < gen.cloud.size(); i += 7) {
    const Vec p = gen.cloud.point(i);
    if (p.head(2).norm() > 0.8) continue;
    Vec u = family.base.frame().transpose() * (p - family.base.base());
    worst = std::max(worst, (last.eval(u) - p).norm());
  }
  CHECK(worst <= 0.05);

  // deterministic reconstruction
  const SurfaceFamily again = build_family(gen.cloud, field, opts);
  REQUIRE(again.complete);
  for (std::size_t a = 0; a < family.levels.size(); ++a) {
    CHECK(std::memcmp(family.levels[a].positions().data(),
                      again.levels[a].positions().data(),
                      sizeof(double) *
                          static_cast<std::size_t>(family.levels[a].node_count()) *
                          3) == 0);
  }

  SUBCASE("interpolation brackets the levels") {
    const double r = std::sqrt(family.level_scales[1] * family.level_scales[2]);
    const ParamSurface mid = family.interpolate(r);
    CHECK(mid.spacing() == family.levels[2].spacing());
    Vec u(2);
    u << 0.31, -0.17;
    const double z1 = family.levels[1].eval(u)(2);
    const double z2 = family.levels[2].eval(u)(2);
    const double zm = mid.eval(u)(2);
    CHECK(zm >= std::min(z1, z2) - 1e-9);
    CHECK(zm <= std::max(z1, z2) + 1e-9);

    // endpoints reproduce the stored levels
    const ParamSurface at1 = family.interpolate(family.level_scales[1]);
    Vec v(2);
    v << 0.5, 0.25;
    CHECK((at1.eval(v) - family.levels[1].eval(v)).norm() <= 1e-12);
  }

  SUBCASE("property report on the same family") {
    const FamilyReport rep = check_properties(family, gen.cloud, field, 0.02);
    CHECK(rep.complete);
    CHECK(rep.identity_outside_all);
    CHECK(rep.positivity_all);
    CHECK(rep.constant > 0.0);
    CHECK(rep.stability >= 1.0);
    REQUIRE(rep.levels.size() == 4);
    for (const LevelCheck& lc : rep.levels) {
      CHECK(lc.hausdorff_to_cloud >= 0.0);
      CHECK(lc.omega_min > 0.005);  // eps/2 with eps 0.01
      CHECK(lc.positive_fraction == 1.0);
      CHECK(lc.identity_outside);
      CHECK(lc.combined_ratio > 0.0);
    }
    CHECK(rep.levels.back().velocity == 0.0);
    CHECK(rep.levels.back().p5_ratio == 0.0);

    // per-level normalization reweights the ratios
    CheckOptions scaled;
    scaled.level_deltas = {0.01, 0.01, 0.01, 0.01};
    const FamilyReport rep2 =
        check_properties(family, gen.cloud, field, 0.02, scaled);
    CHECK(rep2.levels[1].p3_ratio ==
          doctest::Approx(2.0 * rep.levels[1].p3_ratio).epsilon(1e-12));
  }
}

TEST_CASE("node budget failure leaves a flagged partial family") {
  const GeneratedCloud gen = noisy_plane(0.04, 0.004, 13);
  BuildOptions opts;
  opts.levels = 3;
  opts.node_budget = 2000;  // level 2 grid cannot fit
  const SurfaceFamily family = build_family(gen.cloud, volume_field(3, 2), opts);
  CHECK(!family.complete);
  CHECK(family.failed_level >= 0);
  CHECK(!family.failure.empty());
  CHECK(family.levels.size() < 4);
}

}  // TEST_SUITE
