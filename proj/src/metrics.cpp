#include "calreif/metrics.hpp"

#include <cmath>
#include <limits>

#include "calreif/errors.hpp"
#include "calreif/parallel.hpp"

namespace calreif {

PointCloud discretize_patch(const OrientedPlane& plane, const Ball& ball,
                            double spacing) {
  if (!(spacing > 0)) throw ContractViolation("patch spacing must be positive");
  const int k = plane.dim();
  const Vec c = plane.project(ball.center);
  const double off2 = (ball.center - c).squaredNorm();
  const double rho2 = ball.radius * ball.radius - off2;
  if (rho2 <= 0) return PointCloud(RowMat(0, plane.ambient_dim()));
  const double rho = std::sqrt(rho2);

  const int m = static_cast<int>(std::floor(rho / spacing));
  std::vector<Vec> rows;
  std::vector<int> odo(static_cast<std::size_t>(k), -m);
  while (true) {
    double u2 = 0.0;
    for (int d = 0; d < k; ++d) {
      const double v = odo[static_cast<std::size_t>(d)] * spacing;
      u2 += v * v;
    }
    if (u2 <= rho2) {
      Vec p = c;
      for (int d = 0; d < k; ++d) {
        p += (odo[static_cast<std::size_t>(d)] * spacing) * plane.frame().col(d);
      }
      rows.push_back(std::move(p));
    }
    int d = k - 1;
    while (d >= 0 && odo[static_cast<std::size_t>(d)] == m) {
      odo[static_cast<std::size_t>(d)] = -m;
      --d;
    }
    if (d < 0) break;
    ++odo[static_cast<std::size_t>(d)];
  }
  RowMat out(static_cast<Eigen::Index>(rows.size()), plane.ambient_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return PointCloud(std::move(out));
}

double one_sided_hausdorff(const PointCloud& a, const PointCloud& b) {
  if (a.empty()) return 0.0;
  if (b.empty()) return std::numeric_limits<double>::infinity();
  if (a.dim() != b.dim()) throw ContractViolation("hausdorff dimension mismatch");
  const KdTree& tb = b.index();
  std::vector<double> d(static_cast<std::size_t>(a.size()));
  parallel_for(static_cast<std::size_t>(a.size()), [&](std::size_t i) {
    d[i] = tb.nearest(a.row(static_cast<int>(i))).dist2;
  });
  double worst = 0.0;
  for (double v : d) worst = std::max(worst, v);
  return std::sqrt(worst);
}

double hausdorff_distance(const PointCloud& a, const PointCloud& b) {
  return std::max(one_sided_hausdorff(a, b), one_sided_hausdorff(b, a));
}

double hausdorff_distance(const PointCloud& cloud, const OrientedPlane& plane,
                          const Ball& ball, double spacing) {
  if (spacing <= 0) spacing = cloud.resolution() / 2.0;
  const PointCloud patch = discretize_patch(plane, ball, spacing);
  return hausdorff_distance(cloud, patch);
}

}  // namespace calreif
