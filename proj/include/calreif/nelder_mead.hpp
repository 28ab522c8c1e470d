#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace calreif {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evals = 0;
};

// Downhill simplex minimization. Deterministic: ties order by vertex index.
// Stops after max_iters iterations or when the simplex's relative value
// spread drops below rel_tol.
inline NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& init_step,
    int max_iters, double rel_tol) {
  const int dim = static_cast<int>(x0.size());
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };

  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(dim + 1), x0);
  std::vector<double> fs(static_cast<std::size_t>(dim + 1));
  for (int i = 0; i < dim; ++i) xs[static_cast<std::size_t>(i + 1)](i) += init_step(i);
  for (int i = 0; i <= dim; ++i) fs[static_cast<std::size_t>(i)] = eval(xs[static_cast<std::size_t>(i)]);

  std::vector<int> order(static_cast<std::size_t>(dim + 1));
  for (int it = 0; it < max_iters; ++it) {
    for (int i = 0; i <= dim; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double fa = fs[static_cast<std::size_t>(a)], fb = fs[static_cast<std::size_t>(b)];
      return fa < fb || (fa == fb && a < b);
    });
    const int ib = order[0], iw = order[static_cast<std::size_t>(dim)],
              is = order[static_cast<std::size_t>(dim - 1)];
    const double fbest = fs[static_cast<std::size_t>(ib)];
    const double spread = fs[static_cast<std::size_t>(iw)] - fbest;
    if (spread <= rel_tol * std::max(1e-300, std::abs(fbest))) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i <= dim; ++i) {
      if (i == iw) continue;
      centroid += xs[static_cast<std::size_t>(i)];
    }
    centroid /= dim;

    const Eigen::VectorXd xr = centroid + (centroid - xs[static_cast<std::size_t>(iw)]);
    const double fr = eval(xr);
    if (fr < fbest) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[static_cast<std::size_t>(iw)]);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[static_cast<std::size_t>(iw)] = xe;
        fs[static_cast<std::size_t>(iw)] = fe;
      } else {
        xs[static_cast<std::size_t>(iw)] = xr;
        fs[static_cast<std::size_t>(iw)] = fr;
      }
      continue;
    }
    if (fr < fs[static_cast<std::size_t>(is)]) {
      xs[static_cast<std::size_t>(iw)] = xr;
      fs[static_cast<std::size_t>(iw)] = fr;
      continue;
    }
    const Eigen::VectorXd xc = centroid + 0.5 * (xs[static_cast<std::size_t>(iw)] - centroid);
    const double fc = eval(xc);
    if (fc < fs[static_cast<std::size_t>(iw)]) {
      xs[static_cast<std::size_t>(iw)] = xc;
      fs[static_cast<std::size_t>(iw)] = fc;
      continue;
    }
    for (int i = 0; i <= dim; ++i) {  // shrink toward best
      if (i == ib) continue;
      xs[static_cast<std::size_t>(i)] =
          xs[static_cast<std::size_t>(ib)] +
          0.5 * (xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(ib)]);
      fs[static_cast<std::size_t>(i)] = eval(xs[static_cast<std::size_t>(i)]);
    }
  }

  int ibest = 0;
  for (int i = 1; i <= dim; ++i) {
    if (fs[static_cast<std::size_t>(i)] < fs[static_cast<std::size_t>(ibest)]) ibest = i;
  }
  return {xs[static_cast<std::size_t>(ibest)], fs[static_cast<std::size_t>(ibest)], evals};
}

}  // namespace calreif
