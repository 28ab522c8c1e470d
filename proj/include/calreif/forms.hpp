#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "calreif/multi_index.hpp"
#include "calreif/plane.hpp"

namespace calreif {

// Constant-coefficient alternating k-form on R^n, stored densely over the
// C(n,k) increasing multi-indices in lexicographic order.
class ConstantKForm {
 public:
  ConstantKForm() = default;
  ConstantKForm(int n, int k);

  int ambient_dim() const { return n_; }
  int degree() const { return k_; }

  double coeff(const MultiIndex& idx) const;
  void set_coeff(const MultiIndex& idx, double c);
  // Adds c on the monomial with the given (possibly unsorted) indices,
  // folding in the permutation sign. Repeated indices contribute nothing.
  void add_term(std::vector<int> indices, double c);

  const Eigen::VectorXd& coefficients() const { return coef_; }
  const std::vector<MultiIndex>& support_basis() const { return basis_; }

  // Multilinear evaluation on k arbitrary vectors (columns of V).
  double evaluate_frame(const Mat& V) const;
  // Evaluation on an oriented plane's orthonormal frame.
  double evaluate(const OrientedPlane& plane) const;

  ConstantKForm operator+(const ConstantKForm& o) const;
  ConstantKForm operator-(const ConstantKForm& o) const;
  ConstantKForm operator*(double s) const;

  // Euclidean norm of the coefficient vector. By Cauchy-Binet the minors of
  // an orthonormal frame form a unit vector, so this bounds |evaluation| on
  // every orthonormal frame.
  double coefficient_norm() const { return coef_.norm(); }

 private:
  int n_ = 0;
  int k_ = 0;
  Eigen::VectorXd coef_;
  std::vector<MultiIndex> basis_;
};

ConstantKForm wedge(const ConstantKForm& a, const ConstantKForm& b);

// Standard calibration forms. Coordinates on R^{2m} are interleaved
// (x1, y1, x2, y2, ...).
ConstantKForm kahler_form(int n_complex);
// omega^k / k!; evaluates to exactly 1 on complex k-planes.
ConstantKForm kahler_power(int n_complex, int k);
ConstantKForm g2_associative();
ConstantKForm g2_coassociative();
ConstantKForm spin7_form();
// Re(e^{-i phase} dz^1 ^ ... ^ dz^m). The phase sign is chosen so that
// phase pi/2 with m=1 gives +dy.
ConstantKForm special_lagrangian(int n_complex, double phase);
// Single monomial e^{1...k} on R^n.
ConstantKForm base_volume_form(int n, int k);

struct ComassOptions {
  int samples = 10000;
  int ascent_iters = 200;
  std::uint64_t seed = 1;
  int ascent_starts = 8;
};

struct ComassEstimate {
  double value = 0.0;
  Mat argmax_frame;  // n x k orthonormal
};

// Monotone lower estimate of sup over oriented k-planes of the form's
// value: seeded random frames plus projected-gradient ascent on the
// Stiefel manifold, keeping the best value seen.
ComassEstimate comass(const ConstantKForm& form, const ComassOptions& opts = {});

// Constant form plus an optional spatial perturbation with a certified
// sup bound on the perturbation's coefficient norm.
class CalibrationField {
 public:
  explicit CalibrationField(ConstantKForm omega0, double epsilon = 0.0);
  // The perturbation is measured on the given sample points at
  // construction; throws ContractViolation if any exceeds epsilon.
  CalibrationField(ConstantKForm omega0, double epsilon,
                   std::function<ConstantKForm(const Vec&)> perturbation,
                   const std::vector<Vec>& check_points);

  const ConstantKForm& constant_part() const { return omega0_; }
  double epsilon() const { return epsilon_; }
  bool has_perturbation() const { return static_cast<bool>(pert_); }

  ConstantKForm at(const Vec& x) const;
  // Largest perturbation coefficient norm over the given points.
  double measure_perturbation(const std::vector<Vec>& points) const;

  // Same field expressed in the coordinates u = (x - center)/scale.
  CalibrationField localized(const Vec& center, double scale) const;

 private:
  ConstantKForm omega0_;
  double epsilon_ = 0.0;
  std::function<ConstantKForm(const Vec&)> pert_;
};

}  // namespace calreif
