#include "calreif/forms.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/QR>
#include <Eigen/LU>

namespace calreif {

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  }
  return r;
}

MultiIndex::MultiIndex(std::vector<int> indices) : idx_(std::move(indices)) {
  for (std::size_t i = 0; i < idx_.size(); ++i) {
    if (idx_[i] < 1) throw ContractViolation("multi-index entries are 1-based");
    if (i > 0 && idx_[i] <= idx_[i - 1]) {
      throw ContractViolation("multi-index must be strictly increasing");
    }
  }
}

std::uint64_t MultiIndex::rank(int n) const {
  const int k = degree();
  if (k == 0) return 0;
  if (max_index() > n) throw ContractViolation("multi-index exceeds ambient dimension");
  std::uint64_t r = 0;
  int prev = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = prev + 1; j < idx_[static_cast<std::size_t>(i)]; ++j) {
      r += binomial(n - j, k - i - 1);
    }
    prev = idx_[static_cast<std::size_t>(i)];
  }
  return r;
}

MultiIndex MultiIndex::from_rank(int n, int k, std::uint64_t rank) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  int j = 1;
  for (int i = 0; i < k; ++i) {
    while (true) {
      const std::uint64_t block = binomial(n - j, k - i - 1);
      if (rank < block) break;
      rank -= block;
      ++j;
    }
    out.push_back(j);
    ++j;
  }
  return MultiIndex(std::move(out));
}

std::vector<MultiIndex> MultiIndex::enumerate(int n, int k) {
  std::vector<MultiIndex> out;
  if (k < 0 || k > n) return out;
  out.reserve(binomial(n, k));
  std::vector<int> cur(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) cur[static_cast<std::size_t>(i)] = i + 1;
  while (true) {
    out.emplace_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[static_cast<std::size_t>(i)] == n - (k - 1 - i)) --i;
    if (i < 0) break;
    ++cur[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) {
      cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return out;
}

int sort_with_parity(std::vector<int>& indices) {
  int sign = 1;
  const int m = static_cast<int>(indices.size());
  for (int i = 1; i < m; ++i) {
    int j = i;
    while (j > 0 && indices[static_cast<std::size_t>(j - 1)] > indices[static_cast<std::size_t>(j)]) {
      std::swap(indices[static_cast<std::size_t>(j - 1)], indices[static_cast<std::size_t>(j)]);
      sign = -sign;
      --j;
    }
  }
  for (int i = 1; i < m; ++i) {
    if (indices[static_cast<std::size_t>(i)] == indices[static_cast<std::size_t>(i - 1)]) return 0;
  }
  return sign;
}

namespace {

double det_k(const double* m, int k) {
  // Row-major k x k determinant; hand-coded through k = 4.
  switch (k) {
    case 1:
      return m[0];
    case 2:
      return m[0] * m[3] - m[1] * m[2];
    case 3:
      return m[0] * (m[4] * m[8] - m[5] * m[7]) -
             m[1] * (m[3] * m[8] - m[5] * m[6]) +
             m[2] * (m[3] * m[7] - m[4] * m[6]);
    case 4: {
      const double s0 = m[0] * m[5] - m[1] * m[4];
      const double s1 = m[0] * m[6] - m[2] * m[4];
      const double s2 = m[0] * m[7] - m[3] * m[4];
      const double s3 = m[1] * m[6] - m[2] * m[5];
      const double s4 = m[1] * m[7] - m[3] * m[5];
      const double s5 = m[2] * m[7] - m[3] * m[6];
      const double c5 = m[10] * m[15] - m[11] * m[14];
      const double c4 = m[9] * m[15] - m[11] * m[13];
      const double c3 = m[9] * m[14] - m[10] * m[13];
      const double c2 = m[8] * m[15] - m[11] * m[12];
      const double c1 = m[8] * m[14] - m[10] * m[12];
      const double c0 = m[8] * m[13] - m[9] * m[12];
      return s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0;
    }
    default: {
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          M(m, k, k);
      return Eigen::MatrixXd(M).partialPivLu().determinant();
    }
  }
}

// Cofactor matrix (row-major), cof[a*k+b] = d det / d m[a*k+b].
void cofactor_k(const double* m, int k, double* cof) {
  if (k == 1) {
    cof[0] = 1.0;
    return;
  }
  std::vector<double> minor(static_cast<std::size_t>((k - 1) * (k - 1)));
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      int t = 0;
      for (int i = 0; i < k; ++i) {
        if (i == a) continue;
        for (int j = 0; j < k; ++j) {
          if (j == b) continue;
          minor[static_cast<std::size_t>(t++)] = m[i * k + j];
        }
      }
      const double d = det_k(minor.data(), k - 1);
      cof[a * k + b] = ((a + b) % 2 == 0) ? d : -d;
    }
  }
}

// Thin QR orthonormalization with the R diagonal kept positive.
Mat orthonormalize_columns(const Mat& span) {
  const int k = static_cast<int>(span.cols());
  Eigen::HouseholderQR<Mat> qr(span);
  Mat Q = qr.householderQ() * Mat::Identity(span.rows(), k);
  Mat R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  for (int j = 0; j < k; ++j) {
    if (std::abs(R(j, j)) < 1e-12) {
      throw ContractViolation("degenerate span: columns not independent");
    }
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

}  // namespace

ConstantKForm::ConstantKForm(int n, int k) : n_(n), k_(k) {
  if (n < 1 || k < 1 || k > n) {
    throw ContractViolation("form degree must satisfy 1 <= k <= n");
  }
  const std::uint64_t dim = binomial(n, k);
  if (dim > (1u << 22)) throw ContractViolation("form basis too large");
  coef_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  basis_ = MultiIndex::enumerate(n, k);
}

double ConstantKForm::coeff(const MultiIndex& idx) const {
  if (idx.degree() != k_) throw ContractViolation("multi-index degree mismatch");
  return coef_[static_cast<Eigen::Index>(idx.rank(n_))];
}

void ConstantKForm::set_coeff(const MultiIndex& idx, double c) {
  if (idx.degree() != k_) throw ContractViolation("multi-index degree mismatch");
  coef_[static_cast<Eigen::Index>(idx.rank(n_))] = c;
}

void ConstantKForm::add_term(std::vector<int> indices, double c) {
  if (static_cast<int>(indices.size()) != k_) {
    throw ContractViolation("term degree mismatch");
  }
  const int sign = sort_with_parity(indices);
  if (sign == 0) return;
  MultiIndex idx(std::move(indices));
  if (idx.max_index() > n_) throw ContractViolation("term index out of range");
  coef_[static_cast<Eigen::Index>(idx.rank(n_))] += sign * c;
}

double ConstantKForm::evaluate_frame(const Mat& V) const {
  if (V.rows() != n_ || V.cols() != k_) {
    throw ContractViolation("frame shape mismatch with form");
  }
  double acc = 0.0;
  double sub[16];
  std::vector<double> sub_big;
  if (k_ > 4) sub_big.resize(static_cast<std::size_t>(k_) * k_);
  double* s = (k_ <= 4) ? sub : sub_big.data();
  for (std::size_t t = 0; t < basis_.size(); ++t) {
    const double c = coef_[static_cast<Eigen::Index>(t)];
    if (c == 0.0) continue;
    const MultiIndex& I = basis_[t];
    for (int a = 0; a < k_; ++a) {
      const int row = I[a] - 1;
      for (int b = 0; b < k_; ++b) s[a * k_ + b] = V(row, b);
    }
    acc += c * det_k(s, k_);
  }
  return acc;
}

double ConstantKForm::evaluate(const OrientedPlane& plane) const {
  if (plane.ambient_dim() != n_ || plane.dim() != k_) {
    throw ContractViolation("plane shape mismatch with form");
  }
  return evaluate_frame(plane.frame());
}

ConstantKForm ConstantKForm::operator+(const ConstantKForm& o) const {
  if (n_ != o.n_ || k_ != o.k_) throw ContractViolation("form shape mismatch");
  ConstantKForm r = *this;
  r.coef_ += o.coef_;
  return r;
}

ConstantKForm ConstantKForm::operator-(const ConstantKForm& o) const {
  if (n_ != o.n_ || k_ != o.k_) throw ContractViolation("form shape mismatch");
  ConstantKForm r = *this;
  r.coef_ -= o.coef_;
  return r;
}

ConstantKForm ConstantKForm::operator*(double sc) const {
  ConstantKForm r = *this;
  r.coef_ *= sc;
  return r;
}

ConstantKForm wedge(const ConstantKForm& a, const ConstantKForm& b) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw ContractViolation("wedge on mismatched ambient dimensions");
  }
  ConstantKForm out(a.ambient_dim(), a.degree() + b.degree());
  const auto& ba = a.support_basis();
  const auto& bb = b.support_basis();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    const double ca = a.coefficients()[static_cast<Eigen::Index>(i)];
    if (ca == 0.0) continue;
    for (std::size_t j = 0; j < bb.size(); ++j) {
      const double cb = b.coefficients()[static_cast<Eigen::Index>(j)];
      if (cb == 0.0) continue;
      std::vector<int> merged = ba[i].indices();
      merged.insert(merged.end(), bb[j].indices().begin(), bb[j].indices().end());
      out.add_term(std::move(merged), ca * cb);
    }
  }
  return out;
}

ConstantKForm kahler_form(int n_complex) {
  ConstantKForm w(2 * n_complex, 2);
  for (int j = 1; j <= n_complex; ++j) w.add_term({2 * j - 1, 2 * j}, 1.0);
  return w;
}

ConstantKForm kahler_power(int n_complex, int k) {
  if (k < 1 || k > n_complex) {
    throw ContractViolation("kahler power degree must satisfy 1 <= k <= n_complex");
  }
  const ConstantKForm w = kahler_form(n_complex);
  ConstantKForm acc = w;
  double factorial = 1.0;
  for (int i = 2; i <= k; ++i) {
    acc = wedge(acc, w);
    factorial *= i;
  }
  return acc * (1.0 / factorial);
}

ConstantKForm g2_associative() {
  ConstantKForm f(7, 3);
  f.add_term({1, 2, 3}, 1.0);
  f.add_term({1, 6, 7}, -1.0);
  f.add_term({5, 2, 7}, -1.0);
  f.add_term({5, 6, 3}, -1.0);
  f.add_term({4, 1, 5}, -1.0);
  f.add_term({4, 2, 6}, -1.0);
  f.add_term({4, 3, 7}, -1.0);
  return f;
}

ConstantKForm g2_coassociative() {
  ConstantKForm f(7, 4);
  f.add_term({4, 5, 6, 7}, 1.0);
  f.add_term({4, 5, 2, 3}, -1.0);
  f.add_term({4, 1, 6, 3}, -1.0);
  f.add_term({4, 1, 2, 7}, -1.0);
  f.add_term({2, 6, 3, 7}, -1.0);
  f.add_term({1, 5, 3, 7}, -1.0);
  f.add_term({1, 5, 2, 6}, -1.0);
  return f;
}

ConstantKForm spin7_form() {
  ConstantKForm f(8, 4);
  f.add_term({1, 2, 5, 6}, 1.0);
  f.add_term({1, 2, 7, 8}, 1.0);
  f.add_term({3, 4, 5, 6}, 1.0);
  f.add_term({3, 4, 7, 8}, 1.0);
  f.add_term({1, 3, 5, 7}, 1.0);
  f.add_term({1, 3, 6, 8}, -1.0);
  f.add_term({2, 4, 5, 7}, -1.0);
  f.add_term({2, 4, 6, 8}, 1.0);
  f.add_term({1, 4, 5, 8}, -1.0);
  f.add_term({1, 4, 6, 7}, -1.0);
  f.add_term({2, 3, 5, 8}, -1.0);
  f.add_term({2, 3, 6, 7}, -1.0);
  f.add_term({1, 2, 3, 4}, 1.0);
  f.add_term({5, 6, 7, 8}, 1.0);
  return f;
}

ConstantKForm special_lagrangian(int n_complex, double phase) {
  if (n_complex < 1) throw ContractViolation("need at least one complex factor");
  const int n = 2 * n_complex;
  // Expand (dx1 + i dy1) ^ ... keeping real and imaginary parts.
  ConstantKForm re(n, 1), im(n, 1);
  re.add_term({1}, 1.0);
  im.add_term({2}, 1.0);
  for (int j = 2; j <= n_complex; ++j) {
    ConstantKForm dx(n, 1), dy(n, 1);
    dx.add_term({2 * j - 1}, 1.0);
    dy.add_term({2 * j}, 1.0);
    ConstantKForm re2 = wedge(re, dx) - wedge(im, dy);
    ConstantKForm im2 = wedge(re, dy) + wedge(im, dx);
    re = std::move(re2);
    im = std::move(im2);
  }
  return re * std::cos(phase) + im * std::sin(phase);
}

ConstantKForm base_volume_form(int n, int k) {
  ConstantKForm f(n, k);
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
  f.set_coeff(MultiIndex(idx), 1.0);
  return f;
}

namespace {

// Gradient of evaluate_frame with respect to the frame entries.
Mat evaluation_gradient(const ConstantKForm& form, const Mat& V) {
  const int n = form.ambient_dim();
  const int k = form.degree();
  Mat G = Mat::Zero(n, k);
  std::vector<double> sub(static_cast<std::size_t>(k) * k);
  std::vector<double> cof(static_cast<std::size_t>(k) * k);
  const auto& basis = form.support_basis();
  for (std::size_t t = 0; t < basis.size(); ++t) {
    const double c = form.coefficients()[static_cast<Eigen::Index>(t)];
    if (c == 0.0) continue;
    const MultiIndex& I = basis[t];
    for (int a = 0; a < k; ++a) {
      const int row = I[a] - 1;
      for (int b = 0; b < k; ++b) sub[static_cast<std::size_t>(a * k + b)] = V(row, b);
    }
    cofactor_k(sub.data(), k, cof.data());
    for (int a = 0; a < k; ++a) {
      const int row = I[a] - 1;
      for (int b = 0; b < k; ++b) {
        G(row, b) += c * cof[static_cast<std::size_t>(a * k + b)];
      }
    }
  }
  return G;
}

}  // namespace

ComassEstimate comass(const ConstantKForm& form, const ComassOptions& opts) {
  const int n = form.ambient_dim();
  const int k = form.degree();
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ComassEstimate best;
  best.argmax_frame = Mat::Identity(n, k);
  // Keep the strongest sample frames as ascent seeds.
  std::vector<std::pair<double, Mat>> seeds;
  for (int s = 0; s < opts.samples; ++s) {
    Mat V(n, k);
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < n; ++i) V(i, j) = gauss(rng);
    }
    Mat Q;
    try {
      Q = orthonormalize_columns(V);
    } catch (const ContractViolation&) {
      continue;  // measure-zero degenerate draw
    }
    double val = form.evaluate_frame(Q);
    if (val < 0) {
      Q.col(0) = -Q.col(0);
      val = -val;
    }
    if (val > best.value) {
      best.value = val;
      best.argmax_frame = Q;
    }
    if (static_cast<int>(seeds.size()) < opts.ascent_starts) {
      seeds.emplace_back(val, Q);
      std::sort(seeds.begin(), seeds.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
    } else if (!seeds.empty() && val > seeds.back().first) {
      seeds.back() = {val, Q};
      std::sort(seeds.begin(), seeds.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
    }
  }

  for (auto& [f0, V0] : seeds) {
    Mat V = V0;
    double f = f0;
    double step = 0.1;
    for (int it = 0; it < opts.ascent_iters; ++it) {
      Mat G = evaluation_gradient(form, V);
      Mat A = V.transpose() * G;
      G -= V * ((A + A.transpose()) * 0.5);  // Stiefel tangent projection
      Mat Vn;
      try {
        Vn = orthonormalize_columns(V + step * G);
      } catch (const ContractViolation&) {
        step *= 0.5;
        continue;
      }
      double fn = form.evaluate_frame(Vn);
      if (fn < 0) {
        Vn.col(0) = -Vn.col(0);
        fn = -fn;
      }
      if (fn > f) {
        V = std::move(Vn);
        f = fn;
      } else {
        step *= 0.5;
        if (step < 1e-14) break;
      }
    }
    if (f > best.value) {
      best.value = f;
      best.argmax_frame = V;
    }
  }
  return best;
}

CalibrationField::CalibrationField(ConstantKForm omega0, double epsilon)
    : omega0_(std::move(omega0)), epsilon_(epsilon) {
  if (epsilon_ < 0) throw ContractViolation("field epsilon must be nonnegative");
}

CalibrationField::CalibrationField(ConstantKForm omega0, double epsilon,
                                   std::function<ConstantKForm(const Vec&)> perturbation,
                                   const std::vector<Vec>& check_points)
    : omega0_(std::move(omega0)), epsilon_(epsilon), pert_(std::move(perturbation)) {
  if (epsilon_ < 0) throw ContractViolation("field epsilon must be nonnegative");
  const double measured = measure_perturbation(check_points);
  if (measured > epsilon_) {
    throw ContractViolation("perturbation exceeds declared epsilon on check points");
  }
}

ConstantKForm CalibrationField::at(const Vec& x) const {
  if (!pert_) return omega0_;
  return omega0_ + pert_(x);
}

double CalibrationField::measure_perturbation(const std::vector<Vec>& points) const {
  if (!pert_) return 0.0;
  double worst = 0.0;
  for (const auto& p : points) {
    worst = std::max(worst, pert_(p).coefficient_norm());
  }
  return worst;
}

CalibrationField CalibrationField::localized(const Vec& center, double scale) const {
  if (scale <= 0) throw ContractViolation("localization scale must be positive");
  if (!pert_) return CalibrationField(omega0_, epsilon_);
  auto pert = pert_;
  Vec c = center;
  double s = scale;
  CalibrationField out(omega0_, epsilon_);
  out.pert_ = [pert, c, s](const Vec& u) { return pert(c + s * u); };
  return out;
}

}  // namespace calreif
