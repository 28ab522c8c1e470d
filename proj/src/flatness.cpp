#include "calreif/flatness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "calreif/parallel.hpp"

namespace calreif {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Greedy farthest-point selection with optional pre-chosen seed rows.
// dist[] holds each candidate's distance to the chosen set; a lazy max-heap
// provides the argmax and a radius query prunes the update after each pick
// (only points closer to the new center than their current distance move).
std::vector<int> fps_net(const PointCloud& cloud,
                         const std::vector<int>& candidates, double spacing,
                         const std::vector<int>& seeds) {
  std::vector<int> chosen;
  if (candidates.empty()) return chosen;

  const int total = cloud.size();
  std::vector<char> is_candidate(static_cast<std::size_t>(total), 0);
  for (int i : candidates) is_candidate[static_cast<std::size_t>(i)] = 1;
  std::vector<double> dist(static_cast<std::size_t>(total), kInf);

  struct Entry {
    double d;
    int idx;
  };
  struct Worse {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.d != b.d) return a.d < b.d;
      return a.idx > b.idx;  // equal distances resolve to the lower index
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Worse> heap;

  auto add_center_full = [&](int c) {
    chosen.push_back(c);
    const Vec pc = cloud.point(c);
    for (int i : candidates) {
      const double d = (cloud.point(i) - pc).norm();
      if (d < dist[static_cast<std::size_t>(i)]) dist[static_cast<std::size_t>(i)] = d;
    }
  };

  for (int s : seeds) add_center_full(s);
  if (chosen.empty()) {
    int start = candidates.front();
    double best = cloud.point(start).norm();
    for (int i : candidates) {
      const double norm = cloud.point(i).norm();
      if (norm < best || (norm == best && i < start)) {
        best = norm;
        start = i;
      }
    }
    add_center_full(start);
  }
  for (int i : candidates) heap.push({dist[static_cast<std::size_t>(i)], i});

  while (!heap.empty()) {
    const Entry top = heap.top();
    heap.pop();
    if (top.d != dist[static_cast<std::size_t>(top.idx)]) continue;  // stale
    if (top.d < spacing) break;
    chosen.push_back(top.idx);
    const Vec pc = cloud.point(top.idx);
    // Every candidate distance is <= top.d, so changes happen inside this ball.
    for (int i : cloud.points_in_ball(Ball(pc, top.d))) {
      if (!is_candidate[static_cast<std::size_t>(i)]) continue;
      const double d = (cloud.point(i) - pc).norm();
      if (d < dist[static_cast<std::size_t>(i)]) {
        dist[static_cast<std::size_t>(i)] = d;
        heap.push({d, i});
      }
    }
  }
  return chosen;
}

// Rows whose ball of radius r stays inside the domain ball, with a one-h
// slop for rim quantization; never empty (falls back to the innermost point).
std::vector<int> eligible_rows(const PointCloud& cloud, double r, double h) {
  const double limit = cloud.domain_radius() - r + h;
  std::vector<int> rows;
  int innermost = 0;
  double best = kInf;
  for (int i = 0; i < cloud.size(); ++i) {
    const double norm = cloud.point(i).norm();
    if (norm <= limit) rows.push_back(i);
    if (norm < best) {
      best = norm;
      innermost = i;
    }
  }
  if (rows.empty() && cloud.size() > 0) rows.push_back(innermost);
  return rows;
}

}  // namespace

std::vector<int> farthest_point_net(const PointCloud& cloud,
                                    const std::vector<int>& candidates,
                                    double spacing) {
  return fps_net(cloud, candidates, spacing, {});
}

FlatnessRecord flatness_at(const PointCloud& cloud, const CalibrationField& field,
                           const Vec& x, double r, int k,
                           const FlatnessOptions& opts) {
  FlatnessRecord rec;
  rec.center = x;
  rec.radius = r;
  const Ball ball(x, r);
  const ConstantKForm local = field.at(x);

  try {
    const PlaneFit sym = best_fit_plane(cloud, ball, k, FitMode::Symmetric,
                                        opts.fit, &local);
    rec.theta = sym.objective / r;
    rec.plane = sym.plane;
    rec.omega = sym.omega_value;
    rec.orientation_ambiguous = sym.orientation_ambiguous;

    const PlaneFit one = best_fit_plane(cloud, ball, k, FitMode::OneSided, opts.fit);
    // The theta-plane's own one-sided deviation caps beta, and the final
    // clamp by theta itself pins down beta <= theta on the reported numbers
    // regardless of how either search converged.
    const double via_theta_plane = one_sided_deviation(cloud, ball, sym.plane);
    rec.beta = std::min(std::min(one.objective, via_theta_plane) / r, rec.theta);
  } catch (const DegenerateFit& deg) {
    rec.degenerate = true;
    rec.plane = deg.fallback;
    double value = local.evaluate(deg.fallback);
    if (value < 0) {
      rec.plane.flip_orientation();
      value = -value;
    }
    rec.omega = value;
    rec.orientation_ambiguous = std::abs(value) < 1e-9;
  }
  return rec;
}

ReifenbergCertificate certify(const PointCloud& cloud,
                              const CalibrationField& field, int k,
                              const CertifyOptions& opts) {
  if (opts.coarsest_exp > opts.finest_exp) {
    throw ContractViolation("coarsest scale exponent exceeds finest");
  }
  if (field.constant_part().ambient_dim() != cloud.dim() ||
      field.constant_part().degree() != k) {
    throw ContractViolation("calibration field shape does not match cloud");
  }
  const double h = cloud.resolution();
  const double finest = std::ldexp(1.0, -opts.finest_exp);
  if (finest < 4.0 * h) {
    throw ResolutionError("finest scale " + std::to_string(finest) +
                          " is below the resolution floor 4h = " +
                          std::to_string(4.0 * h));
  }

  ReifenbergCertificate cert;
  cert.k = k;
  cert.n = cloud.dim();
  cert.h = h;
  cert.domain_radius = cloud.domain_radius();
  cert.delta = opts.delta;
  cert.alpha = opts.alpha;
  cert.net_slack = opts.net_slack;

  const int num_scales = opts.finest_exp - opts.coarsest_exp + 1;
  std::vector<std::vector<int>> nets(static_cast<std::size_t>(num_scales));
  std::vector<int> coarse_net;
  for (int s = 0; s < num_scales; ++s) {
    const int j = opts.coarsest_exp + s;
    const double r = std::ldexp(1.0, -j);
    cert.scales.push_back(r);
    const std::vector<int> rows = eligible_rows(cloud, r, h);
    // Seeding every net with the coarse centers gives each of them a record
    // at every scale, which is what the dyadic sum below consumes.
    nets[static_cast<std::size_t>(s)] =
        fps_net(cloud, rows, opts.net_slack * r, coarse_net);
    if (s == 0) coarse_net = nets[0];
  }

  struct Job {
    int scale_slot;
    int row;
  };
  std::vector<Job> jobs;
  std::vector<std::size_t> offsets(static_cast<std::size_t>(num_scales));
  for (int s = 0; s < num_scales; ++s) {
    offsets[static_cast<std::size_t>(s)] = jobs.size();
    for (int row : nets[static_cast<std::size_t>(s)]) jobs.push_back({s, row});
  }

  cert.records.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    const double r = cert.scales[static_cast<std::size_t>(job.scale_slot)];
    FlatnessRecord rec =
        flatness_at(cloud, field, cloud.point(job.row), r, k, opts.flat);
    rec.scale_index = opts.coarsest_exp + job.scale_slot;
    cert.records[i] = std::move(rec);
  });

  double theta_max = 0.0, beta_max = 0.0, omega_min = kInf;
  int valid = 0;
  for (int s = 0; s < num_scales; ++s) {
    ScaleSummary sum;
    sum.scale_index = opts.coarsest_exp + s;
    sum.radius = cert.scales[static_cast<std::size_t>(s)];
    sum.centers = static_cast<int>(nets[static_cast<std::size_t>(s)].size());
    sum.omega_min = kInf;
    const std::size_t begin = offsets[static_cast<std::size_t>(s)];
    const std::size_t end = begin + static_cast<std::size_t>(sum.centers);
    for (std::size_t i = begin; i < end; ++i) {
      const FlatnessRecord& rec = cert.records[i];
      if (rec.degenerate) continue;
      ++valid;
      sum.theta_max = std::max(sum.theta_max, rec.theta);
      sum.beta_max = std::max(sum.beta_max, rec.beta);
      sum.omega_min = std::min(sum.omega_min, rec.omega);
    }
    if (sum.omega_min == kInf) sum.omega_min = 0.0;
    theta_max = std::max(theta_max, sum.theta_max);
    beta_max = std::max(beta_max, sum.beta_max);
    omega_min = std::min(omega_min, sum.omega_min);
    cert.per_scale.push_back(sum);
  }
  if (valid == 0) throw InputError("no ball produced a usable flatness record");

  cert.delta_star = theta_max;
  cert.beta_star = beta_max;
  cert.alpha_star = omega_min;
  cert.delta_star_net = theta_max * (1.0 + 2.0 * opts.net_slack);

  const double ln2 = std::log(2.0);
  cert.dini_centers = static_cast<int>(coarse_net.size());
  for (std::size_t c = 0; c < coarse_net.size(); ++c) {
    double acc = 0.0;
    for (int s = 0; s < num_scales; ++s) {
      const FlatnessRecord& rec =
          cert.records[offsets[static_cast<std::size_t>(s)] + c];
      if (!rec.degenerate) acc += rec.theta * rec.theta * ln2;
    }
    cert.dini_max = std::max(cert.dini_max, acc);
  }

  cert.flat_enough = cert.delta_star <= opts.delta;
  cert.positive_enough = cert.alpha_star > opts.alpha;
  cert.verdict = cert.flat_enough && cert.positive_enough;
  return cert;
}

DiniReport dini_profile(const PointCloud& cloud, const Vec& x, int k,
                        int coarsest_exp, int finest_exp,
                        const FlatnessOptions& opts) {
  if (coarsest_exp > finest_exp) {
    throw ContractViolation("coarsest scale exponent exceeds finest");
  }
  DiniReport report;
  const double h = cloud.resolution();
  report.truncated_at = 4.0 * h;
  report.requested_scales = finest_exp - coarsest_exp + 1;
  const double ln2 = std::log(2.0);
  for (int j = coarsest_exp; j <= finest_exp; ++j) {
    const double r = std::ldexp(1.0, -j);
    if (r < report.truncated_at) break;  // below the resolution floor
    try {
      const PlaneFit fit =
          best_fit_plane(cloud, Ball(x, r), k, FitMode::Symmetric, opts.fit);
      const double theta = fit.objective / r;
      report.scales.push_back(r);
      report.thetas.push_back(theta);
      report.sum += theta * theta * ln2;
    } catch (const DegenerateFit&) {
      break;
    }
  }
  report.used_scales = static_cast<int>(report.scales.size());
  return report;
}

}  // namespace calreif
