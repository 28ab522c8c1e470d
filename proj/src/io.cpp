#include "calreif/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "calreif/errors.hpp"

namespace calreif {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// doubles pass through nlohmann untouched; its writer emits null for
// non-finite values, so readers must map null back to NaN
double jget(const Json& j, const char* key) {
  const Json& v = j.at(key);
  return v.is_null() ? kNan : v.get<double>();
}

Json vec_to(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from(const Json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Json& e = a.at(static_cast<std::size_t>(i));
    v[i] = e.is_null() ? kNan : e.get<double>();
  }
  return v;
}

Json mat_to(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to(m.row(i).transpose()));
  return rows;
}

Mat mat_from(const Json& rows) {
  if (rows.empty()) return Mat();
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = static_cast<Eigen::Index>(rows.at(0).size());
  Mat m(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i) {
    const Json& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != nc) {
      throw InputError("ragged matrix rows in JSON input");
    }
    m.row(i) = vec_from(row).transpose();
  }
  return m;
}

void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw InputError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// "# key = value" comment metadata in cloud files
bool comment_value(const std::string& line, const char* key, double* out) {
  std::string body = trim(line.substr(1));
  const std::string k(key);
  if (body.compare(0, k.size(), k) != 0) return false;
  std::string rest = trim(body.substr(k.size()));
  if (rest.empty() || rest[0] != '=') return false;
  rest = trim(rest.substr(1));
  try {
    std::size_t used = 0;
    double v = std::stod(rest, &used);
    if (used != rest.size()) return false;
    *out = v;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

Json spec_to_json(const GeneratorSpec& spec) {
  Json j;
  switch (spec.kind) {
    case GeneratorSpec::Kind::Plane: j["kind"] = "plane"; break;
    case GeneratorSpec::Kind::Graph: j["kind"] = "graph"; break;
    case GeneratorSpec::Kind::ComplexCurve: j["kind"] = "complex_curve"; break;
    case GeneratorSpec::Kind::CalibratedPlane: j["kind"] = "calibrated_plane"; break;
    case GeneratorSpec::Kind::Koch: j["kind"] = "koch"; break;
    case GeneratorSpec::Kind::Perturbed: j["kind"] = "perturbed"; break;
  }
  j["n"] = spec.n;
  j["k"] = spec.k;
  j["h"] = spec.h;
  j["domain_radius"] = spec.domain_radius;
  j["seed"] = spec.seed;
  if (spec.kind == GeneratorSpec::Kind::Graph) {
    j["gradient"] = mat_to(spec.gradient);
    j["noise_amplitude"] = spec.noise_amplitude;
    j["noise_frequency"] = spec.noise_frequency;
    j["noise_modes"] = spec.noise_modes;
  }
  if (spec.kind == GeneratorSpec::Kind::ComplexCurve) j["curve_coeff"] = spec.curve_coeff;
  if (spec.kind == GeneratorSpec::Kind::CalibratedPlane) {
    j["form_name"] = spec.form_name;
    j["monomial"] = spec.monomial;
  }
  if (spec.kind == GeneratorSpec::Kind::Koch) {
    j["eta"] = spec.eta;
    j["depth"] = spec.depth;
  }
  if (spec.kind == GeneratorSpec::Kind::Perturbed) {
    j["delta"] = spec.delta;
    if (spec.base) j["base"] = spec_to_json(*spec.base);
  }
  return j;
}

}  // namespace

CloudFile read_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open cloud file '" + path + "'");
  std::vector<double> values;
  Eigen::Index cols = 0;
  std::size_t rows = 0;
  double k_val = 0.0, h_val = 0.0, dom_val = 0.0;
  bool have_dom = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      double v = 0.0;
      if (comment_value(t, "k", &v)) k_val = v;
      else if (comment_value(t, "h", &v)) h_val = v;
      else if (comment_value(t, "domain_radius", &v)) { dom_val = v; have_dom = true; }
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(t);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw InputError("");
      } catch (const std::exception&) {
        throw InputError("bad number '" + cell + "' at " + path + ":" +
                         std::to_string(lineno));
      }
    }
    if (row.empty()) continue;
    if (cols == 0) cols = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw InputError("row width changes at " + path + ":" + std::to_string(lineno));
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw InputError("cloud file '" + path + "' has no points");
  RowMat pts(static_cast<Eigen::Index>(rows), cols);
  std::copy(values.begin(), values.end(), pts.data());
  PointCloud cloud(std::move(pts));
  if (have_dom) cloud.set_domain_radius(dom_val);
  CloudFile out(std::move(cloud));
  out.k = static_cast<int>(k_val);
  out.h_recorded = h_val;
  return out;
}

void write_cloud_csv(const std::string& path, const PointCloud& cloud,
                     int k, double h) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write cloud file '" + path + "'");
  if (k > 0) out << "# k = " << k << "\n";
  if (h > 0) out << "# h = " << g17(h) << "\n";
  if (cloud.has_domain_radius()) {
    out << "# domain_radius = " << g17(cloud.domain_radius()) << "\n";
  }
  const RowMat& pts = cloud.points();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      if (j) out << ',';
      out << g17(pts(i, j));
    }
    out << "\n";
  }
}

Json form_to_json(const ConstantKForm& form) {
  Json j;
  j["n"] = form.ambient_dim();
  j["k"] = form.degree();
  Json terms = Json::array();
  const auto& basis = form.support_basis();
  const auto& coef = form.coefficients();
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double c = coef[static_cast<Eigen::Index>(i)];
    if (c == 0.0) continue;
    Json t;
    t["indices"] = basis[i].indices();
    t["coeff"] = c;
    terms.push_back(std::move(t));
  }
  j["terms"] = std::move(terms);
  return j;
}

ConstantKForm form_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("form JSON must be an object");
  reject_unknown_keys(j, {"n", "k", "terms"}, "form");
  const int n = j.at("n").get<int>();
  const int k = j.at("k").get<int>();
  if (n < 1 || k < 1 || k > n) {
    throw InputError("form needs 1 <= k <= n, got k=" + std::to_string(k) +
                     " n=" + std::to_string(n));
  }
  ConstantKForm form(n, k);
  const Json& terms = j.at("terms");
  if (!terms.is_array()) throw InputError("form 'terms' must be an array");
  for (const Json& t : terms) {
    reject_unknown_keys(t, {"indices", "coeff"}, "form term");
    std::vector<int> idx = t.at("indices").get<std::vector<int>>();
    if (static_cast<int>(idx.size()) != k) {
      throw InputError("form term needs exactly k indices");
    }
    for (int v : idx) {
      if (v < 1 || v > n) {
        throw InputError("form index " + std::to_string(v) + " outside 1.." +
                         std::to_string(n));
      }
    }
    form.add_term(std::move(idx), t.at("coeff").get<double>());
  }
  return form;
}

ConstantKForm read_form_json(const std::string& path) {
  return form_from_json(read_json_file(path));
}

void write_form_json(const std::string& path, const ConstantKForm& form) {
  write_json_file(path, form_to_json(form));
}

ConstantKForm make_named_form(const std::string& name, int n, int k,
                              const std::vector<int>& monomial, double phase) {
  if (name == "axis") {
    if (monomial.empty()) return base_volume_form(n, k);
    if (static_cast<int>(monomial.size()) != k) {
      throw InputError("axis form needs a monomial with exactly k indices");
    }
    ConstantKForm f(n, k);
    f.add_term(monomial, 1.0);
    return f;
  }
  if (name == "kahler" || name == "kahler_power") {
    if (n % 2 || k % 2) throw InputError("kahler powers need even n and even k");
    return kahler_power(n / 2, k / 2);
  }
  if (name == "g2_associative" || name == "g2") {
    if (n != 7 || k != 3) throw InputError("g2_associative lives in n=7, k=3");
    return g2_associative();
  }
  if (name == "g2_coassociative") {
    if (n != 7 || k != 4) throw InputError("g2_coassociative lives in n=7, k=4");
    return g2_coassociative();
  }
  if (name == "spin7") {
    if (n != 8 || k != 4) throw InputError("spin7 lives in n=8, k=4");
    return spin7_form();
  }
  if (name == "special_lagrangian" || name == "slag") {
    if (n % 2 || k != n / 2) {
      throw InputError("special_lagrangian needs even n and k = n/2");
    }
    return special_lagrangian(n / 2, phase);
  }
  throw InputError("unknown form name '" + name +
                   "' (axis, kahler, g2_associative, g2_coassociative, spin7, "
                   "special_lagrangian)");
}

void to_json(Json& j, const OrientedPlane& p) {
  if (p.ambient_dim() == 0) {
    j = Json{{"base", Json::array()}, {"frame", Json::array()}};
    return;
  }
  j = Json{{"base", vec_to(p.base())}, {"frame", mat_to(p.frame())}};
}

void from_json(const Json& j, OrientedPlane& p) {
  if (j.at("base").empty()) {
    p = OrientedPlane();
    return;
  }
  p = OrientedPlane(vec_from(j.at("base")), mat_from(j.at("frame")));
}

void to_json(Json& j, const FlatnessRecord& r) {
  j = Json{{"center", vec_to(r.center)},
           {"radius", r.radius},
           {"scale_index", r.scale_index},
           {"theta", r.theta},
           {"beta", r.beta},
           {"omega", r.omega},
           {"orientation_ambiguous", r.orientation_ambiguous},
           {"degenerate", r.degenerate},
           {"plane", r.plane}};
}

void from_json(const Json& j, FlatnessRecord& r) {
  r.center = vec_from(j.at("center"));
  r.radius = jget(j, "radius");
  r.scale_index = j.at("scale_index").get<int>();
  r.theta = jget(j, "theta");
  r.beta = jget(j, "beta");
  r.omega = jget(j, "omega");
  r.orientation_ambiguous = j.at("orientation_ambiguous").get<bool>();
  r.degenerate = j.at("degenerate").get<bool>();
  r.plane = j.at("plane").get<OrientedPlane>();
}

void to_json(Json& j, const ScaleSummary& s) {
  j = Json{{"scale_index", s.scale_index}, {"radius", s.radius},
           {"centers", s.centers},         {"theta_max", s.theta_max},
           {"beta_max", s.beta_max},       {"omega_min", s.omega_min}};
}

void from_json(const Json& j, ScaleSummary& s) {
  s.scale_index = j.at("scale_index").get<int>();
  s.radius = jget(j, "radius");
  s.centers = j.at("centers").get<int>();
  s.theta_max = jget(j, "theta_max");
  s.beta_max = jget(j, "beta_max");
  s.omega_min = jget(j, "omega_min");
}

void to_json(Json& j, const ReifenbergCertificate& c) {
  j = Json{{"k", c.k},
           {"n", c.n},
           {"h", c.h},
           {"domain_radius", c.domain_radius},
           {"delta", c.delta},
           {"alpha", c.alpha},
           {"net_slack", c.net_slack},
           {"scales", c.scales},
           {"per_scale", c.per_scale},
           {"records", c.records},
           {"delta_star", c.delta_star},
           {"beta_star", c.beta_star},
           {"alpha_star", c.alpha_star},
           {"delta_star_net", c.delta_star_net},
           {"dini_max", c.dini_max},
           {"dini_centers", c.dini_centers},
           {"flat_enough", c.flat_enough},
           {"positive_enough", c.positive_enough},
           {"verdict", c.verdict}};
  // derived convenience list of the balls that break a hypothesis; ignored
  // on input so re-serialization reproduces it from the records
  Json failing = Json::array();
  for (const FlatnessRecord& r : c.records) {
    const bool flat_fail = r.degenerate || r.theta > c.delta;
    const bool pos_fail = !r.degenerate && r.omega <= c.alpha;
    if (!flat_fail && !pos_fail) continue;
    failing.push_back(Json{{"center", vec_to(r.center)},
                           {"radius", r.radius},
                           {"scale_index", r.scale_index},
                           {"theta", r.theta},
                           {"omega", r.omega},
                           {"degenerate", r.degenerate}});
  }
  j["failing"] = std::move(failing);
}

void from_json(const Json& j, ReifenbergCertificate& c) {
  c.k = j.at("k").get<int>();
  c.n = j.at("n").get<int>();
  c.h = jget(j, "h");
  c.domain_radius = jget(j, "domain_radius");
  c.delta = jget(j, "delta");
  c.alpha = jget(j, "alpha");
  c.net_slack = jget(j, "net_slack");
  c.scales = j.at("scales").get<std::vector<double>>();
  c.per_scale = j.at("per_scale").get<std::vector<ScaleSummary>>();
  c.records = j.at("records").get<std::vector<FlatnessRecord>>();
  c.delta_star = jget(j, "delta_star");
  c.beta_star = jget(j, "beta_star");
  c.alpha_star = jget(j, "alpha_star");
  c.delta_star_net = jget(j, "delta_star_net");
  c.dini_max = jget(j, "dini_max");
  c.dini_centers = j.at("dini_centers").get<int>();
  c.flat_enough = j.at("flat_enough").get<bool>();
  c.positive_enough = j.at("positive_enough").get<bool>();
  c.verdict = j.at("verdict").get<bool>();
}

void to_json(Json& j, const LevelCheck& c) {
  j = Json{{"level", c.level},
           {"r", c.r},
           {"hausdorff_to_cloud", c.hausdorff_to_cloud},
           {"p3_ratio", c.p3_ratio},
           {"grassmann_drift", c.grassmann_drift},
           {"p4_ratio", c.p4_ratio},
           {"velocity", c.velocity},
           {"p5_ratio", c.p5_ratio},
           {"omega_min", c.omega_min},
           {"positive_fraction", c.positive_fraction},
           {"identity_outside", c.identity_outside},
           {"combined_ratio", c.combined_ratio}};
}

void from_json(const Json& j, LevelCheck& c) {
  c.level = j.at("level").get<int>();
  c.r = jget(j, "r");
  c.hausdorff_to_cloud = jget(j, "hausdorff_to_cloud");
  c.p3_ratio = jget(j, "p3_ratio");
  c.grassmann_drift = jget(j, "grassmann_drift");
  c.p4_ratio = jget(j, "p4_ratio");
  c.velocity = jget(j, "velocity");
  c.p5_ratio = jget(j, "p5_ratio");
  c.omega_min = jget(j, "omega_min");
  c.positive_fraction = jget(j, "positive_fraction");
  c.identity_outside = j.at("identity_outside").get<bool>();
  c.combined_ratio = jget(j, "combined_ratio");
}

void to_json(Json& j, const FamilyReport& r) {
  j = Json{{"delta", r.delta},
           {"eps_field", r.eps_field},
           {"levels", r.levels},
           {"constant", r.constant},
           {"stability", r.stability},
           {"identity_outside_all", r.identity_outside_all},
           {"positivity_all", r.positivity_all},
           {"complete", r.complete}};
}

void from_json(const Json& j, FamilyReport& r) {
  r.delta = jget(j, "delta");
  r.eps_field = jget(j, "eps_field");
  r.levels = j.at("levels").get<std::vector<LevelCheck>>();
  r.constant = jget(j, "constant");
  r.stability = jget(j, "stability");
  r.identity_outside_all = j.at("identity_outside_all").get<bool>();
  r.positivity_all = j.at("positivity_all").get<bool>();
  r.complete = j.at("complete").get<bool>();
}

void to_json(Json& j, const VolumeReport& r) {
  j = Json{{"level", r.level},
           {"r", r.r},
           {"measure_unit_ball", r.measure_unit_ball},
           {"ahlfors_ratio", r.ahlfors_ratio},
           {"integral_window", r.integral_window},
           {"quadrature_tol", r.quadrature_tol},
           {"omega_min", r.omega_min},
           {"pointwise_ok", r.pointwise_ok},
           {"upper_ok", r.upper_ok}};
}

void from_json(const Json& j, VolumeReport& r) {
  r.level = j.at("level").get<int>();
  r.r = jget(j, "r");
  r.measure_unit_ball = jget(j, "measure_unit_ball");
  r.ahlfors_ratio = jget(j, "ahlfors_ratio");
  r.integral_window = jget(j, "integral_window");
  r.quadrature_tol = jget(j, "quadrature_tol");
  r.omega_min = jget(j, "omega_min");
  r.pointwise_ok = j.at("pointwise_ok").get<bool>();
  r.upper_ok = j.at("upper_ok").get<bool>();
}

void to_json(Json& j, const CalibrationBounds& b) {
  j = Json{{"alpha", b.alpha},
           {"eps", b.eps},
           {"delta", b.delta},
           {"lower_c", b.lower_c},
           {"upper_c", b.upper_c},
           {"lower_bound", b.lower_bound},
           {"upper_bound", b.upper_bound},
           {"integral_variation", b.integral_variation},
           {"integrals_stable", b.integrals_stable},
           {"all_pointwise", b.all_pointwise},
           {"all_upper", b.all_upper},
           {"levels", b.levels}};
}

void from_json(const Json& j, CalibrationBounds& b) {
  b.alpha = jget(j, "alpha");
  b.eps = jget(j, "eps");
  b.delta = jget(j, "delta");
  b.lower_c = jget(j, "lower_c");
  b.upper_c = jget(j, "upper_c");
  b.lower_bound = jget(j, "lower_bound");
  b.upper_bound = jget(j, "upper_bound");
  b.integral_variation = jget(j, "integral_variation");
  b.integrals_stable = j.at("integrals_stable").get<bool>();
  b.all_pointwise = j.at("all_pointwise").get<bool>();
  b.all_upper = j.at("all_upper").get<bool>();
  b.levels = j.at("levels").get<std::vector<VolumeReport>>();
}

void to_json(Json& j, const CoverageReport& r) {
  Json missing = Json::array();
  for (const Vec& v : r.missing) missing.push_back(vec_to(v));
  j = Json{{"cell", r.cell},
           {"radius", r.radius},
           {"total_cells", r.total_cells},
           {"occupied", r.occupied},
           {"fraction", r.fraction},
           {"missing", std::move(missing)}};
}

void from_json(const Json& j, CoverageReport& r) {
  r.cell = jget(j, "cell");
  r.radius = jget(j, "radius");
  r.total_cells = j.at("total_cells").get<long>();
  r.occupied = j.at("occupied").get<long>();
  r.fraction = jget(j, "fraction");
  r.missing.clear();
  for (const Json& v : j.at("missing")) r.missing.push_back(vec_from(v));
}

void to_json(Json& j, const LocalizedResult& r) {
  j = Json{{"center", vec_to(r.center)},
           {"scale", r.scale},
           {"measure", r.measure},
           {"ahlfors_ratio", r.ahlfors_ratio},
           {"agreement", r.agreement},
           {"accepted", r.accepted},
           {"refusal", r.refusal},
           {"family_complete", r.family_complete},
           {"family_failure", r.family_failure},
           {"bounds", r.bounds}};
}

void from_json(const Json& j, LocalizedResult& r) {
  r.center = vec_from(j.at("center"));
  r.scale = jget(j, "scale");
  r.measure = jget(j, "measure");
  r.ahlfors_ratio = jget(j, "ahlfors_ratio");
  r.agreement = jget(j, "agreement");
  r.accepted = j.at("accepted").get<bool>();
  r.refusal = j.at("refusal").get<std::string>();
  r.family_complete = j.at("family_complete").get<bool>();
  r.family_failure = j.at("family_failure").get<std::string>();
  r.bounds = j.at("bounds").get<CalibrationBounds>();
}

void to_json(Json& j, const VerdictDocument& d) {
  j = Json{{"certificate", d.certificate},
           {"family_built", d.family_built},
           {"build_failure", d.build_failure},
           {"conclusions_checked", d.conclusions_checked},
           {"family", d.family},
           {"bounds", d.bounds},
           {"coverage", d.coverage},
           {"verdict", d.verdict}};
}

void from_json(const Json& j, VerdictDocument& d) {
  d.certificate = j.at("certificate").get<ReifenbergCertificate>();
  d.family_built = j.at("family_built").get<bool>();
  d.build_failure = j.at("build_failure").get<std::string>();
  d.conclusions_checked = j.at("conclusions_checked").get<bool>();
  d.family = j.at("family").get<FamilyReport>();
  d.bounds = j.at("bounds").get<CalibrationBounds>();
  d.coverage = j.at("coverage").get<CoverageReport>();
  d.verdict = j.at("verdict").get<bool>();
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << dump_json(j);
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError("failed to parse '" + path + "': " + e.what());
  }
}

Json generator_metadata_json(const GeneratorSpec& spec,
                             const GeneratedCloud& res) {
  Json j;
  j["spec"] = spec_to_json(spec);
  j["points"] = res.cloud.size();
  j["resolution"] = res.cloud.resolution();
  j["true_measure"] = res.true_measure;
  j["gradient_bound"] = res.gradient_bound;
  j["predicted_min_calibration"] = res.predicted_min_calibration;
  j["has_tangent"] = res.has_tangent;
  j["tangent_at_origin"] = res.tangent_at_origin;
  return j;
}

void write_profile_csv(const std::string& path,
                       const ReifenbergCertificate& cert) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "scale_index,radius,theta_max,beta_max,omega_min\n";
  for (const ScaleSummary& s : cert.per_scale) {
    out << s.scale_index << ',' << g17(s.radius) << ',' << g17(s.theta_max)
        << ',' << g17(s.beta_max) << ',' << g17(s.omega_min) << "\n";
  }
}

void write_profile_svg(const std::string& path,
                       const ReifenbergCertificate& cert) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  const double W = 720, H = 440, L = 70, R = 24, T = 24, B = 56;
  const double pw = W - L - R, ph = H - T - B;
  double xlo = 0.0, xhi = 0.0, ylo = 0.0, yhi = 1.0;
  bool first = true;
  for (const ScaleSummary& s : cert.per_scale) {
    if (s.radius <= 0) continue;
    const double lx = std::log10(s.radius);
    if (first) { xlo = xhi = lx; first = false; }
    xlo = std::min(xlo, lx);
    xhi = std::max(xhi, lx);
    ylo = std::min({ylo, s.omega_min});
    yhi = std::max({yhi, s.theta_max, s.beta_max, s.omega_min});
  }
  if (first) { xlo = -1.0; xhi = 0.0; }
  if (xhi - xlo < 1e-9) { xlo -= 0.5; xhi += 0.5; }
  yhi += 0.05 * (yhi - ylo + 1e-12);
  auto px = [&](double lx) { return L + (lx - xlo) / (xhi - xlo) * pw; };
  auto py = [&](double y) { return T + ph - (y - ylo) / (yhi - ylo) * ph; };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  // y gridlines and ticks
  for (int i = 0; i <= 5; ++i) {
    const double y = ylo + (yhi - ylo) * i / 5.0;
    const double yy = py(y);
    out << "<line x1=\"" << L << "\" y1=\"" << yy << "\" x2=\"" << (W - R)
        << "\" y2=\"" << yy << "\" stroke=\"#dddddd\"/>\n";
    char lab[32];
    std::snprintf(lab, sizeof(lab), "%.3g", y);
    out << "<text x=\"" << (L - 8) << "\" y=\"" << (yy + 4)
        << "\" text-anchor=\"end\">" << lab << "</text>\n";
  }
  // x ticks at each scale
  for (const ScaleSummary& s : cert.per_scale) {
    if (s.radius <= 0) continue;
    const double xx = px(std::log10(s.radius));
    out << "<line x1=\"" << xx << "\" y1=\"" << (T + ph) << "\" x2=\"" << xx
        << "\" y2=\"" << (T + ph + 5) << "\" stroke=\"#333333\"/>\n";
    char lab[32];
    std::snprintf(lab, sizeof(lab), "%.3g", s.radius);
    out << "<text x=\"" << xx << "\" y=\"" << (T + ph + 20)
        << "\" text-anchor=\"middle\">" << lab << "</text>\n";
  }
  out << "<line x1=\"" << L << "\" y1=\"" << (T + ph) << "\" x2=\"" << (W - R)
      << "\" y2=\"" << (T + ph) << "\" stroke=\"#333333\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\""
      << (T + ph) << "\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << (L + pw / 2) << "\" y=\"" << (H - 16)
      << "\" text-anchor=\"middle\">scale r (log axis)</text>\n";
  auto polyline = [&](const char* color, auto getter) {
    std::vector<std::pair<double, double>> pts;
    for (const ScaleSummary& s : cert.per_scale) {
      if (s.radius <= 0) continue;
      pts.emplace_back(px(std::log10(s.radius)), py(getter(s)));
    }
    std::sort(pts.begin(), pts.end());
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) out << p.first << "," << p.second << " ";
    out << "\"/>\n";
    for (const auto& p : pts) {
      out << "<circle cx=\"" << p.first << "\" cy=\"" << p.second
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
  };
  polyline("#d62728", [](const ScaleSummary& s) { return s.theta_max; });
  polyline("#1f77b4", [](const ScaleSummary& s) { return s.beta_max; });
  polyline("#2ca02c", [](const ScaleSummary& s) { return s.omega_min; });
  const double lx = W - R - 150, ly = T + 10;
  const char* names[3] = {"worst theta", "worst beta", "min omega"};
  const char* colors[3] = {"#d62728", "#1f77b4", "#2ca02c"};
  for (int i = 0; i < 3; ++i) {
    out << "<line x1=\"" << lx << "\" y1=\"" << (ly + 18 * i) << "\" x2=\""
        << (lx + 24) << "\" y2=\"" << (ly + 18 * i) << "\" stroke=\""
        << colors[i] << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << (lx + 30) << "\" y=\"" << (ly + 18 * i + 4) << "\">"
        << names[i] << "</text>\n";
  }
  out << "</g>\n</svg>\n";
}

void write_surface_csv(const std::string& path, const ParamSurface& surface) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  const int k = surface.k(), n = surface.n();
  out << "# k = " << k << "\n# n = " << n << "\n# spacing = "
      << g17(surface.spacing()) << "\n";
  for (int a = 1; a <= k; ++a) out << "u" << a << ",";
  for (int a = 1; a <= n; ++a) out << "x" << a << (a < n ? "," : "\n");
  const long count = static_cast<long>(surface.node_count());
  const RowMat& pos = surface.positions();
  for (long i = 0; i < count; ++i) {
    const Vec u = surface.node_coords(i);
    for (int a = 0; a < k; ++a) out << g17(u[a]) << ",";
    for (int a = 0; a < n; ++a) {
      out << g17(pos(i, a)) << (a + 1 < n ? "," : "\n");
    }
  }
}

void write_surface_ply(const std::string& path, const ParamSurface& surface) {
  if (surface.k() != 2) throw InputError("PLY export needs a 2-parameter surface");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  const int n = surface.n();
  const int M = surface.half_width();
  const long side = 2L * M + 1;
  const long verts = side * side;
  const long faces = (side - 1) * (side - 1);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << verts << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  for (int a = 3; a < n; ++a) out << "property double c" << (a + 1) << "\n";
  out << "element face " << faces << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  const RowMat& pos = surface.positions();
  for (long i = 0; i < verts; ++i) {
    for (int a = 0; a < std::max(3, n); ++a) {
      if (a) out << ' ';
      out << g17(a < n ? pos(i, a) : 0.0);
    }
    out << "\n";
  }
  for (int i = -M; i < M; ++i) {
    for (int j = -M; j < M; ++j) {
      int c00[2] = {i, j}, c10[2] = {i + 1, j}, c11[2] = {i + 1, j + 1},
          c01[2] = {i, j + 1};
      out << "4 " << surface.node_index(c00) << ' ' << surface.node_index(c10)
          << ' ' << surface.node_index(c11) << ' ' << surface.node_index(c01)
          << "\n";
    }
  }
}

}  // namespace calreif
