#include <algorithm>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <limits>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "calreif/builder.hpp"
#include "calreif/errors.hpp"
#include "calreif/flatness.hpp"
#include "calreif/forms.hpp"
#include "calreif/generators.hpp"
#include "calreif/io.hpp"
#include "calreif/measure.hpp"
#include "calreif/parallel.hpp"
#include "calreif/point_cloud.hpp"

namespace {

using namespace calreif;

void emit_diag(const char* kind, const std::string& message) {
  Json d{{"error", kind}, {"message", message}};
  std::cerr << d.dump() << "\n";
}

std::string num_to_string(const Json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  throw InputError("config values must be scalars or arrays of scalars");
}

// Merges --config <file.json> into the raw token list before parsing: each
// key becomes --key=value on the active subcommand unless that flag was
// already given on the command line. Unknown keys are rejected.
std::vector<std::string> merge_config(const CLI::App& app,
                                      std::vector<std::string> tokens) {
  std::string config_path;
  std::vector<std::string> kept;
  std::size_t sub_pos = std::string::npos;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t == "--config") {
      if (i + 1 >= tokens.size()) throw InputError("--config needs a file path");
      config_path = tokens[++i];
      continue;
    }
    if (t.rfind("--config=", 0) == 0) {
      config_path = t.substr(9);
      continue;
    }
    if (sub_pos == std::string::npos && !t.empty() && t[0] != '-') {
      sub_pos = kept.size();
    }
    kept.push_back(t);
  }
  if (config_path.empty()) return kept;
  if (sub_pos == std::string::npos) {
    throw InputError("--config needs a subcommand to apply to");
  }
  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands(nullptr)) {
    if (s->get_name() == kept[sub_pos]) sub = s;
  }
  if (!sub) throw InputError("unknown subcommand '" + kept[sub_pos] + "'");
  const Json conf = read_json_file(config_path);
  if (!conf.is_object()) throw InputError("config file must be a JSON object");
  std::vector<std::string> extra;
  for (const auto& item : conf.items()) {
    const std::string& key = item.key();
    if (key == "config") throw InputError("config files cannot nest --config");
    const std::string flag = "--" + key;
    if (!sub->get_option_no_throw(flag)) {
      throw InputError("unknown config key '" + key + "' for subcommand '" +
                       sub->get_name() + "'");
    }
    bool on_cmdline = false;
    for (std::size_t i = sub_pos + 1; i < kept.size(); ++i) {
      if (kept[i] == flag || kept[i].rfind(flag + "=", 0) == 0) on_cmdline = true;
    }
    if (on_cmdline) continue;  // command-line flags win over the file
    std::string value;
    if (item.value().is_array()) {
      for (std::size_t i = 0; i < item.value().size(); ++i) {
        if (i) value += ',';
        value += num_to_string(item.value().at(i));
      }
    } else {
      value = num_to_string(item.value());
    }
    extra.push_back(flag + "=" + value);
  }
  kept.insert(kept.begin() + static_cast<long>(sub_pos) + 1, extra.begin(),
              extra.end());
  return kept;
}

struct FieldArgs {
  std::string name = "axis";
  std::string file;
  std::vector<int> monomial;
  double phase = 0.0;
  double eps = 0.01;
};

void add_field_flags(CLI::App* cmd, FieldArgs& a) {
  cmd->add_option("--form", a.name,
                  "named form: axis, kahler, g2_associative, g2_coassociative, "
                  "spin7, special_lagrangian");
  cmd->add_option("--form-file", a.file, "JSON form file, overrides --form");
  cmd->add_option("--monomial", a.monomial, "1-based axis indices for --form axis")
      ->delimiter(',');
  cmd->add_option("--phase", a.phase, "phase for special_lagrangian");
  cmd->add_option("--eps-field", a.eps, "calibration field tolerance epsilon");
}

CalibrationField resolve_field(const FieldArgs& a, int n, int k) {
  ConstantKForm form = a.file.empty()
                           ? make_named_form(a.name, n, k, a.monomial, a.phase)
                           : read_form_json(a.file);
  if (form.ambient_dim() != n || form.degree() != k) {
    throw InputError("form is a " + std::to_string(form.degree()) + "-form on R^" +
                     std::to_string(form.ambient_dim()) + " but the cloud needs k=" +
                     std::to_string(k) + ", n=" + std::to_string(n));
  }
  return CalibrationField(form, a.eps);
}

struct LoadedCloud {
  PointCloud cloud;
  int k = 0;
};

LoadedCloud load_cloud(const std::string& path, int k_flag) {
  CloudFile cf = read_cloud_csv(path);
  int k = k_flag > 0 ? k_flag : cf.k;
  if (k < 1) {
    throw InputError("k is neither given (--k) nor recorded in '" + path + "'");
  }
  if (!cf.cloud.has_domain_radius()) {
    double r = 0.0;
    const RowMat& pts = cf.cloud.points();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      r = std::max(r, pts.row(i).norm());
    }
    cf.cloud.set_domain_radius(r);
  }
  LoadedCloud out{std::move(cf.cloud), k};
  return out;
}

GeneratorSpec::Kind parse_kind(const std::string& s) {
  if (s == "plane") return GeneratorSpec::Kind::Plane;
  if (s == "graph") return GeneratorSpec::Kind::Graph;
  if (s == "complex-curve" || s == "complex_curve") {
    return GeneratorSpec::Kind::ComplexCurve;
  }
  if (s == "calibrated-plane" || s == "calibrated_plane") {
    return GeneratorSpec::Kind::CalibratedPlane;
  }
  if (s == "koch") return GeneratorSpec::Kind::Koch;
  if (s == "perturbed") return GeneratorSpec::Kind::Perturbed;
  throw InputError("unknown generator kind '" + s + "'");
}

struct GenArgs {
  std::string kind = "plane";
  int n = 4, k = 2;
  double h = 0.01, domain_radius = 1.0;
  std::uint64_t seed = 1;
  std::vector<double> gradient;
  double noise_amplitude = 0.0, noise_frequency = 2.0;
  int noise_modes = 3;
  double curve_coeff = 0.1;
  std::string form = "axis";
  std::vector<int> monomial;
  std::vector<double> eta;
  int depth = 0;
  std::string base_kind = "plane";
  double delta = 0.0;
  std::string out = "cloud.csv";
};

void fill_spec(const GenArgs& a, const std::string& kind, GeneratorSpec* spec) {
  spec->kind = parse_kind(kind);
  spec->n = a.n;
  spec->k = a.k;
  spec->h = a.h;
  spec->domain_radius = a.domain_radius;
  spec->seed = a.seed;
  if (!a.gradient.empty()) {
    const int rows = a.n - a.k;
    if (static_cast<int>(a.gradient.size()) != rows * a.k) {
      throw InputError("--gradient needs (n-k)*k row-major entries");
    }
    spec->gradient = Mat(rows, a.k);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < a.k; ++j) {
        spec->gradient(i, j) = a.gradient[static_cast<std::size_t>(i * a.k + j)];
      }
    }
  }
  spec->noise_amplitude = a.noise_amplitude;
  spec->noise_frequency = a.noise_frequency;
  spec->noise_modes = a.noise_modes;
  spec->curve_coeff = a.curve_coeff;
  spec->form_name = a.form;
  spec->monomial = a.monomial;
  if (!a.eta.empty()) spec->eta = a.eta;
  spec->depth = a.depth;
}

int run_generate(const GenArgs& a) {
  GeneratorSpec spec;
  fill_spec(a, a.kind, &spec);
  if (spec.kind == GeneratorSpec::Kind::Perturbed) {
    auto base = std::make_shared<GeneratorSpec>();
    fill_spec(a, a.base_kind, base.get());
    spec.base = std::move(base);
    spec.delta = a.delta;
  }
  GeneratedCloud res = generate(spec);
  write_cloud_csv(a.out, res.cloud, spec.k, res.cloud.resolution());
  write_json_file(a.out + ".meta.json", generator_metadata_json(spec, res));
  std::cout << "wrote " << res.cloud.size() << " points to " << a.out
            << " (resolution " << res.cloud.resolution() << ")\n";
  return 0;
}

struct AnalyzeArgs {
  std::string input;
  int k = 0;
  FieldArgs field;
  double delta = 0.02, alpha = 0.5, net_slack = 0.5;
  int coarsest = 0, finest = 6;
  std::string out, csv, svg;
  int workers = 0;
};

void add_analyze_flags(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--input", a.input, "point cloud CSV")->required();
  cmd->add_option("--k", a.k, "surface dimension, default from the file");
  add_field_flags(cmd, a.field);
  cmd->add_option("--delta", a.delta, "flatness threshold");
  cmd->add_option("--alpha", a.alpha, "positivity threshold");
  cmd->add_option("--net-slack", a.net_slack, "center net spacing / scale");
  cmd->add_option("--coarsest", a.coarsest, "coarsest dyadic exponent");
  cmd->add_option("--finest", a.finest, "finest dyadic exponent");
  cmd->add_option("--out", a.out, "certificate JSON path");
  cmd->add_option("--csv", a.csv, "per-scale profile CSV path");
  cmd->add_option("--svg", a.svg, "per-scale profile SVG path");
  cmd->add_option("--workers", a.workers, "worker threads, 0 = hardware");
}

ReifenbergCertificate run_certificate(const AnalyzeArgs& a,
                                      const LoadedCloud& lc,
                                      const CalibrationField& field) {
  CertifyOptions opts;
  opts.coarsest_exp = a.coarsest;
  opts.finest_exp = a.finest;
  opts.delta = a.delta;
  opts.alpha = a.alpha;
  opts.net_slack = a.net_slack;
  return certify(lc.cloud, field, lc.k, opts);
}

void write_certificate_outputs(const AnalyzeArgs& a,
                               const ReifenbergCertificate& cert) {
  if (!a.out.empty()) write_json_file(a.out, Json(cert));
  if (!a.csv.empty()) write_profile_csv(a.csv, cert);
  if (!a.svg.empty()) write_profile_svg(a.svg, cert);
}

int run_analyze(const AnalyzeArgs& a) {
  if (a.workers > 0) set_worker_count(a.workers);
  LoadedCloud lc = load_cloud(a.input, a.k);
  CalibrationField field = resolve_field(a.field, lc.cloud.dim(), lc.k);
  ReifenbergCertificate cert = run_certificate(a, lc, field);
  write_certificate_outputs(a, cert);
  if (a.out.empty() && a.csv.empty() && a.svg.empty()) {
    std::cout << dump_json(Json(cert));
  } else {
    std::cout << "certificate " << (cert.verdict ? "holds" : "fails")
              << ": delta_star=" << cert.delta_star
              << " alpha_star=" << cert.alpha_star << "\n";
  }
  return cert.verdict ? 0 : 2;
}

struct BuildArgs {
  std::string input;
  int k = 0;
  FieldArgs field;
  double build_eps = 1.0;
  int levels = 6;
  double grid_divisor = 8.0;
  long node_budget = 3000000;
  double grassmann_guard = 0.5, blend_factor = 2.0;
  double delta = 0.02;
  std::string out_prefix = "surface";
  int workers = 0;
};

void add_build_flags(CLI::App* cmd, BuildArgs& a, bool with_io) {
  cmd->add_option("--build-eps", a.build_eps, "coarsest construction scale");
  cmd->add_option("--levels", a.levels, "refinement levels below the coarsest");
  cmd->add_option("--grid-divisor", a.grid_divisor, "lattice spacing = r / divisor");
  cmd->add_option("--node-budget", a.node_budget, "per-level stored node cap");
  cmd->add_option("--grassmann-guard", a.grassmann_guard,
                  "max cover-plane tilt before aborting");
  cmd->add_option("--blend-factor", a.blend_factor, "bump support / ball radius");
  if (with_io) {
    cmd->add_option("--input", a.input, "point cloud CSV")->required();
    cmd->add_option("--k", a.k, "surface dimension, default from the file");
    add_field_flags(cmd, a.field);
    cmd->add_option("--delta", a.delta, "ratio normalization for the checks");
    cmd->add_option("--out-prefix", a.out_prefix, "output path prefix");
    cmd->add_option("--workers", a.workers, "worker threads, 0 = hardware");
  }
}

BuildOptions build_options(const BuildArgs& a) {
  BuildOptions opts;
  opts.epsilon = a.build_eps;
  opts.levels = a.levels;
  opts.grid_divisor = a.grid_divisor;
  opts.node_budget = a.node_budget;
  opts.glue.grassmann_guard = a.grassmann_guard;
  opts.glue.blend_factor = a.blend_factor;
  return opts;
}

int run_build(const BuildArgs& a) {
  if (a.workers > 0) set_worker_count(a.workers);
  LoadedCloud lc = load_cloud(a.input, a.k);
  CalibrationField field = resolve_field(a.field, lc.cloud.dim(), lc.k);
  SurfaceFamily family = build_family(lc.cloud, field, build_options(a));
  for (std::size_t i = 0; i < family.levels.size(); ++i) {
    const std::string stem = a.out_prefix + "_level" + std::to_string(i);
    write_surface_csv(stem + ".csv", family.levels[i]);
    if (lc.k == 2) write_surface_ply(stem + ".ply", family.levels[i]);
  }
  FamilyReport report;
  if (family.complete) {
    report = check_properties(family, lc.cloud, field, a.delta);
  }
  write_json_file(a.out_prefix + "_report.json", Json(report));
  if (family.complete) {
    std::cout << "built " << family.levels.size() << " levels down to scale "
              << family.level_scales.back() << "\n";
  } else {
    std::cout << "construction stopped at level " << family.failed_level << ": "
              << family.failure << "\n";
  }
  return family.complete ? 0 : 2;
}

struct CertArgs {
  AnalyzeArgs analyze;
  BuildArgs build;
  double lower_c = 10.0, upper_c = 10.0;
  double pointwise_tol = 0.01, variation_tol = 0.02;
  double coverage_c = 10.0;
};

int run_certify(const CertArgs& a) {
  if (a.analyze.workers > 0) set_worker_count(a.analyze.workers);
  LoadedCloud lc = load_cloud(a.analyze.input, a.analyze.k);
  CalibrationField field = resolve_field(a.analyze.field, lc.cloud.dim(), lc.k);

  VerdictDocument doc;
  doc.certificate = run_certificate(a.analyze, lc, field);
  doc.verdict = doc.certificate.verdict;
  write_certificate_outputs(a.analyze, doc.certificate);

  // Conclusions are verified against the hypothesis thresholds; failures
  // here are reported in the document, never turned into an exit code.
  const double delta_used = doc.certificate.delta;
  try {
    SurfaceFamily family = build_family(lc.cloud, field, build_options(a.build));
    doc.family_built = family.complete;
    if (!family.complete) {
      doc.build_failure = "level " + std::to_string(family.failed_level) + ": " +
                          family.failure;
    } else {
      CheckOptions chk;
      for (double r : family.level_scales) {
        // certified flatness at the nearest profiled scale
        double best = std::numeric_limits<double>::infinity();
        double theta = delta_used;
        for (const ScaleSummary& s : doc.certificate.per_scale) {
          const double gap = std::abs(std::log(s.radius / r));
          if (gap < best) {
            best = gap;
            theta = s.theta_max;
          }
        }
        chk.level_deltas.push_back(theta);
      }
      doc.family = check_properties(family, lc.cloud, field, delta_used, chk);
      BoundsOptions bopts;
      bopts.lower_c = a.lower_c;
      bopts.upper_c = a.upper_c;
      bopts.pointwise_tol = a.pointwise_tol;
      bopts.variation_tol = a.variation_tol;
      doc.bounds = calibration_bounds_check(family, field, a.analyze.alpha,
                                            delta_used, bopts);
      doc.coverage = projection_covering_check(family.levels.back(), family.base,
                                               delta_used, a.coverage_c);
      doc.conclusions_checked = true;
    }
  } catch (const std::exception& e) {
    doc.build_failure = e.what();
  }

  if (!a.analyze.out.empty()) {
    write_json_file(a.analyze.out, Json(doc));
    std::cout << "verdict " << (doc.verdict ? "holds" : "fails") << ": delta_star="
              << doc.certificate.delta_star << " alpha_star="
              << doc.certificate.alpha_star << " -> " << a.analyze.out << "\n";
  } else {
    std::cout << dump_json(Json(doc));
  }
  return doc.verdict ? 0 : 2;
}

struct ComassArgs {
  FieldArgs field;
  int n = 4, k = 2;
  int samples = 10000, ascent_iters = 200, ascent_starts = 8;
  std::uint64_t seed = 1;
  std::string out;
};

int run_comass(const ComassArgs& a) {
  ConstantKForm form =
      a.field.file.empty()
          ? make_named_form(a.field.name, a.n, a.k, a.field.monomial, a.field.phase)
          : read_form_json(a.field.file);
  ComassOptions opts;
  opts.samples = a.samples;
  opts.ascent_iters = a.ascent_iters;
  opts.ascent_starts = a.ascent_starts;
  opts.seed = a.seed;
  ComassEstimate est = comass(form, opts);
  Json frame = Json::array();
  for (Eigen::Index i = 0; i < est.argmax_frame.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < est.argmax_frame.cols(); ++j) {
      row.push_back(est.argmax_frame(i, j));
    }
    frame.push_back(std::move(row));
  }
  Json j{{"comass", est.value},
         {"coefficient_norm", form.coefficient_norm()},
         {"argmax_frame", std::move(frame)},
         {"n", form.ambient_dim()},
         {"k", form.degree()}};
  if (!a.out.empty()) {
    write_json_file(a.out, j);
  } else {
    std::cout << dump_json(j);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiscale flatness certification and calibrated surface construction"};
  app.require_subcommand(0, 1);
  app.set_help_flag("--help", "print help and exit");

  GenArgs gen;
  CLI::App* cg = app.add_subcommand("generate", "sample a reference surface");
  cg->set_help_flag("--help", "print help and exit");
  cg->add_option("--kind", gen.kind,
                 "plane, graph, complex-curve, calibrated-plane, koch, perturbed")
      ->required();
  cg->add_option("--n", gen.n, "ambient dimension");
  cg->add_option("--k", gen.k, "surface dimension");
  cg->add_option("--h", gen.h, "target sample resolution");
  cg->add_option("--domain-radius", gen.domain_radius, "sampled patch radius");
  cg->add_option("--seed", gen.seed, "random seed");
  cg->add_option("--gradient", gen.gradient,
                 "row-major (n-k)*k linear part, use --gradient=v,v,... for "
                 "negative leading entries")
      ->delimiter(',');
  cg->add_option("--noise-amplitude", gen.noise_amplitude, "smooth field sup norm");
  cg->add_option("--noise-frequency", gen.noise_frequency, "smooth field frequency");
  cg->add_option("--noise-modes", gen.noise_modes, "smooth field mode count");
  cg->add_option("--curve-coeff", gen.curve_coeff, "complex curve coefficient");
  cg->add_option("--form", gen.form, "form name recorded for calibrated planes");
  cg->add_option("--monomial", gen.monomial, "1-based axis indices")->delimiter(',');
  cg->add_option("--eta", gen.eta, "apex ratio, one value or one per generation")
      ->delimiter(',');
  cg->add_option("--depth", gen.depth, "koch generations");
  cg->add_option("--base-kind", gen.base_kind, "base surface for --kind perturbed");
  cg->add_option("--delta", gen.delta, "normal noise bound for --kind perturbed");
  cg->add_option("--out", gen.out, "output CSV path");

  AnalyzeArgs ana;
  CLI::App* ca = app.add_subcommand("analyze", "certify the multiscale hypotheses");
  ca->set_help_flag("--help", "print help and exit");
  add_analyze_flags(ca, ana);

  BuildArgs bld;
  CLI::App* cb = app.add_subcommand("build", "construct the surface family");
  cb->set_help_flag("--help", "print help and exit");
  add_build_flags(cb, bld, true);

  CertArgs crt;
  CLI::App* cc = app.add_subcommand(
      "certify", "hypothesis certificate plus conclusion verification");
  cc->set_help_flag("--help", "print help and exit");
  add_analyze_flags(cc, crt.analyze);
  add_build_flags(cc, crt.build, false);
  cc->add_option("--lower-c", crt.lower_c, "measure lower bound constant");
  cc->add_option("--upper-c", crt.upper_c, "measure upper bound constant");
  cc->add_option("--pointwise-tol", crt.pointwise_tol, "calibration floor slack");
  cc->add_option("--variation-tol", crt.variation_tol, "integral agreement bound");
  cc->add_option("--coverage-c", crt.coverage_c, "projection disk shrink constant");

  ComassArgs com;
  CLI::App* cm = app.add_subcommand("comass", "estimate a form's comass");
  cm->set_help_flag("--help", "print help and exit");
  add_field_flags(cm, com.field);
  cm->add_option("--n", com.n, "ambient dimension");
  cm->add_option("--k", com.k, "form degree");
  cm->add_option("--samples", com.samples, "random frames");
  cm->add_option("--ascent-iters", com.ascent_iters, "ascent steps per start");
  cm->add_option("--ascent-starts", com.ascent_starts, "ascent restarts");
  cm->add_option("--seed", com.seed, "random seed");
  cm->add_option("--out", com.out, "report JSON path");

  try {
    std::vector<std::string> tokens;
    for (int i = 1; i < argc; ++i) tokens.emplace_back(argv[i]);
    tokens = merge_config(app, std::move(tokens));
    std::reverse(tokens.begin(), tokens.end());
    app.parse(std::move(tokens));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_diag("usage", e.what());
    return 1;
  } catch (const InputError& e) {
    emit_diag("input", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_diag("internal", e.what());
    return 1;
  }

  try {
    if (cg->parsed()) return run_generate(gen);
    if (ca->parsed()) return run_analyze(ana);
    if (cb->parsed()) return run_build(bld);
    if (cc->parsed()) return run_certify(crt);
    if (cm->parsed()) return run_comass(com);
    std::cout << app.help();
    return 1;
  } catch (const ResolutionError& e) {
    emit_diag("resolution", e.what());
    return 1;
  } catch (const InputError& e) {
    emit_diag("input", e.what());
    return 1;
  } catch (const GlueError& e) {
    emit_diag("glue", e.what());
    return 1;
  } catch (const ContractViolation& e) {
    emit_diag("contract", e.what());
    return 1;
  } catch (const Json::exception& e) {
    emit_diag("json", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_diag("internal", e.what());
    return 1;
  }
}
