#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "calreif/flatness.hpp"
#include "calreif/generators.hpp"
#include "calreif/io.hpp"
#include "doctest.h"

using namespace calreif;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "calreif_io_suite";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args, const fs::path& out, const fs::path& err) {
  const std::string cmd = std::string(CALREIF_CLI_PATH) + " " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PointCloud tiny_cloud() {
  RowMat m(4, 3);
  m << 0.125, -0.5, 1.0 / 3.0,
       2.0, 0.1, -0.7,
       -1.0, 0.25, 0.0625,
       0.3, 0.0, 9.5367431640625e-07;
  return PointCloud(std::move(m));
}

}  // namespace

TEST_SUITE("io_cli") {

TEST_CASE("cloud csv round trip preserves every bit") {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  RowMat m(50, 4);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 4; ++j) m(i, j) = std::exp(u(rng)) - 1.0;
  }
  PointCloud pc(std::move(m));
  pc.set_domain_radius(1.75);

  const double h = pc.resolution();
  const fs::path path = test_dir() / "roundtrip.csv";
  write_cloud_csv(path.string(), pc, 2, h);
  const CloudFile back = read_cloud_csv(path.string());

  CHECK(back.k == 2);
  CHECK(back.h_recorded == h);
  CHECK(back.cloud.domain_radius() == 1.75);
  REQUIRE(back.cloud.size() == pc.size());
  REQUIRE(back.cloud.dim() == 4);
  for (int i = 0; i < pc.size(); ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(back.cloud.points()(i, j) == pc.points()(i, j));
    }
  }
}

TEST_CASE("cloud csv rejects malformed input") {
  const fs::path ragged = test_dir() / "ragged.csv";
  {
    std::ofstream out(ragged);
    out << "1,2,3\n1,2\n";
  }
  try {
    read_cloud_csv(ragged.string());
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("ragged.csv:2") != std::string::npos);
  }

  const fs::path empty = test_dir() / "empty.csv";
  {
    std::ofstream out(empty);
    out << "# k = 2\n";
  }
  CHECK_THROWS_AS(read_cloud_csv(empty.string()), InputError);

  const fs::path junk = test_dir() / "junk.csv";
  {
    std::ofstream out(junk);
    out << "1,2\nfoo,bar\n";
  }
  CHECK_THROWS_AS(read_cloud_csv(junk.string()), InputError);

  CHECK_THROWS_AS(read_cloud_csv((test_dir() / "missing.csv").string()),
                  InputError);
}

TEST_CASE("form json round trip and validation") {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  ConstantKForm f(6, 3);
  for (const MultiIndex& idx : f.support_basis()) {
    if (rng() % 3 == 0) f.set_coeff(idx, u(rng));
  }

  const Json j = form_to_json(f);
  const ConstantKForm back = form_from_json(j);
  CHECK(back.ambient_dim() == 6);
  CHECK(back.degree() == 3);
  for (const MultiIndex& idx : f.support_basis()) {
    CHECK(back.coeff(idx) == f.coeff(idx));
  }
  // zero coefficients are dropped from the serialization
  int stored = 0;
  for (const MultiIndex& idx : f.support_basis()) {
    if (f.coeff(idx) != 0.0) ++stored;
  }
  CHECK(static_cast<int>(j.at("terms").size()) == stored);

  Json bad = j;
  bad["surprise"] = 1;
  CHECK_THROWS_AS(form_from_json(bad), InputError);

  Json range = j;
  range["terms"][0]["indices"][0] = 9;  // exceeds n = 6
  CHECK_THROWS_AS(form_from_json(range), InputError);

  const fs::path path = test_dir() / "form.json";
  write_form_json(path.string(), f);
  const ConstantKForm disk = read_form_json(path.string());
  CHECK(disk.coefficients() == f.coefficients());
}

TEST_CASE("named form factory") {
  const ConstantKForm axis = make_named_form("axis", 5, 2, {2, 4});
  CHECK(axis.coeff(MultiIndex({2, 4})) == 1.0);

  const ConstantKForm kp = make_named_form("kahler_power", 6, 4);
  CHECK(kp.coeff(MultiIndex({1, 2, 3, 4})) == 1.0);

  const ConstantKForm slag = make_named_form("special_lagrangian", 4, 2, {}, 0.0);
  CHECK(slag.coeff(MultiIndex({1, 3})) == 1.0);

  CHECK(make_named_form("g2_coassociative", 7, 4).coefficient_norm() ==
        doctest::Approx(std::sqrt(7.0)));

  CHECK_THROWS_AS(make_named_form("axis", 5, 2, {2, 4, 5}), InputError);
  CHECK_THROWS_AS(make_named_form("kahler", 5, 2), InputError);   // odd n
  CHECK_THROWS_AS(make_named_form("spin7", 7, 4), InputError);
  CHECK_THROWS_AS(make_named_form("no_such_form", 4, 2), InputError);
}

TEST_CASE("certificate json survives a round trip") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Plane;
  spec.n = 3;
  spec.k = 2;
  spec.h = 0.05;
  const GeneratedCloud gen = generate(spec);
  const CalibrationField field(base_volume_form(3, 2), 0.01);

  CertifyOptions copts;
  copts.finest_exp = 2;
  const ReifenbergCertificate cert = certify(gen.cloud, field, 2, copts);

  const Json j = cert;
  const std::string once = dump_json(j);
  const ReifenbergCertificate back = j.get<ReifenbergCertificate>();
  const std::string twice = dump_json(Json(back));
  CHECK(once == twice);

  CHECK(back.verdict == cert.verdict);
  CHECK(back.delta_star == cert.delta_star);
  REQUIRE(back.records.size() == cert.records.size());
  for (std::size_t i = 0; i < cert.records.size(); ++i) {
    CHECK(back.records[i].theta == cert.records[i].theta);
    CHECK(back.records[i].beta == cert.records[i].beta);
    CHECK((back.records[i].center - cert.records[i].center).norm() == 0.0);
  }

  // the failing array is derived on write and ignored on read
  CHECK(j.contains("failing"));
  Json stripped = j;
  stripped.erase("failing");
  const ReifenbergCertificate lean = stripped.get<ReifenbergCertificate>();
  CHECK(lean.delta_star == cert.delta_star);

  const fs::path path = test_dir() / "cert.json";
  write_json_file(path.string(), j);
  const Json disk = read_json_file(path.string());
  CHECK(dump_json(disk) == once);
}

TEST_CASE("profile exports") {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Plane;
  spec.n = 3;
  spec.k = 2;
  spec.h = 0.05;
  const GeneratedCloud gen = generate(spec);
  const CalibrationField field(base_volume_form(3, 2), 0.01);
  CertifyOptions copts;
  copts.finest_exp = 2;
  const ReifenbergCertificate cert = certify(gen.cloud, field, 2, copts);

  const fs::path csv = test_dir() / "profile.csv";
  write_profile_csv(csv.string(), cert);
  std::ifstream in(csv);
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("scale_index", 0) == 0) {
      header = true;
      continue;
    }
    if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(header);
  CHECK(rows == static_cast<int>(cert.per_scale.size()));

  const fs::path svg = test_dir() / "profile.svg";
  write_profile_svg(svg.string(), cert);
  const std::string body = slurp(svg);
  CHECK(body.find("<svg") != std::string::npos);
  CHECK(body.find("polyline") != std::string::npos);
  CHECK(body.find("</svg>") != std::string::npos);
}

TEST_CASE("surface exports") {
  Mat fr(3, 2);
  fr << 1, 0, 0, 1, 0, 0;
  const ParamSurface surf(OrientedPlane(Vec::Zero(3), fr), 0.5, 2.0, 1.5);

  const fs::path csv = test_dir() / "surface.csv";
  write_surface_csv(csv.string(), surf);
  const std::string text = slurp(csv);
  CHECK(text.find("# k = 2") != std::string::npos);
  CHECK(text.find("u1,u2,x1,x2,x3") != std::string::npos);

  const fs::path ply = test_dir() / "surface.ply";
  write_surface_ply(ply.string(), surf);
  const std::string head = slurp(ply);
  CHECK(head.rfind("ply", 0) == 0);
  CHECK(head.find("element vertex " + std::to_string(surf.node_count())) !=
        std::string::npos);
  CHECK(head.find("element face") != std::string::npos);
}

TEST_CASE("cli pipeline on a flat cloud") {
  const fs::path dir = test_dir();
  const fs::path cloud = dir / "cli_plane.csv";
  const fs::path out = dir / "cli_out.txt";
  const fs::path err = dir / "cli_err.txt";

  int code = run_cli("generate --kind plane --n 3 --k 2 --h 0.04 --out " +
                         cloud.string(),
                     out, err);
  CHECK(code == 0);
  REQUIRE(fs::exists(cloud));
  CHECK(fs::exists(fs::path(cloud.string() + ".meta.json")));

  const fs::path verdict = dir / "cli_cert.json";
  code = run_cli("analyze --input " + cloud.string() +
                     " --form axis --monomial 1,2 --finest 2 --out " +
                     verdict.string(),
                 out, err);
  CHECK(code == 0);
  const Json cert = read_json_file(verdict.string());
  CHECK(cert.at("verdict").get<bool>());
  CHECK(cert.at("delta_star").get<double>() <= 0.02);

  // flags override the config file; the echoed thresholds prove it
  const fs::path config = dir / "cli_config.json";
  {
    std::ofstream cfg(config);
    cfg << "{\"input\": \"" << cloud.string()
        << "\", \"form\": \"axis\", \"monomial\": [1,2], "
           "\"finest\": 2, \"alpha\": 0.95}\n";
  }
  code = run_cli("analyze --config " + config.string(), out, err);
  CHECK(code == 0);
  CHECK(read_json_file(out.string()).at("alpha").get<double>() == 0.95);
  code = run_cli("analyze --config " + config.string() + " --alpha 0.6", out, err);
  CHECK(code == 0);
  CHECK(read_json_file(out.string()).at("alpha").get<double>() == 0.6);

  // unknown config keys are rejected up front
  const fs::path bad = dir / "cli_bad.json";
  {
    std::ofstream cfg(bad);
    cfg << "{\"input\": \"" << cloud.string() << "\", \"sigma\": 3}\n";
  }
  code = run_cli("analyze --config " + bad.string(), out, err);
  CHECK(code == 1);
  CHECK(slurp(err).find("\"error\":\"input\"") != std::string::npos);
}

TEST_CASE("cli diagnostics carry machine-readable kinds") {
  const fs::path dir = test_dir();
  const fs::path cloud = dir / "cli_plane.csv";  // written by the previous case
  const fs::path out = dir / "cli_out.txt";
  const fs::path err = dir / "cli_err.txt";
  REQUIRE(fs::exists(cloud));

  // finest scale below 4h
  int code = run_cli("analyze --input " + cloud.string() +
                         " --form axis --monomial 1,2 --finest 8",
                     out, err);
  CHECK(code == 1);
  CHECK(slurp(err).find("\"error\":\"resolution\"") != std::string::npos);

  // missing input file
  code = run_cli("analyze --input " + (dir / "nope.csv").string() +
                     " --form axis --monomial 1,2",
                 out, err);
  CHECK(code == 1);
  CHECK(slurp(err).find("\"error\":\"input\"") != std::string::npos);

  // bad flag
  code = run_cli("analyze --frobnicate", out, err);
  CHECK(code == 1);
  CHECK(slurp(err).find("\"error\":\"usage\"") != std::string::npos);
}

TEST_CASE("cli zigzag certify fails with located scales") {
  const fs::path dir = test_dir();
  const fs::path cloud = dir / "cli_koch.csv";
  const fs::path out = dir / "cli_out.txt";
  const fs::path err = dir / "cli_err.txt";

  int code = run_cli(
      "generate --kind koch --n 2 --k 1 --eta 0.5 --depth 4 --h 0.01 --out " +
          cloud.string(),
      out, err);
  REQUIRE(code == 0);

  const fs::path verdict = dir / "cli_koch_cert.json";
  code = run_cli("analyze --input " + cloud.string() +
                     " --form axis --monomial 1 --alpha 0.95 --finest 3 --out " +
                     verdict.string(),
                 out, err);
  CHECK(code == 2);
  const Json cert = read_json_file(verdict.string());
  CHECK(!cert.at("verdict").get<bool>());
  REQUIRE(cert.contains("failing"));
  CHECK(!cert.at("failing").empty());
  const Json& first = cert.at("failing").at(0);
  CHECK(first.contains("center"));
  CHECK(first.contains("radius"));
  CHECK(first.at("theta").get<double>() >= 0.0);
}

TEST_CASE("cli comass") {
  const fs::path dir = test_dir();
  const fs::path out = dir / "comass_out.json";
  const fs::path err = dir / "comass_err.txt";
  const int code = run_cli(
      "comass --form axis --monomial 1,2 --n 4 --k 2 --samples 500 "
      "--ascent-starts 2",
      out, err);
  CHECK(code == 0);
  const Json j = read_json_file(out.string());
  CHECK(j.at("comass").get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(j.at("n").get<int>() == 4);
}

TEST_CASE("cli certify determinism") {
  const fs::path dir = test_dir();
  const fs::path cloud = dir / "cli_small.csv";
  const fs::path out = dir / "cli_out.txt";
  const fs::path err = dir / "cli_err.txt";

  int code = run_cli(
      "generate --kind perturbed --base-kind plane --n 3 --k 2 --h 0.04 "
      "--delta 0.004 --out " +
          cloud.string(),
      out, err);
  REQUIRE(code == 0);

  const fs::path v1 = dir / "verdict_a.json";
  const fs::path v2 = dir / "verdict_b.json";
  const std::string args = "certify --input " + cloud.string() +
                           " --form axis --monomial 1,2 --finest 2 "
                           "--levels 2 --out ";
  code = run_cli(args + v1.string(), out, err);
  CHECK(code == 0);
  code = run_cli(args + v2.string(), out, err);
  CHECK(code == 0);
  const std::string a = slurp(v1);
  const std::string b = slurp(v2);
  REQUIRE(!a.empty());
  CHECK(a == b);

  const Json doc = read_json_file(v1.string());
  CHECK(doc.at("verdict").get<bool>());
  CHECK(doc.at("conclusions_checked").get<bool>());
  CHECK(doc.at("certificate").at("verdict").get<bool>());
  CHECK(doc.at("coverage").at("fraction").get<double>() == 1.0);
}

}  // TEST_SUITE
