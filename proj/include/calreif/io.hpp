#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "calreif/builder.hpp"
#include "calreif/flatness.hpp"
#include "calreif/forms.hpp"
#include "calreif/generators.hpp"
#include "calreif/measure.hpp"
#include "calreif/point_cloud.hpp"

namespace calreif {

using Json = nlohmann::json;

// Point-cloud CSV: one point per row, comma-separated floats, '#' comments.
// The comments "# k = ...", "# h = ...", "# domain_radius = ..." are
// recognized metadata and round-trip.
struct CloudFile {
  explicit CloudFile(PointCloud c) : cloud(std::move(c)) {}
  PointCloud cloud;
  int k = 0;              // 0 when the file carries no k
  double h_recorded = 0.0;
};

CloudFile read_cloud_csv(const std::string& path);
void write_cloud_csv(const std::string& path, const PointCloud& cloud,
                     int k = 0, double h = 0.0);

// Form files: {"n":..., "k":..., "terms":[{"indices":[...], "coeff":...}]}
// with 1-based indices, emitted strictly increasing. Unsorted index lists
// are accepted on input with the permutation sign folded in; unknown keys
// are rejected.
Json form_to_json(const ConstantKForm& form);
ConstantKForm form_from_json(const Json& j);
ConstantKForm read_form_json(const std::string& path);
void write_form_json(const std::string& path, const ConstantKForm& form);

// named constructions for the CLI and tests; monomial is 1-based
ConstantKForm make_named_form(const std::string& name, int n, int k,
                              const std::vector<int>& monomial = {},
                              double phase = 0.0);

// The composed output of a full certification run. The hypothesis side
// (the certificate) alone decides the verdict and the exit code; the
// conclusion side is reported descriptively and may be absent when the
// family could not be built.
struct VerdictDocument {
  ReifenbergCertificate certificate;
  bool family_built = false;
  std::string build_failure;
  bool conclusions_checked = false;
  FamilyReport family;
  CalibrationBounds bounds;
  CoverageReport coverage;
  bool verdict = false;
};

// ADL codecs so nlohmann converts these types directly. Serialization is
// key-sorted and timestamp-free: identical runs emit identical bytes, and
// non-finite values map to JSON null.
void to_json(Json& j, const OrientedPlane& p);
void from_json(const Json& j, OrientedPlane& p);
void to_json(Json& j, const FlatnessRecord& r);
void from_json(const Json& j, FlatnessRecord& r);
void to_json(Json& j, const ScaleSummary& s);
void from_json(const Json& j, ScaleSummary& s);
void to_json(Json& j, const ReifenbergCertificate& c);
void from_json(const Json& j, ReifenbergCertificate& c);
void to_json(Json& j, const LevelCheck& c);
void from_json(const Json& j, LevelCheck& c);
void to_json(Json& j, const FamilyReport& r);
void from_json(const Json& j, FamilyReport& r);
void to_json(Json& j, const VolumeReport& r);
void from_json(const Json& j, VolumeReport& r);
void to_json(Json& j, const CalibrationBounds& b);
void from_json(const Json& j, CalibrationBounds& b);
void to_json(Json& j, const CoverageReport& r);
void from_json(const Json& j, CoverageReport& r);
void to_json(Json& j, const LocalizedResult& r);
void from_json(const Json& j, LocalizedResult& r);
void to_json(Json& j, const VerdictDocument& d);
void from_json(const Json& j, VerdictDocument& d);

// canonical file I/O: dump(2) with sorted keys and a trailing newline
std::string dump_json(const Json& j);
void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

// generator sidecar: spec echo plus the ground-truth metadata
Json generator_metadata_json(const GeneratorSpec& spec,
                             const GeneratedCloud& res);

// per-scale profile (scale index, radius, worst theta, worst beta, min
// omega) and the log-radius plot of the same three series
void write_profile_csv(const std::string& path,
                       const ReifenbergCertificate& cert);
void write_profile_svg(const std::string& path,
                       const ReifenbergCertificate& cert);

// surface exports: CSV rows "u_1..u_k, x_1..x_n"; PLY quad mesh for k = 2
void write_surface_csv(const std::string& path, const ParamSurface& surface);
void write_surface_ply(const std::string& path, const ParamSurface& surface);

}  // namespace calreif
