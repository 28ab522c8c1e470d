#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "calreif/plane.hpp"
#include "calreif/point_cloud.hpp"

namespace calreif {

// Ground-truth sample sets with known flatness, calibration and measure.
struct GeneratorSpec {
  enum class Kind {
    Plane,            // axis-aligned k-plane patch in R^n
    Graph,            // graph of a linear map plus a smooth seeded field
    ComplexCurve,     // {(z, c z^2)} in C^2 = R^4, interleaved coordinates
    CalibratedPlane,  // axis plane named by a basis monomial of a form
    Koch,             // middle-third apex polyline in R^2
    Perturbed         // base cloud + uniform normal noise clamped to delta
  };

  Kind kind = Kind::Plane;
  int n = 4;
  int k = 2;
  double h = 0.01;             // target resolution; emitted resolution <= h
  double domain_radius = 1.0;
  std::uint64_t seed = 1;

  // graph
  Mat gradient;                // (n-k) x k linear part; empty means zero
  double noise_amplitude = 0.0;  // sup norm of the smooth field
  double noise_frequency = 2.0;
  int noise_modes = 3;

  // complex curve
  double curve_coeff = 0.1;

  // calibrated plane
  std::string form_name;       // recorded in metadata only
  std::vector<int> monomial;   // 1-based axis indices, size k

  // koch
  std::vector<double> eta;     // size 1 = constant, else one per generation
  int depth = 0;

  // perturbed
  std::shared_ptr<GeneratorSpec> base;
  double delta = 0.0;
};

struct GeneratedCloud {
  PointCloud cloud;
  double true_measure = -1.0;  // negative when no closed form exists
  double gradient_bound = 0.0;
  double predicted_min_calibration = -1.0;
  bool has_tangent = false;
  OrientedPlane tangent_at_origin;

  explicit GeneratedCloud(PointCloud c) : cloud(std::move(c)) {}
};

// Deterministic for a fixed spec. Throws InputError on invalid parameters.
GeneratedCloud generate(const GeneratorSpec& spec);

// Max sampled operator norm of the differential of the graph map.
double graph_gradient_bound(const GeneratorSpec& spec);

// Length factor of one apex-replacement generation, measured from the
// constructed four-segment geometry of a unit segment.
double koch_generation_factor(double eta);

}  // namespace calreif
