#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rmlab/quadrature.hpp"
#include "rmlab/rng.hpp"

namespace rmlab {

enum class SampleKind { kIidMc, kGrid, kGauss };

SampleKind sample_kind_from_string(const std::string& s);
std::string to_string(SampleKind k);

// Collocation points with probability-style weights: for uniform density the
// weighted sum of f over the set approximates the density-weighted integral,
// i.e. weights sum to 1.
struct SampleSet {
  Eigen::MatrixXd pts;  // M x d
  Eigen::VectorXd w;
  SampleKind kind = SampleKind::kIidMc;
  int d = 1;
  std::uint64_t seed = 0;
};

// boundary of a box, as a list of flattened faces (atoms when d == 1)
struct Face {
  int axis = 0;
  bool upper = false;
  Box geom;        // degenerate along `axis`
  double measure;  // surface measure (1 for an atom)
};

struct BoundaryAtlas {
  int d = 1;
  std::vector<Face> faces;
  double total_measure = 0.0;
};

BoundaryAtlas box_boundary(const Box& box);

SampleSet sample_interior(const Box& box, int m, SampleKind kind, const Rng& rng);
SampleSet sample_boundary(const BoundaryAtlas& atlas, int m, SampleKind kind, const Rng& rng);

// (sum_i w_i |v_i|^q)^(1/q)
double discrete_norm(std::span<const double> values, std::span<const double> weights, double q);
double discrete_norm(const std::function<double(std::span<const double>)>& f,
                     const SampleSet& s, double q);

void sample_to_csv(const SampleSet& s, const std::string& path);

struct McProbeRow {
  int m = 0;
  double mean_abs_error = 0.0;
  double stderr_of_mean = 0.0;
};

struct McProbeResult {
  std::vector<McProbeRow> rows;
  double slope = 0.0;  // fitted log-log rate of mean error vs sample count
  double reference = 0.0;
};

// Monte Carlo convergence of the sample mean of f against the quadrature
// reference, over a doubling ladder of sample counts.
McProbeResult mc_convergence_probe(const std::function<double(std::span<const double>)>& f,
                                   const Box& box, const std::vector<int>& m_list, int trials,
                                   const Rng& rng);

// least squares slope of log(y) against log(x)
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace rmlab
