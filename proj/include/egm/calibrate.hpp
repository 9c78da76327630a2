#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "egm/gains.hpp"
#include "egm/quadrature.hpp"
#include "egm/simulate.hpp"

namespace egm {

/// Constant-offset location model: residual density p_eps, offset
/// delta = f - f*, and sup bound M.
struct LocationProblem {
  std::function<double(double)> density;
  /// Where the density concentrates; grades the quadrature mesh.
  std::vector<Feature> features;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double delta = 0.0;
  double M = 1.0;
  std::string label;

  static LocationProblem from_noise(const NoiseSpec& noise, double delta, double M);
  /// Correctly specified noise c_sigma p_sigma with c_sigma = 1 / int p_sigma.
  static LocationProblem matched(const GainSpec& spec, double sigma, double delta, double M,
                                 const QuadratureConfig& quad = {});
  LocationProblem with_delta(double d) const;

  /// |delta| <= M and the density integrates to 1 within 1e-8.
  void validate(const QuadratureConfig& quad) const;
};

struct Estimates {
  std::optional<double> integral;
  std::optional<double> alpha;
  std::optional<double> c;
  std::optional<double> L1;
  std::optional<double> L2;
};

struct CertReport {
  std::string gain;
  std::string check;
  bool axiom_pass = false;
  Estimates estimated;
  Estimates declared;
  double max_violation = 0.0;
  double tolerance = 0.0;
  std::vector<std::string> notes;
};

/// Integrability (0 < int phi < inf) and unimodality on a grid either side of 0.
CertReport check_gain_axioms(const GainSpec& spec, const QuadratureConfig& quad = {});
/// Same checks for an arbitrary candidate phi.
CertReport check_gain_axioms(const std::string& name, const std::function<double(double)>& phi,
                             const QuadratureConfig& quad = {},
                             double support_radius = std::numeric_limits<double>::infinity());

struct LipschitzEstimate {
  double L1 = 0.0;
  double L2 = 0.0;
};

/// L1 = sup |d/dt psi(t^2)| by central differences, L2 = sup |psi''| on [0, 1)
/// by divided differences of psi'.
LipschitzEstimate estimate_lipschitz(const GainSpec& spec);

/// Compares estimate_lipschitz with the declared constants: an estimate may
/// not exceed its declared bound by more than 1% (0.01 absolute for L2 = 0).
CertReport certify_lipschitz(const GainSpec& spec);

struct TypeAlphaResult {
  double alpha = 0.0;
  double c = 0.0;
  bool remainder_ok = false;
  /// |R| / u^alpha at the finest usable scale.
  double last_ratio = 0.0;
  /// sup |R| on |t| <= sigma, only meaningful for exact declarations.
  double exact_residual = 0.0;
};

TypeAlphaResult check_type_alpha(const GainSpec& spec);
CertReport certify_type_alpha(const GainSpec& spec);

/// G_sigma(delta) = int p_sigma(e - delta) p_eps(e) de.
double population_gain(const GainSpec& spec, double sigma, const LocationProblem& prob,
                       const QuadratureConfig& quad = {});

/// sigma^2 [G_sigma(0) - G_sigma(delta)] - c0 delta^2.
double calibration_gap(const GainSpec& spec, double sigma, const LocationProblem& prob,
                       const QuadratureConfig& quad = {});

/// sqrt(int (p_eps(t + delta) - p_eps(t))^2 dt).
double mde_distance(const LocationProblem& prob, const QuadratureConfig& quad = {});

/// p_hat_sigma(xi) = int p_sigma(t) exp(-i xi t) dt (real, the gains are even).
double fourier_transform(const GainSpec& spec, double sigma, double xi, const QuadratureConfig& quad = {});

struct SandwichRow {
  double delta = 0.0;
  double gap = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool ok = false;
  bool skipped = false;
};

struct SandwichReport {
  std::string gain;
  double sigma = 0.0;
  double M = 0.0;
  double c_sigma = 0.0;
  double C_sigma = 0.0;
  double C_prime = 0.0;
  std::vector<SandwichRow> rows;
  std::vector<double> violations;
  bool pass = false;
};

/// Lower and upper quadratic bounds on G_sigma(0) - G_sigma(delta) under
/// noise c_sigma p_sigma. Grid points with |delta| > 2M are skipped.
SandwichReport sandwich_check(const GainSpec& spec, double sigma, double M, const std::vector<double>& delta_grid,
                              const QuadratureConfig& quad = {});
CertReport to_cert_report(const SandwichReport& r);

/// Every applicable check for one gain, in a fixed order.
std::vector<CertReport> certify_gain(const GainSpec& spec, const QuadratureConfig& quad = {});

}  // namespace egm
