#pragma once

#include <functional>
#include <vector>

namespace egm {

enum class QuadRule { trapezoid, gauss_legendre_composite };

struct QuadratureConfig {
  /// Truncation of the graded core region, in units of the local length scale.
  double half_width = 20.0;
  /// Approximate node budget per evaluation.
  int nodes = 4096;
  QuadRule rule = QuadRule::gauss_legendre_composite;

  /// Throws InvalidParameter unless nodes >= 64 and half_width >= 10.
  void validate() const;
};

/// A point where an integrand has a kink or a peak, with the width of the
/// structure around it; the mesh is graded geometrically towards `at`.
struct Feature {
  double at = 0.0;
  double scale = 1.0;
};

/// Integral of f over [a, b] (either end may be infinite).
///
/// Finite pieces use composite Gauss-Legendre (or trapezoid) panels between
/// the graded breakpoints; infinite tails are mapped onto (0, 1] through
/// e = edge + w (1 - s) / s. `refine` doubles the panel count `refine` times.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const std::vector<Feature>& features, const QuadratureConfig& cfg, int refine = 0);

/// integrate() at the configured budget and at twice the budget; throws
/// PrecisionFailure when the two differ by more than `tol` or when the
/// integrand is non-finite at a node.
double integrate_checked(const std::function<double(double)>& f, double a, double b,
                         const std::vector<Feature>& features, const QuadratureConfig& cfg,
                         double tol = 1e-6);

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> x;
  std::vector<double> w;
};
const GaussLegendre& gauss_legendre(int n);

}  // namespace egm
