#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace egm {

enum class GainKind {
  triweight,
  epanechnikov,
  cauchy,
  gaussian,
  laplace,
  cosine,
  uniform,
  tricube,
  quartic,
  triangular,
  generalized_tukey,
  mixture,
};

enum class Calibration { none, strong, exact };

std::string_view to_string(Calibration c) noexcept;

/// Local expansion p(0) - c (|t|/sigma)^alpha near zero; `exact` when the
/// remainder vanishes on |t| <= sigma.
struct TypeAlpha {
  double alpha = 0.0;
  double c = 0.0;
  bool exact = false;
};

/// Regularity constants of a mean-calibrated gain.
///
/// L1 bounds the Lipschitz constant of t -> psi(t^2), L2 that of psi' on
/// [0, 1), c0 = -psi'(0) and L3 = max(L2 + c0, L1 / 2).
struct GainConstants {
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
  double c0 = 0.0;
};

struct MixtureComponent {
  double weight = 0.0;
  double scale = 0.0;
};

/// An immutable gain function p_sigma(t) = phi(t / sigma), optionally with a
/// representing function psi satisfying p_sigma(t) = psi(t^2 / sigma^2).
///
/// The uniform gain is the one exception to the phi(t / sigma) form: it is
/// normalised to 1 / (2 sigma) on its support, so `generating(u)` returns the
/// sigma = 1 profile and `eval_gain` rescales by 1 / sigma.
class GainSpec {
 public:
  const std::string& name() const noexcept { return name_; }
  GainKind kind() const noexcept { return kind_; }
  Calibration calibration() const noexcept { return calibration_; }
  const std::optional<TypeAlpha>& type_alpha() const noexcept { return type_alpha_; }
  const std::optional<GainConstants>& constants() const noexcept { return constants_; }
  /// In units of sigma; +infinity for gains without compact support.
  double support_radius() const noexcept { return support_radius_; }
  bool compact() const noexcept;
  /// loss(t) = loss_scale * sigma^loss_exponent * (p_sigma(0) - p_sigma(t)).
  double loss_scale() const noexcept { return loss_scale_; }
  double loss_exponent() const noexcept { return loss_exponent_; }
  /// phi(0); empty for the uniform gain whose peak depends on sigma.
  std::optional<double> peak_value() const noexcept { return peak_value_; }
  bool has_representing() const noexcept { return has_psi_; }

  int tukey_m() const noexcept { return m_; }
  int tukey_n() const noexcept { return n_; }
  const std::vector<MixtureComponent>& components() const noexcept { return components_; }

  const std::string& gain_formula() const noexcept { return gain_formula_; }
  const std::string& loss_formula() const noexcept { return loss_formula_; }
  const std::string& loss_name() const noexcept { return loss_name_; }
  /// Empty when the gain has no representing function.
  const std::string& psi_formula() const noexcept { return psi_formula_; }

  /// phi(u).
  double generating(double u) const noexcept;
  /// phi'(u), one-sided from the right at kinks. Undefined for uniform.
  double generating_derivative(double u) const;
  /// psi(v) for v >= 0.
  double representing(double v) const;
  /// psi'(v) for v >= 0, from the right at v = 1 for compact gains.
  double representing_derivative(double v) const;

 private:
  friend GainSpec make_gain(GainKind kind);
  friend GainSpec generalized_tukey(int m, int n);
  friend GainSpec mixture_gain(std::span<const MixtureComponent> components);

  GainSpec() = default;

  std::string name_;
  GainKind kind_ = GainKind::gaussian;
  Calibration calibration_ = Calibration::none;
  std::optional<TypeAlpha> type_alpha_;
  std::optional<GainConstants> constants_;
  double support_radius_ = 0.0;
  double loss_scale_ = 1.0;
  double loss_exponent_ = 0.0;
  std::optional<double> peak_value_;
  bool has_psi_ = false;
  int m_ = 0;
  int n_ = 0;
  std::vector<MixtureComponent> components_;
  std::string gain_formula_;
  std::string loss_formula_;
  std::string loss_name_;
  std::string psi_formula_;
};

/// One of the fixed catalog gains (everything except generalized Tukey and mixtures).
GainSpec make_gain(GainKind kind);

/// Gain (1 - |u|^m)^n on |u| <= 1. Throws InvalidParameter for m < 1 or n < 1.
GainSpec generalized_tukey(int m, int n);

/// Convex combination sum_j w_j exp(-t^2 / s_j^2), evaluated at sigma = 1.
GainSpec mixture_gain(std::span<const MixtureComponent> components);

/// The ten named gains: triweight, Epanechnikov, Cauchy, Gaussian, Laplace,
/// cosine, uniform, tricube, quartic, triangular.
std::vector<GainSpec> catalog();

/// Look up a gain by name. Accepts the catalog names plus "gtukey:M,N" and
/// "mixture:W@S,W@S,...".
GainSpec gain_by_name(std::string_view name);

/// p_sigma(t).
double eval_gain(const GainSpec& spec, double sigma, double t);

/// d/dt p_sigma(t); right derivative at kinks.
double eval_gain_derivative(const GainSpec& spec, double sigma, double t);

/// The bounded loss dual to the gain, in its customary closed form.
double loss_from_gain(const GainSpec& spec, double sigma, double t);

/// max(L2 + c0, L1 / 2).
double lipschitz_L3(double L1, double L2, double c0);

/// Half-quadratic weight -psi'(r^2 / sigma^2); c0 at r = 0, zero off the support.
double irls_weight(const GainSpec& spec, double sigma, double r);

}  // namespace egm
