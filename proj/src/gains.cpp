#include "egm/gains.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "egm/errors.hpp"

namespace egm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

// Repeated multiplication so that ipow(a, 3) rounds exactly like a * a * a.
inline double ipow(double a, int k) noexcept {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= a;
  return r;
}

inline double sign_right(double u) noexcept { return u >= 0.0 ? 1.0 : -1.0; }

inline bool inside_closed(double u) noexcept { return std::abs(u) <= 1.0; }
inline bool inside_right(double u) noexcept { return u >= -1.0 && u < 1.0; }

inline double sinc(double x) noexcept {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidParameter("sigma must be a finite positive number");
  }
}

void check_finite(double t, const char* what) {
  if (!std::isfinite(t)) throw InvalidInput(std::string(what) + " must be finite");
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

// Dense supremum search over 1e5 grid points. L1 from |d/dt psi(t^2)| =
// |2 t psi'(t^2)|, L2 from divided differences of psi' on [0, 1).
GainConstants search_constants(const GainSpec& g, double slack) {
  constexpr int kGrid = 100000;
  double t_max = 1.0;
  if (!g.compact()) {
    double widest = 1.0;
    for (const auto& c : g.components()) widest = std::max(widest, c.scale);
    t_max = 10.0 * widest;
  }
  double l1 = 0.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double t = t_max * i / kGrid;
    l1 = std::max(l1, std::abs(2.0 * t * g.representing_derivative(t * t)));
  }
  double l2 = 0.0;
  double prev = g.representing_derivative(0.0);
  const double dv = 1.0 / kGrid;
  for (int i = 1; i < kGrid; ++i) {
    const double cur = g.representing_derivative(i * dv);
    l2 = std::max(l2, std::abs(cur - prev) / dv);
    prev = cur;
  }
  GainConstants k;
  k.c0 = -g.representing_derivative(0.0);
  k.L1 = l1 * slack;
  k.L2 = l2 * slack;
  k.L3 = lipschitz_L3(k.L1, k.L2, k.c0);
  return k;
}

GainConstants table_constants(double L1, double L2, double c0) {
  return GainConstants{L1, L2, lipschitz_L3(L1, L2, c0), c0};
}

constexpr double kDeclaredSlack = 1.01;

}  // namespace

std::string_view to_string(Calibration c) noexcept {
  switch (c) {
    case Calibration::none: return "none";
    case Calibration::strong: return "strong";
    case Calibration::exact: return "exact";
  }
  return "none";
}

bool GainSpec::compact() const noexcept { return std::isfinite(support_radius_); }

double GainSpec::generating(double u) const noexcept {
  switch (kind_) {
    case GainKind::triweight:
      return inside_closed(u) ? ipow(1.0 - u * u, 3) : 0.0;
    case GainKind::epanechnikov:
      return inside_closed(u) ? 1.0 - u * u : 0.0;
    case GainKind::cauchy:
      return 1.0 / (1.0 + u * u);
    case GainKind::gaussian:
      return std::exp(-0.5 * u * u);
    case GainKind::laplace:
      return std::exp(-std::abs(u));
    case GainKind::cosine:
      return inside_closed(u) ? std::cos(0.5 * kPi * u) : 0.0;
    case GainKind::uniform:
      return inside_closed(u) ? 0.5 : 0.0;
    case GainKind::tricube: {
      const double a = std::abs(u);
      return a <= 1.0 ? ipow(1.0 - a * a * a, 3) : 0.0;
    }
    case GainKind::quartic:
      return inside_closed(u) ? ipow(1.0 - u * u, 2) : 0.0;
    case GainKind::triangular:
      return inside_closed(u) ? 1.0 - std::abs(u) : 0.0;
    case GainKind::generalized_tukey: {
      const double a = std::abs(u);
      return a <= 1.0 ? ipow(1.0 - ipow(a, m_), n_) : 0.0;
    }
    case GainKind::mixture: {
      double s = 0.0;
      for (const auto& c : components_) s += c.weight * std::exp(-(u * u) / (c.scale * c.scale));
      return s;
    }
  }
  return 0.0;
}

double GainSpec::generating_derivative(double u) const {
  switch (kind_) {
    case GainKind::triweight:
      return inside_right(u) ? -6.0 * u * ipow(1.0 - u * u, 2) : 0.0;
    case GainKind::epanechnikov:
      return inside_right(u) ? -2.0 * u : 0.0;
    case GainKind::cauchy: {
      const double d = 1.0 + u * u;
      return -2.0 * u / (d * d);
    }
    case GainKind::gaussian:
      return -u * std::exp(-0.5 * u * u);
    case GainKind::laplace:
      return -sign_right(u) * std::exp(-std::abs(u));
    case GainKind::cosine:
      return inside_right(u) ? -0.5 * kPi * std::sin(0.5 * kPi * u) : 0.0;
    case GainKind::uniform:
      throw UnsupportedOperation("uniform gain derivative is zero almost everywhere");
    case GainKind::tricube: {
      const double a = std::abs(u);
      return inside_right(u) ? -9.0 * u * a * ipow(1.0 - a * a * a, 2) : 0.0;
    }
    case GainKind::quartic:
      return inside_right(u) ? -4.0 * u * (1.0 - u * u) : 0.0;
    case GainKind::triangular:
      return inside_right(u) ? -sign_right(u) : 0.0;
    case GainKind::generalized_tukey: {
      if (!inside_right(u)) return 0.0;
      const double a = std::abs(u);
      return -n_ * ipow(1.0 - ipow(a, m_), n_ - 1) * m_ * ipow(a, m_ - 1) * sign_right(u);
    }
    case GainKind::mixture: {
      double s = 0.0;
      for (const auto& c : components_) {
        const double s2 = c.scale * c.scale;
        s -= 2.0 * u / s2 * c.weight * std::exp(-(u * u) / s2);
      }
      return s;
    }
  }
  return 0.0;
}

double GainSpec::representing(double v) const {
  if (!has_psi_) throw UnsupportedOperation("gain '" + name_ + "' has no representing function");
  switch (kind_) {
    case GainKind::triweight:
      return v <= 1.0 ? ipow(1.0 - v, 3) : 0.0;
    case GainKind::epanechnikov:
      return v <= 1.0 ? 1.0 - v : 0.0;
    case GainKind::cauchy:
      return 1.0 / (1.0 + v);
    case GainKind::gaussian:
      return std::exp(-0.5 * v);
    case GainKind::cosine:
      return v <= 1.0 ? std::cos(0.5 * kPi * std::sqrt(v)) : 0.0;
    case GainKind::quartic:
      return v <= 1.0 ? ipow(1.0 - v, 2) : 0.0;
    case GainKind::generalized_tukey:
      return v <= 1.0 ? ipow(1.0 - v, n_) : 0.0;
    case GainKind::mixture: {
      double s = 0.0;
      for (const auto& c : components_) s += c.weight * std::exp(-v / (c.scale * c.scale));
      return s;
    }
    default:
      break;
  }
  throw UnsupportedOperation("gain '" + name_ + "' has no representing function");
}

double GainSpec::representing_derivative(double v) const {
  if (!has_psi_) throw UnsupportedOperation("gain '" + name_ + "' has no representing function");
  switch (kind_) {
    case GainKind::triweight:
      return v < 1.0 ? -3.0 * ipow(1.0 - v, 2) : 0.0;
    case GainKind::epanechnikov:
      return v < 1.0 ? -1.0 : 0.0;
    case GainKind::cauchy: {
      const double d = 1.0 + v;
      return -1.0 / (d * d);
    }
    case GainKind::gaussian:
      return -0.5 * std::exp(-0.5 * v);
    case GainKind::cosine:
      // -(pi / (4 sqrt v)) sin(pi sqrt(v) / 2) written through sinc to stay finite at 0.
      return v < 1.0 ? -(kPi * kPi / 8.0) * sinc(0.5 * kPi * std::sqrt(v)) : 0.0;
    case GainKind::quartic:
      return v < 1.0 ? -2.0 * (1.0 - v) : 0.0;
    case GainKind::generalized_tukey:
      return v < 1.0 ? -n_ * ipow(1.0 - v, n_ - 1) : 0.0;
    case GainKind::mixture: {
      double s = 0.0;
      for (const auto& c : components_) {
        const double s2 = c.scale * c.scale;
        s -= c.weight / s2 * std::exp(-v / s2);
      }
      return s;
    }
    default:
      break;
  }
  throw UnsupportedOperation("gain '" + name_ + "' has no representing function");
}

GainSpec make_gain(GainKind kind) {
  GainSpec g;
  g.kind_ = kind;
  g.peak_value_ = 1.0;
  switch (kind) {
    case GainKind::triweight:
      g.name_ = "triweight";
      g.calibration_ = Calibration::strong;
      g.type_alpha_ = TypeAlpha{2.0, 3.0, false};
      g.constants_ = table_constants(96.0 / (5.0 * std::sqrt(5.0)), 6.0, 3.0);
      g.support_radius_ = 1.0;
      g.loss_scale_ = 1.0 / 6.0;
      g.loss_exponent_ = 2.0;
      g.has_psi_ = true;
      g.gain_formula_ = "(1 - t^2/s^2)^3 * I(|t| <= s)";
      g.psi_formula_ = "(1 - u)^3 * I(u <= 1)";
      g.loss_name_ = "Tukey biweight";
      g.loss_formula_ = "(s^2/6) * [1 - (1 - t^2/s^2)^3] if |t| <= s, else s^2/6";
      break;
    case GainKind::epanechnikov:
      g.name_ = "epanechnikov";
      g.calibration_ = Calibration::exact;
      g.type_alpha_ = TypeAlpha{2.0, 1.0, true};
      g.constants_ = table_constants(2.0, 0.0, 1.0);
      g.support_radius_ = 1.0;
      g.loss_scale_ = 1.0;
      g.loss_exponent_ = 2.0;
      g.has_psi_ = true;
      g.gain_formula_ = "(1 - t^2/s^2) * I(|t| <= s)";
      g.psi_formula_ = "(1 - u) * I(u <= 1)";
      g.loss_name_ = "truncated square";
      g.loss_formula_ = "min(t^2, s^2)";
      break;
    case GainKind::cauchy:
      g.name_ = "cauchy";
      g.calibration_ = Calibration::strong;
      g.type_alpha_ = TypeAlpha{2.0, 1.0, false};
      g.constants_ = table_constants(3.0 * std::sqrt(3.0) / 8.0, 2.0, 1.0);
      g.support_radius_ = kInf;
      g.loss_scale_ = 1.0;
      g.loss_exponent_ = 0.0;
      g.has_psi_ = true;
      g.gain_formula_ = "s^2 / (s^2 + t^2)";
      g.psi_formula_ = "1 / (1 + u)";
      g.loss_name_ = "Geman-McClure";
      g.loss_formula_ = "t^2 / (s^2 + t^2)";
      break;
    case GainKind::gaussian:
      g.name_ = "gaussian";
      g.calibration_ = Calibration::strong;
      g.type_alpha_ = TypeAlpha{2.0, 0.5, false};
      g.constants_ = table_constants(std::exp(-0.5), 0.25, 0.5);
      g.support_radius_ = kInf;
      g.loss_scale_ = 1.0;
      g.loss_exponent_ = 2.0;
      g.has_psi_ = true;
      g.gain_formula_ = "exp(-t^2 / (2 s^2))";
      g.psi_formula_ = "exp(-u / 2)";
      g.loss_name_ = "exponential squared";
      g.loss_formula_ = "s^2 * (1 - exp(-t^2 / (2 s^2)))";
      break;
    case GainKind::laplace:
      g.name_ = "laplace";
      g.calibration_ = Calibration::none;
      g.type_alpha_ = TypeAlpha{1.0, 1.0, false};
      g.support_radius_ = kInf;
      g.loss_scale_ = 1.0;
      g.loss_exponent_ = 0.0;
      g.gain_formula_ = "exp(-|t| / s)";
      g.loss_name_ = "exponential absolute";
      g.loss_formula_ = "1 - exp(-|t| / s)";
      break;
    case GainKind::cosine:
      g.name_ = "cosine";
      g.calibration_ = Calibration::strong;
      g.type_alpha_ = TypeAlpha{2.0, kPi * kPi / 8.0, false};
      g.constants_ = table_constants(kPi, kPi * kPi * kPi * kPi / 192.0, kPi * kPi / 8.0);
      g.support_radius_ = 1.0;
      g.loss_scale_ = 1.0;
      g.loss_exponent_ = 2.0;
      g.has_psi_ = true;
      g.gain_formula_ = "cos(pi t / (2 s)) * I(|t| <= s)";
      g.psi_formula_ = "cos(pi sqrt(u) / 2) * I(u <= 1)";
      g.loss_name_ = "Andrews";
      g.loss_formula_ = "s^2 * (1 - cos(pi t / (2 s))) if |t| <= s, else s^2";
      break;
    case GainKind::uniform:
      g.name_ = "uniform";
      g.calibration_ = Calibration::none;
      g.type_alpha_ = TypeAlpha{0.0, 0.0, true};
      g.support_radius_ = 1.0;
      g.loss_scale_ = 2.0;
      g.loss_exponent_ = 1.0;
      g.peak_value_.reset();
      g.gain_formula_ = "1/(2 s) * I(|t| <= s)";
      g.loss_name_ = "box";
      g.loss_formula_ = "0 if |t| <= s, else 1";
      break;
    case GainKind::tricube:
      g.name_ = "tricube";
      g.calibration_ = Calibration::none;
      g.type_alpha_ = TypeAlpha{3.0, 3.0, false};
      g.support_radius_ = 1.0;
      g.loss_scale_ = 1.0;
      g.loss_exponent_ = 0.0;
      g.gain_formula_ = "(1 - |t|^3/s^3)^3 * I(|t| <= s)";
      g.loss_name_ = "tricube";
      g.loss_formula_ = "1 - (1 - |t|^3/s^3)^3 if |t| <= s, else 1";
      break;
    case GainKind::quartic:
      g.name_ = "quartic";
      g.calibration_ = Calibration::strong;
      g.type_alpha_ = TypeAlpha{2.0, 2.0, false};
      g.support_radius_ = 1.0;
      g.loss_scale_ = 1.0;
      g.loss_exponent_ = 0.0;
      g.has_psi_ = true;
      g.gain_formula_ = "(1 - t^2/s^2)^2 * I(|t| <= s)";
      g.psi_formula_ = "(1 - u)^2 * I(u <= 1)";
      g.loss_name_ = "quartic";
      g.loss_formula_ = "1 - (1 - t^2/s^2)^2 if |t| <= s, else 1";
      break;
    case GainKind::triangular:
      g.name_ = "triangular";
      g.calibration_ = Calibration::none;
      g.type_alpha_ = TypeAlpha{1.0, 1.0, true};
      g.support_radius_ = 1.0;
      g.loss_scale_ = 1.0;
      g.loss_exponent_ = 1.0;
      g.gain_formula_ = "(1 - |t|/s) * I(|t| <= s)";
      g.loss_name_ = "truncated absolute deviation";
      g.loss_formula_ = "min(|t|, s)";
      break;
    case GainKind::generalized_tukey:
      return generalized_tukey(2, 3);
    case GainKind::mixture: {
      const MixtureComponent one{1.0, std::sqrt(2.0)};
      return mixture_gain(std::span<const MixtureComponent>(&one, 1));
    }
  }
  if (g.has_psi_ && !g.constants_) g.constants_ = search_constants(g, kDeclaredSlack);
  return g;
}

GainSpec generalized_tukey(int m, int n) {
  if (m < 1 || n < 1) throw InvalidParameter("generalized Tukey requires m >= 1 and n >= 1");
  GainSpec g;
  g.kind_ = GainKind::generalized_tukey;
  g.m_ = m;
  g.n_ = n;
  g.name_ = "gtukey:" + std::to_string(m) + "," + std::to_string(n);
  g.peak_value_ = 1.0;
  g.support_radius_ = 1.0;
  g.loss_scale_ = 1.0;
  g.loss_exponent_ = 0.0;
  g.type_alpha_ = TypeAlpha{static_cast<double>(m), static_cast<double>(n), n == 1};
  const std::string ms = std::to_string(m);
  const std::string ns = std::to_string(n);
  g.gain_formula_ = "(1 - |t|^" + ms + "/s^" + ms + ")^" + ns + " * I(|t| <= s)";
  g.loss_name_ = "generalized Tukey";
  g.loss_formula_ = "1 - (1 - |t|^" + ms + "/s^" + ms + ")^" + ns + " if |t| <= s, else 1";
  if (m == 2) {
    // Only m = 2 gives psi'(0) < 0; odd m kink at zero and larger even m are flat there.
    g.has_psi_ = true;
    g.calibration_ = n == 1 ? Calibration::exact : Calibration::strong;
    g.psi_formula_ = "(1 - u)^" + ns + " * I(u <= 1)";
    g.constants_ = search_constants(g, kDeclaredSlack);
    // (2, 1) is the truncated square and (2, 3) Tukey's biweight; the rest
    // follow the biweight scaling, whose loss starts as t^2 / 2.
    g.loss_exponent_ = 2.0;
    g.loss_scale_ = n == 1 ? 1.0 : 1.0 / (2.0 * n);
    if (n == 1) {
      g.loss_name_ = "truncated square";
      g.loss_formula_ = "min(t^2, s^2)";
    } else {
      g.loss_name_ = n == 3 ? "Tukey biweight" : "generalized Tukey";
      g.loss_formula_ = "(s^2/" + std::to_string(2 * n) + ") [1 - (1 - t^2/s^2)^" + ns + "] capped at s^2/" +
                        std::to_string(2 * n);
    }
  } else {
    g.calibration_ = Calibration::none;
  }
  return g;
}

GainSpec mixture_gain(std::span<const MixtureComponent> components) {
  if (components.empty()) throw InvalidParameter("mixture gain needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw InvalidParameter("mixture weights must be strictly positive");
    }
    if (!(c.scale > 0.0) || !std::isfinite(c.scale)) {
      throw InvalidParameter("mixture scales must be strictly positive");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidParameter("mixture weights must sum to 1 (got " + format_double(total) + ")");
  }
  GainSpec g;
  g.kind_ = GainKind::mixture;
  g.components_.assign(components.begin(), components.end());
  g.name_ = "mixture:";
  std::string terms;
  for (std::size_t j = 0; j < components.size(); ++j) {
    if (j) {
      g.name_ += ",";
      terms += " + ";
    }
    g.name_ += format_double(components[j].weight) + "@" + format_double(components[j].scale);
    terms += format_double(components[j].weight) + " exp(-t^2/" +
             format_double(components[j].scale * components[j].scale) + ")";
  }
  g.peak_value_ = total;
  g.support_radius_ = kInf;
  g.loss_scale_ = 1.0;
  g.loss_exponent_ = 0.0;
  g.has_psi_ = true;
  g.calibration_ = Calibration::strong;
  g.gain_formula_ = terms + "   (t in units of s)";
  g.psi_formula_ = "sum_j w_j exp(-u / s_j^2)";
  g.loss_name_ = "mixture exponential squared";
  g.loss_formula_ = "p(0) - p(t)";
  g.constants_ = search_constants(g, kDeclaredSlack);
  g.type_alpha_ = TypeAlpha{2.0, g.constants_->c0, false};
  return g;
}

std::vector<GainSpec> catalog() {
  std::vector<GainSpec> out;
  for (GainKind k : {GainKind::triweight, GainKind::epanechnikov, GainKind::cauchy, GainKind::gaussian,
                     GainKind::laplace, GainKind::cosine, GainKind::uniform, GainKind::tricube,
                     GainKind::quartic, GainKind::triangular}) {
    out.push_back(make_gain(k));
  }
  return out;
}

namespace {

double parse_number(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw InvalidParameter("cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

GainSpec gain_by_name(std::string_view name) {
  for (auto& g : catalog()) {
    if (g.name() == name) return g;
  }
  if (name == "tukey" || name == "biweight") return make_gain(GainKind::triweight);
  if (name.starts_with("gtukey:")) {
    const auto parts = split(name.substr(7), ',');
    if (parts.size() != 2) throw InvalidParameter("expected gtukey:M,N");
    const double m = parse_number(parts[0]);
    const double n = parse_number(parts[1]);
    if (m != std::floor(m) || n != std::floor(n)) throw InvalidParameter("gtukey indices must be integers");
    return generalized_tukey(static_cast<int>(m), static_cast<int>(n));
  }
  if (name.starts_with("mixture:")) {
    std::vector<MixtureComponent> comps;
    for (auto term : split(name.substr(8), ',')) {
      const auto at = term.find('@');
      if (at == std::string_view::npos) throw InvalidParameter("expected mixture:W@S,...");
      comps.push_back({parse_number(term.substr(0, at)), parse_number(term.substr(at + 1))});
    }
    return mixture_gain(comps);
  }
  throw InvalidParameter("unknown gain '" + std::string(name) + "'");
}

double eval_gain(const GainSpec& spec, double sigma, double t) {
  check_sigma(sigma);
  check_finite(t, "t");
  const double u = t / sigma;
  const double v = spec.generating(u);
  return spec.kind() == GainKind::uniform ? v / sigma : v;
}

double eval_gain_derivative(const GainSpec& spec, double sigma, double t) {
  check_sigma(sigma);
  check_finite(t, "t");
  return spec.generating_derivative(t / sigma) / sigma;
}

double loss_from_gain(const GainSpec& spec, double sigma, double t) {
  check_sigma(sigma);
  check_finite(t, "t");
  const double s2 = sigma * sigma;
  const double a = std::abs(t);
  switch (spec.kind()) {
    case GainKind::triweight:
      return a <= sigma ? s2 / 6.0 * (1.0 - ipow(1.0 - t * t / s2, 3)) : s2 / 6.0;
    case GainKind::epanechnikov:
      return std::min(t * t, s2);
    case GainKind::cauchy:
      return t * t / (s2 + t * t);
    case GainKind::gaussian:
      return s2 * (1.0 - std::exp(-t * t / (2.0 * s2)));
    case GainKind::laplace:
      return 1.0 - std::exp(-a / sigma);
    case GainKind::cosine:
      return a <= sigma ? s2 * (1.0 - std::cos(kPi * t / (2.0 * sigma))) : s2;
    case GainKind::uniform:
      return a <= sigma ? 0.0 : 1.0;
    case GainKind::tricube:
      return a <= sigma ? 1.0 - ipow(1.0 - ipow(a / sigma, 3), 3) : 1.0;
    case GainKind::quartic:
      return a <= sigma ? 1.0 - ipow(1.0 - t * t / s2, 2) : 1.0;
    case GainKind::triangular:
      return std::min(a, sigma);
    case GainKind::generalized_tukey:
      if (spec.tukey_m() == 2) {
        const int n = spec.tukey_n();
        if (n == 1) return std::min(t * t, s2);
        return a <= sigma ? s2 / (2.0 * n) * (1.0 - ipow(1.0 - t * t / s2, n)) : s2 / (2.0 * n);
      }
      return a <= sigma ? 1.0 - ipow(1.0 - ipow(a / sigma, spec.tukey_m()), spec.tukey_n()) : 1.0;
    case GainKind::mixture:
      return spec.generating(0.0) - spec.generating(t / sigma);
  }
  return 0.0;
}

double lipschitz_L3(double L1, double L2, double c0) {
  if (!std::isfinite(L1) || !std::isfinite(L2) || !std::isfinite(c0)) {
    throw InvalidParameter("Lipschitz constants must be finite");
  }
  if (L1 < 0.0 || L2 < 0.0) throw InvalidParameter("Lipschitz constants must be non-negative");
  if (!(c0 > 0.0)) throw InvalidParameter("c0 must be strictly positive");
  return std::max(L2 + c0, L1 / 2.0);
}

double irls_weight(const GainSpec& spec, double sigma, double r) {
  if (spec.calibration() == Calibration::none || !spec.has_representing()) {
    throw UnsupportedOperation("gain '" + spec.name() + "' has no half-quadratic weight");
  }
  check_sigma(sigma);
  check_finite(r, "residual");
  if (r == 0.0) return spec.constants()->c0;
  const double u = r / sigma;
  return -spec.representing_derivative(u * u);
}

}  // namespace egm
