#include "egm/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "egm/errors.hpp"

namespace egm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) { return format_real(x); }

// Features of p_sigma(. - shift): the peak and, for compact gains, both support edges.
void add_gain_features(std::vector<Feature>& out, const GainSpec& spec, double sigma, double shift) {
  out.push_back({shift, sigma});
  if (spec.compact()) {
    const double r = spec.support_radius() * sigma;
    out.push_back({shift - r, sigma / 16.0});
    out.push_back({shift + r, sigma / 16.0});
  }
}

void require_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidParameter("sigma must be positive and finite");
}

// Integration range for an integrand supported where both the (shifted) gain and the noise live.
std::pair<double, double> joint_range(const GainSpec& spec, double sigma, double a_shift, double b_shift,
                                      const LocationProblem& prob) {
  double lo = prob.lower, hi = prob.upper;
  if (spec.compact()) {
    const double r = spec.support_radius() * sigma;
    lo = std::max(lo, std::min(a_shift, b_shift) - r);
    hi = std::min(hi, std::max(a_shift, b_shift) + r);
  }
  return {lo, hi};
}

}  // namespace

// ---------------------------------------------------------------------------
// LocationProblem

LocationProblem LocationProblem::from_noise(const NoiseSpec& noise, double delta, double M) {
  if (!noise.has_density()) throw InvalidParameter("noise law " + noise.describe() + " has no density");
  LocationProblem p;
  p.density = [noise](double e) { return noise.density(e); };
  const double s = noise.length_scale();
  for (double c : noise.centers()) p.features.push_back({c, s});
  if (noise.family() == NoiseFamily::contaminated) p.features.push_back({0.0, noise.base()->length_scale()});
  p.delta = delta;
  p.M = M;
  p.label = noise.describe();
  return p;
}

LocationProblem LocationProblem::matched(const GainSpec& spec, double sigma, double delta, double M,
                                         const QuadratureConfig& quad) {
  require_sigma(sigma);
  std::vector<Feature> feats;
  add_gain_features(feats, spec, sigma, 0.0);
  double lo = -kInf, hi = kInf;
  if (spec.compact()) {
    lo = -spec.support_radius() * sigma;
    hi = spec.support_radius() * sigma;
  }
  auto p = [spec, sigma](double e) { return eval_gain(spec, sigma, e); };
  const double mass = integrate_checked(p, lo, hi, feats, quad, 1e-10);
  if (!(mass > 0.0) || !std::isfinite(mass)) throw PreconditionError("gain '" + spec.name() + "' is not normalisable");
  const double c = 1.0 / mass;
  LocationProblem out;
  out.density = [p, c](double e) { return c * p(e); };
  out.features = feats;
  out.lower = lo;
  out.upper = hi;
  out.delta = delta;
  out.M = M;
  out.label = "matched(" + spec.name() + ", sigma=" + fmt(sigma) + ")";
  return out;
}

LocationProblem LocationProblem::with_delta(double d) const {
  LocationProblem p = *this;
  p.delta = d;
  return p;
}

void LocationProblem::validate(const QuadratureConfig& quad) const {
  if (!density) throw InvalidParameter("location problem has no noise density");
  if (!(M > 0.0) || !std::isfinite(M)) throw InvalidParameter("M must be positive and finite");
  if (!std::isfinite(delta)) throw InvalidParameter("offset must be finite");
  if (std::abs(delta) > M) {
    throw PreconditionError("offset |delta| = " + fmt(std::abs(delta)) + " exceeds the sup bound M = " + fmt(M));
  }
  const double mass = integrate(density, lower, upper, features, quad, 1);
  if (std::abs(mass - 1.0) > 1e-8) {
    throw PreconditionError("noise density integrates to " + fmt(mass) + ", not 1");
  }
}

// ---------------------------------------------------------------------------
// Axioms

CertReport check_gain_axioms(const std::string& name, const std::function<double(double)>& phi,
                             const QuadratureConfig& quad, double support_radius) {
  quad.validate();
  CertReport rep;
  rep.gain = name;
  rep.check = "axioms";
  rep.tolerance = 1e-12;

  auto value = [&](double u) {
    const double v = phi(u);
    if (!std::isfinite(v)) {
      throw CertificationFailure("candidate gain '" + name + "' is not finite at u = " + fmt(u));
    }
    return v;
  };

  // Unimodality and non-negativity on a grid either side of the peak.
  const double reach = std::isfinite(support_radius) ? 1.5 * support_radius : quad.half_width;
  const int grid = 10000;
  const double peak = value(0.0);
  double violation = 0.0;
  double prev_right = peak, prev_left = peak;
  for (int k = 1; k <= grid; ++k) {
    const double u = reach * k / grid;
    const double r = value(u), l = value(-u);
    violation = std::max({violation, -r, -l, r - prev_right, l - prev_left});
    prev_right = r;
    prev_left = l;
  }
  if (peak < 0.0) violation = std::max(violation, -peak);
  const bool unimodal = violation <= rep.tolerance;
  if (!unimodal) rep.notes.push_back("monotonicity violated by " + fmt(violation));

  // Integral: core region plus doubling shells whose mass must die out.
  bool finite_integral = true;
  double total = 0.0;
  std::vector<Feature> feats{{0.0, 1.0}};
  if (std::isfinite(support_radius)) {
    feats.push_back({-support_radius, 1.0 / 16.0});
    feats.push_back({support_radius, 1.0 / 16.0});
    total = integrate(value, -support_radius, support_radius, feats, quad, 1);
  } else {
    const double R = quad.half_width;
    total = integrate(value, -R, R, feats, quad, 1);
    double last = 0.0;
    for (int k = 0; k < 48; ++k) {
      const double a = std::ldexp(R, k), b = std::ldexp(R, k + 1);
      const std::vector<Feature> shell{{0.5 * (a + b), 0.5 * (b - a)}};
      last = integrate(value, a, b, shell, quad) + integrate(value, -b, -a, shell, quad);
      total += last;
    }
    if (!(std::abs(last) <= 1e-10 * std::max(1.0, std::abs(total)))) {
      finite_integral = false;
      rep.notes.push_back("tail mass does not vanish (last shell carries " + fmt(last) + ")");
    }
  }
  if (finite_integral && !(total > 0.0)) rep.notes.push_back("integral is not positive");
  rep.estimated.integral = total;
  rep.max_violation = violation;
  rep.axiom_pass = unimodal && finite_integral && total > 0.0;
  return rep;
}

CertReport check_gain_axioms(const GainSpec& spec, const QuadratureConfig& quad) {
  auto rep = check_gain_axioms(spec.name(), [&spec](double u) { return spec.generating(u); }, quad,
                               spec.support_radius());
  if (spec.has_representing()) {
    double worst = 0.0;
    for (int k = -10000; k <= 10000; ++k) {
      const double u = 5.0 * k / 10000.0;
      worst = std::max(worst, std::abs(spec.generating(u) - spec.representing(u * u)));
    }
    if (worst >= 1e-12) {
      rep.axiom_pass = false;
      rep.notes.push_back("phi and psi(u^2) disagree by " + fmt(worst));
    }
    rep.max_violation = std::max(rep.max_violation, worst);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lipschitz constants

LipschitzEstimate estimate_lipschitz(const GainSpec& spec) {
  if (!spec.has_representing()) {
    throw UnsupportedOperation("gain '" + spec.name() + "' has no representing function");
  }
  double reach = 1.0;
  if (!spec.compact()) {
    reach = 10.0;
    for (const auto& c : spec.components()) reach = std::max(reach, 10.0 * c.scale);
  }
  const int grid = 100000;
  const double h = 1e-6;
  LipschitzEstimate est;
  for (int k = 0; k <= grid; ++k) {
    const double t = reach * k / grid;
    const double lo = std::max(t - h, 0.0);
    const double d = (spec.representing((t + h) * (t + h)) - spec.representing(lo * lo)) / (t + h - lo);
    est.L1 = std::max(est.L1, std::abs(d));
  }
  double prev = spec.representing_derivative(0.0);
  for (int k = 1; k < grid; ++k) {
    const double u = static_cast<double>(k) / grid;
    const double cur = spec.representing_derivative(u);
    est.L2 = std::max(est.L2, std::abs(cur - prev) * grid);
    prev = cur;
  }
  return est;
}

CertReport certify_lipschitz(const GainSpec& spec) {
  CertReport rep;
  rep.gain = spec.name();
  rep.check = "lipschitz";
  rep.tolerance = 0.01;
  const auto est = estimate_lipschitz(spec);
  rep.estimated.L1 = est.L1;
  rep.estimated.L2 = est.L2;
  if (!spec.constants()) {
    rep.notes.push_back("no declared constants");
    rep.axiom_pass = false;
    return rep;
  }
  const auto& k = *spec.constants();
  rep.declared.L1 = k.L1;
  rep.declared.L2 = k.L2;
  auto excess = [](double estimate, double declared) {
    if (declared == 0.0) return estimate / 0.01;
    return estimate / declared - 1.0;
  };
  const double e1 = excess(est.L1, k.L1), e2 = excess(est.L2, k.L2);
  rep.max_violation = std::max({0.0, e1, e2});
  rep.axiom_pass = e1 <= 0.01 && (k.L2 == 0.0 ? est.L2 <= 0.01 : e2 <= 0.01);
  if (est.L1 < 0.99 * k.L1) rep.notes.push_back("declared L1 is not tight: sup is " + fmt(est.L1));
  if (k.L2 > 0.0 && est.L2 < 0.99 * k.L2) rep.notes.push_back("declared L2 is not tight: sup is " + fmt(est.L2));
  return rep;
}

// ---------------------------------------------------------------------------
// Type alpha

TypeAlphaResult check_type_alpha(const GainSpec& spec) {
  if (!spec.type_alpha()) throw UnsupportedOperation("gain '" + spec.name() + "' has no declared type");
  const auto ta = *spec.type_alpha();
  TypeAlphaResult out;
  out.alpha = ta.alpha;
  out.c = ta.c;
  const double p0 = spec.generating(0.0);
  const double eps = std::numeric_limits<double>::epsilon();

  std::vector<double> ratios, noise;
  for (int k = 3; k <= 20; ++k) {
    const double u = std::ldexp(1.0, -k);
    const double ua = std::pow(u, ta.alpha);
    if (ua < std::ldexp(1.0, -40)) continue;
    // Both signs; the gains are even but the check should not assume it.
    const double r = std::max(std::abs(spec.generating(u) - p0 + ta.c * ua),
                              std::abs(spec.generating(-u) - p0 + ta.c * ua));
    ratios.push_back(r / ua);
    noise.push_back(8.0 * eps * std::max(1.0, std::abs(p0)) / ua);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    if (ratios[i] > ratios[i - 1] * (1.0 + 1e-9) + noise[i]) monotone = false;
  }
  out.last_ratio = ratios.empty() ? 0.0 : ratios.back();
  out.remainder_ok = monotone && !ratios.empty() && out.last_ratio < 1e-3;

  if (ta.exact) {
    double worst = 0.0;
    for (int k = -10000; k <= 10000; ++k) {
      const double u = k / 10000.0;
      worst = std::max(worst, std::abs(spec.generating(u) - p0 + ta.c * std::pow(std::abs(u), ta.alpha)));
    }
    out.exact_residual = worst;
    if (worst > 1e-12) out.remainder_ok = false;
  }
  return out;
}

CertReport certify_type_alpha(const GainSpec& spec) {
  const auto r = check_type_alpha(spec);
  CertReport rep;
  rep.gain = spec.name();
  rep.check = "type_alpha";
  rep.tolerance = spec.type_alpha()->exact ? 1e-12 : 1e-3;
  rep.estimated.alpha = r.alpha;
  rep.estimated.c = r.c;
  rep.declared.alpha = spec.type_alpha()->alpha;
  rep.declared.c = spec.type_alpha()->c;
  rep.max_violation = spec.type_alpha()->exact ? r.exact_residual : r.last_ratio;
  rep.axiom_pass = r.remainder_ok;
  if (spec.type_alpha()->exact) rep.notes.push_back("exact type");
  return rep;
}

// ---------------------------------------------------------------------------
// Population quantities

double population_gain(const GainSpec& spec, double sigma, const LocationProblem& prob,
                       const QuadratureConfig& quad) {
  require_sigma(sigma);
  prob.validate(quad);
  const double d = prob.delta;
  auto f = [&](double e) {
    const double pe = prob.density(e);
    return pe == 0.0 ? 0.0 : eval_gain(spec, sigma, e - d) * pe;
  };
  std::vector<Feature> feats = prob.features;
  add_gain_features(feats, spec, sigma, d);
  const auto [lo, hi] = joint_range(spec, sigma, d, d, prob);
  return integrate_checked(f, lo, hi, feats, quad);
}

double calibration_gap(const GainSpec& spec, double sigma, const LocationProblem& prob,
                       const QuadratureConfig& quad) {
  require_sigma(sigma);
  if (spec.calibration() == Calibration::none || !spec.constants()) {
    throw UnsupportedOperation("gain '" + spec.name() + "' is not mean-calibrated");
  }
  const double threshold = std::max(2.0 * prob.M, 1.0);
  if (sigma < threshold) {
    throw PreconditionError("calibration gap needs sigma >= max(2M, 1) = " + fmt(threshold) + ", got " + fmt(sigma));
  }
  prob.validate(quad);
  const double d = prob.delta;
  if (d == 0.0) return 0.0;
  auto f = [&](double e) {
    const double pe = prob.density(e);
    return pe == 0.0 ? 0.0 : (eval_gain(spec, sigma, e) - eval_gain(spec, sigma, e - d)) * pe;
  };
  std::vector<Feature> feats = prob.features;
  add_gain_features(feats, spec, sigma, 0.0);
  add_gain_features(feats, spec, sigma, d);
  const auto [lo, hi] = joint_range(spec, sigma, 0.0, d, prob);
  const double s2 = sigma * sigma;
  const double c0 = spec.constants()->c0;
  auto scaled = [&](double e) { return s2 * f(e); };
  return integrate_checked(scaled, lo, hi, feats, quad) - c0 * d * d;
}

double mde_distance(const LocationProblem& prob, const QuadratureConfig& quad) {
  prob.validate(quad);
  const double d = prob.delta;
  if (d == 0.0) return 0.0;
  auto f = [&](double t) {
    auto dens = [&](double e) { return (e < prob.lower || e > prob.upper) ? 0.0 : prob.density(e); };
    const double diff = dens(t + d) - dens(t);
    return diff * diff;
  };
  std::vector<Feature> feats = prob.features;
  for (const auto& ft : prob.features) feats.push_back({ft.at - d, ft.scale});
  const double lo = std::min(prob.lower, prob.lower - d), hi = std::max(prob.upper, prob.upper - d);
  const double sq = integrate_checked(f, lo, hi, feats, quad, 1e-10);
  return std::sqrt(std::max(sq, 0.0));
}

double fourier_transform(const GainSpec& spec, double sigma, double xi, const QuadratureConfig& quad) {
  require_sigma(sigma);
  const double ax = std::abs(xi);
  switch (spec.kind()) {
    case GainKind::gaussian:
      return sigma * std::sqrt(2.0 * kPi) * std::exp(-0.5 * sigma * sigma * xi * xi);
    case GainKind::cauchy:
      return kPi * sigma * std::exp(-sigma * ax);
    case GainKind::laplace:
      return 2.0 * sigma / (1.0 + sigma * sigma * xi * xi);
    case GainKind::mixture: {
      double s = 0.0;
      for (const auto& c : spec.components()) {
        const double w = sigma * c.scale;
        s += c.weight * w * std::sqrt(kPi) * std::exp(-0.25 * w * w * xi * xi);
      }
      return s;
    }
    default:
      break;
  }
  const double reach = spec.compact() ? spec.support_radius() * sigma : 20.0 * sigma;
  QuadratureConfig q = quad;
  q.nodes = std::max(q.nodes, 1 << 14);
  std::vector<Feature> feats{{0.0, sigma}};
  if (spec.compact()) feats.push_back({reach, sigma / 16.0});
  auto f = [&](double t) { return eval_gain(spec, sigma, t) * std::cos(xi * t); };
  return 2.0 * integrate(f, 0.0, reach, feats, q);
}

SandwichReport sandwich_check(const GainSpec& spec, double sigma, double M, const std::vector<double>& delta_grid,
                              const QuadratureConfig& quad) {
  require_sigma(sigma);
  if (!(M > 0.0)) throw InvalidParameter("M must be positive");
  if (!spec.constants() || !spec.peak_value()) {
    throw UnsupportedOperation("sandwich bounds need a calibrated gain with a fixed peak");
  }
  SandwichReport rep;
  rep.gain = spec.name();
  rep.sigma = sigma;
  rep.M = M;

  const LocationProblem base = LocationProblem::matched(spec, sigma, 0.0, 2.0 * M, quad);
  {
    std::vector<Feature> feats;
    add_gain_features(feats, spec, sigma, 0.0);
    const double lo = spec.compact() ? -spec.support_radius() * sigma : -kInf;
    const double hi = -lo;
    rep.c_sigma = 1.0 / integrate_checked([&](double t) { return eval_gain(spec, sigma, t); }, lo, hi, feats, quad, 1e-10);
  }

  const double band = kPi / (2.0 * M);
  QuadratureConfig outer = quad;
  outer.nodes = 256;
  auto integrand = [&](double xi) {
    const double ph = fourier_transform(spec, sigma, xi, quad);
    return xi * xi * ph * ph;
  };
  const std::vector<Feature> xi_feats{{0.0, band}};
  rep.C_sigma = rep.c_sigma / (kPi * kPi * kPi) * 2.0 * integrate(integrand, 0.0, band, xi_feats, outer);
  rep.C_prime = 2.0 * *spec.peak_value() * spec.constants()->L1 / sigma;

  const double g0 = population_gain(spec, sigma, base, quad);
  bool pass = true;
  for (double d : delta_grid) {
    SandwichRow row;
    row.delta = d;
    if (std::abs(d) > 2.0 * M) {
      row.skipped = true;
      rep.rows.push_back(row);
      continue;
    }
    if (d != 0.0) {
      row.gap = g0 - population_gain(spec, sigma, base.with_delta(d), quad);
    }
    row.lower = rep.C_sigma * d * d;
    row.upper = rep.C_prime * d * d;
    row.ok = row.lower <= row.gap && row.gap <= row.upper && (d == 0.0 || row.gap > 0.0);
    if (!row.ok) {
      pass = false;
      rep.violations.push_back(d);
    }
    rep.rows.push_back(row);
  }
  rep.pass = pass;
  return rep;
}

CertReport to_cert_report(const SandwichReport& r) {
  CertReport rep;
  rep.gain = r.gain;
  rep.check = "sandwich";
  rep.axiom_pass = r.pass;
  double worst = 0.0;
  for (const auto& row : r.rows) {
    if (row.skipped) continue;
    worst = std::max({worst, row.lower - row.gap, row.gap - row.upper});
  }
  rep.max_violation = std::max(worst, 0.0);
  std::ostringstream os;
  os << "sigma=" << fmt(r.sigma) << " M=" << fmt(r.M) << " C_sigma=" << fmt(r.C_sigma)
     << " C_prime=" << fmt(r.C_prime);
  rep.notes.push_back(os.str());
  for (double d : r.violations) rep.notes.push_back("violated at delta=" + fmt(d));
  return rep;
}

std::vector<CertReport> certify_gain(const GainSpec& spec, const QuadratureConfig& quad) {
  std::vector<CertReport> out;
  out.push_back(check_gain_axioms(spec, quad));
  if (spec.type_alpha()) out.push_back(certify_type_alpha(spec));
  if (spec.has_representing() && spec.constants()) {
    out.push_back(certify_lipschitz(spec));
    const std::vector<double> grid{-1.0, -0.5, -0.25, -0.1, 0.1, 0.25, 0.5, 1.0};
    out.push_back(to_cert_report(sandwich_check(spec, 1.0, 1.0, grid, quad)));
  }
  return out;
}

}  // namespace egm
