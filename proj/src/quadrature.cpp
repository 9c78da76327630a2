#include "egm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "egm/errors.hpp"

namespace egm {

namespace {

constexpr int kOrder = 16;
constexpr int kTailShells = 30;

GaussLegendre build_rule(int n) {
  GaussLegendre r;
  r.x.resize(static_cast<std::size_t>(n));
  r.w.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.x[static_cast<std::size_t>(i)] = x;
    r.w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

double checked(double v) {
  if (!std::isfinite(v)) throw PrecisionFailure("integrand is not finite at a quadrature node");
  return v;
}

// Integral of g over [a, b] split into `panels` equal pieces.
double panel_sum(const std::function<double(double)>& g, double a, double b, int panels, QuadRule rule) {
  if (!(b > a)) return 0.0;
  const double h = (b - a) / panels;
  double total = 0.0;
  if (rule == QuadRule::gauss_legendre_composite) {
    const GaussLegendre& gl = gauss_legendre(kOrder);
    for (int p = 0; p < panels; ++p) {
      const double mid = a + (p + 0.5) * h;
      double s = 0.0;
      for (int i = 0; i < kOrder; ++i) s += gl.w[static_cast<std::size_t>(i)] * checked(g(mid + 0.5 * h * gl.x[static_cast<std::size_t>(i)]));
      total += 0.5 * h * s;
    }
  } else {
    const int n = panels * kOrder;
    const double step = (b - a) / n;
    double s = 0.5 * (checked(g(a)) + checked(g(b)));
    for (int i = 1; i < n; ++i) s += checked(g(a + i * step));
    total = s * step;
  }
  return total;
}

}  // namespace

void QuadratureConfig::validate() const {
  if (nodes < 64) throw InvalidParameter("quadrature needs at least 64 nodes");
  if (!(half_width >= 10.0) || !std::isfinite(half_width)) {
    throw InvalidParameter("quadrature half_width must be >= 10");
  }
}

const GaussLegendre& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussLegendre> cache;
  if (n < 1) throw InvalidParameter("Gauss-Legendre order must be positive");
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
  return it->second;
}

double integrate(const std::function<double(double)>& f, double a, double b, const std::vector<Feature>& features,
                 const QuadratureConfig& cfg, int refine) {
  cfg.validate();
  if (std::isnan(a) || std::isnan(b)) throw InvalidParameter("integration bounds must not be NaN");
  if (a == b) return 0.0;
  if (a > b) return -integrate(f, b, a, features, cfg, refine);

  std::vector<Feature> feats = features;
  if (feats.empty()) {
    const double c = std::isfinite(a) && std::isfinite(b) ? 0.5 * (a + b) : (std::isfinite(a) ? a : (std::isfinite(b) ? b : 0.0));
    const double s = std::isfinite(a) && std::isfinite(b) ? 0.5 * (b - a) : 1.0;
    feats.push_back({c, s});
  }

  double lo = a, hi = b;
  double widest = 0.0;
  if (!std::isfinite(a)) lo = std::numeric_limits<double>::infinity();
  if (!std::isfinite(b)) hi = -std::numeric_limits<double>::infinity();
  for (const auto& ft : feats) {
    if (!(ft.scale > 0.0) || !std::isfinite(ft.scale) || !std::isfinite(ft.at)) {
      throw InvalidParameter("quadrature features need a finite location and positive scale");
    }
    widest = std::max(widest, ft.scale);
    if (!std::isfinite(a)) lo = std::min(lo, ft.at - cfg.half_width * ft.scale);
    if (!std::isfinite(b)) hi = std::max(hi, ft.at + cfg.half_width * ft.scale);
  }
  if (!std::isfinite(a) && !std::isfinite(b) && !(hi > lo)) {
    lo = -cfg.half_width * widest;
    hi = cfg.half_width * widest;
  }
  if (!std::isfinite(a) && std::isfinite(b) && lo >= b) lo = b - cfg.half_width * widest;
  if (std::isfinite(a) && !std::isfinite(b) && hi <= a) hi = a + cfg.half_width * widest;

  std::vector<double> cuts{lo, hi};
  const int top = static_cast<int>(std::ceil(std::log2(cfg.half_width)));
  for (const auto& ft : feats) {
    auto push = [&](double v) {
      if (v > lo && v < hi) cuts.push_back(v);
    };
    push(ft.at);
    for (int j = -4; j <= top; ++j) {
      const double d = std::ldexp(ft.scale, j);
      push(ft.at - d);
      push(ft.at + d);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> mesh;
  for (double c : cuts) {
    if (mesh.empty() || c - mesh.back() > 1e-13 * std::max(1.0, std::abs(c))) mesh.push_back(c);
  }
  if (mesh.back() < hi) mesh.back() = hi;

  const int tails = (!std::isfinite(a) ? 1 : 0) + (!std::isfinite(b) ? 1 : 0);
  const int intervals = static_cast<int>(mesh.size()) - 1 + tails * (kTailShells + 1);
  int panels = std::max(1, cfg.nodes / (kOrder * std::max(1, intervals)));
  panels <<= refine;

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < mesh.size(); ++i) total += panel_sum(f, mesh[i], mesh[i + 1], panels, cfg.rule);

  auto tail = [&](double edge, double dir) {
    // e = edge + dir * w (1 - s) / s, de = w / s^2 ds.
    const double w = widest;
    auto g = [&](double s) {
      if (s <= 0.0) return 0.0;
      const double v = f(edge + dir * w * (1.0 - s) / s);
      return v == 0.0 ? 0.0 : v * w / (s * s);
    };
    double t = 0.0;
    for (int j = 0; j < kTailShells; ++j) t += panel_sum(g, std::ldexp(1.0, -(j + 1)), std::ldexp(1.0, -j), panels, cfg.rule);
    t += panel_sum(g, 0.0, std::ldexp(1.0, -kTailShells), panels, QuadRule::gauss_legendre_composite);
    return t;
  };
  if (!std::isfinite(a)) total += tail(lo, -1.0);
  if (!std::isfinite(b)) total += tail(hi, 1.0);
  return total;
}

double integrate_checked(const std::function<double(double)>& f, double a, double b,
                         const std::vector<Feature>& features, const QuadratureConfig& cfg, double tol) {
  const double coarse = integrate(f, a, b, features, cfg, 0);
  const double fine = integrate(f, a, b, features, cfg, 1);
  if (!(std::abs(fine - coarse) <= tol)) {
    throw PrecisionFailure("quadrature did not converge: doubling nodes moved the result by " +
                           std::to_string(std::abs(fine - coarse)));
  }
  return fine;
}

}  // namespace egm
