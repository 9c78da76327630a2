#include "doctest.h"

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "egm/errors.hpp"
#include "egm/gains.hpp"

using namespace egm;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

GainSpec by(const char* name) { return gain_by_name(name); }

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

// Hand-derived generating functions, independent of the library's switch.
double phi_oracle(const std::string& name, double u) {
  const double a = std::abs(u);
  if (name == "triweight") return a <= 1 ? std::pow(1 - u * u, 3) : 0.0;
  if (name == "epanechnikov") return a <= 1 ? 1 - u * u : 0.0;
  if (name == "cauchy") return 1 / (1 + u * u);
  if (name == "gaussian") return std::exp(-u * u / 2);
  if (name == "laplace") return std::exp(-a);
  if (name == "cosine") return a <= 1 ? std::cos(kPi * u / 2) : 0.0;
  if (name == "uniform") return a <= 1 ? 0.5 : 0.0;
  if (name == "tricube") return a <= 1 ? std::pow(1 - a * a * a, 3) : 0.0;
  if (name == "quartic") return a <= 1 ? std::pow(1 - u * u, 2) : 0.0;
  if (name == "triangular") return a <= 1 ? 1 - a : 0.0;
  return NAN;
}

// (s, a) of each loss/gain pair, as read off the closed-form losses.
const std::map<std::string, std::pair<double, double>> kDuality{
    {"triweight", {1.0 / 6.0, 2.0}}, {"epanechnikov", {1.0, 2.0}}, {"cauchy", {1.0, 0.0}},
    {"gaussian", {1.0, 2.0}},        {"laplace", {1.0, 0.0}},      {"cosine", {1.0, 2.0}},
    {"uniform", {2.0, 1.0}},         {"tricube", {1.0, 0.0}},      {"quartic", {1.0, 0.0}},
    {"triangular", {1.0, 1.0}},
};

}  // namespace

TEST_SUITE("gains") {
  TEST_CASE("catalog contents") {
    const auto cat = catalog();
    REQUIRE(cat.size() == 10);
    std::vector<std::string> names;
    for (const auto& g : cat) names.push_back(g.name());
    CHECK(names == std::vector<std::string>{"triweight", "epanechnikov", "cauchy", "gaussian", "laplace", "cosine",
                                            "uniform", "tricube", "quartic", "triangular"});
    for (const auto& g : cat) CHECK(g.generating(0.7) == Approx(phi_oracle(g.name(), 0.7)).epsilon(1e-14));
  }

  TEST_CASE("declared constants") {
    const auto tri = by("triweight");
    CHECK(tri.constants()->L1 == Approx(96.0 / (5.0 * std::sqrt(5.0))).epsilon(1e-15));
    CHECK(tri.constants()->L1 == Approx(8.5865).epsilon(1e-5));
    CHECK(tri.constants()->L2 == 6.0);
    CHECK(tri.constants()->c0 == 3.0);
    CHECK(tri.constants()->L3 == 9.0);
    CHECK(by("epanechnikov").calibration() == Calibration::exact);
    CHECK(by("epanechnikov").constants()->L1 == 2.0);
    CHECK(by("epanechnikov").constants()->L2 == 0.0);
    CHECK(by("cauchy").constants()->L1 == Approx(3.0 * std::sqrt(3.0) / 8.0));
    CHECK(by("cauchy").constants()->L2 == 2.0);
    CHECK(by("gaussian").constants()->L1 == Approx(std::exp(-0.5)));
    CHECK(by("gaussian").constants()->L2 == 0.25);
    CHECK(by("gaussian").constants()->c0 == 0.5);
    CHECK(by("cosine").constants()->L1 == Approx(kPi));
    CHECK(by("cosine").constants()->L2 == Approx(std::pow(kPi, 4) / 192.0));
    CHECK(by("cosine").constants()->c0 == Approx(kPi * kPi / 8.0));
    for (const auto& g : catalog()) {
      if (!g.constants()) continue;
      const auto& k = *g.constants();
      CHECK(k.L3 == Approx(std::max(k.L2 + k.c0, k.L1 / 2)));
      CHECK(k.c0 > 0.0);
      CHECK(k.c0 == Approx(-g.representing_derivative(0.0)).epsilon(1e-14));
    }
  }

  TEST_CASE("calibration classes") {
    CHECK(by("triweight").calibration() == Calibration::strong);
    CHECK(by("laplace").calibration() == Calibration::none);
    CHECK(by("uniform").calibration() == Calibration::none);
    CHECK(by("tricube").calibration() == Calibration::none);
    CHECK(by("triangular").calibration() == Calibration::none);
    CHECK(by("quartic").calibration() == Calibration::strong);
    CHECK(generalized_tukey(2, 1).calibration() == Calibration::exact);
    CHECK(generalized_tukey(2, 5).calibration() == Calibration::strong);
    CHECK(generalized_tukey(3, 2).calibration() == Calibration::none);
    CHECK_FALSE(generalized_tukey(3, 2).has_representing());
    CHECK(by("triweight").support_radius() == 1.0);
    CHECK(std::isinf(by("gaussian").support_radius()));
  }

  TEST_CASE("generalized Tukey reductions") {
    const auto g23 = generalized_tukey(2, 3), tri = by("triweight");
    const auto g21 = generalized_tukey(2, 1), epa = by("epanechnikov");
    for (double u : grid(-1.5, 1.5, 10001)) {
      CHECK(g23.generating(u) == tri.generating(u));
      CHECK(g21.generating(u) == epa.generating(u));
    }
    for (double sigma : {0.5, 1.0, 3.0}) {
      for (double t : grid(-5 * sigma, 5 * sigma, 1001)) {
        CHECK(std::abs(loss_from_gain(g23, sigma, t) - loss_from_gain(tri, sigma, t)) < 1e-12);
        CHECK(std::abs(loss_from_gain(g21, sigma, t) - loss_from_gain(epa, sigma, t)) < 1e-12);
      }
    }
    for (const auto& g : {generalized_tukey(2, 2), generalized_tukey(2, 5), generalized_tukey(3, 2)}) {
      for (double t : grid(-3, 3, 301)) {
        const double dual = g.loss_scale() * std::pow(1.7, g.loss_exponent()) * (1.0 - eval_gain(g, 1.7, t));
        CHECK(std::abs(loss_from_gain(g, 1.7, t) - dual) < 1e-12);
      }
    }
    CHECK_THROWS_AS(generalized_tukey(0, 1), InvalidParameter);
    CHECK_THROWS_AS(generalized_tukey(2, 0), InvalidParameter);
    CHECK(gain_by_name("gtukey:2,3").generating(0.3) == tri.generating(0.3));
    CHECK(gain_by_name("tukey").name() == "triweight");
  }

  TEST_CASE("eval_gain examples and errors") {
    CHECK(eval_gain(by("triweight"), 1, 0) == 1.0);
    CHECK(eval_gain(by("epanechnikov"), 2, 1) == Approx(0.75));
    CHECK(eval_gain(by("uniform"), 0.5, 0.7) == 0.0);
    CHECK(eval_gain(by("gaussian"), 1, 1) == Approx(0.60653).epsilon(1e-5));
    CHECK_THROWS_AS(eval_gain(by("gaussian"), 0, 1), InvalidParameter);
    CHECK_THROWS_AS(eval_gain(by("gaussian"), -1, 1), InvalidParameter);
    CHECK_THROWS_AS(eval_gain(by("gaussian"), 1, NAN), InvalidInput);
    CHECK_THROWS_AS(eval_gain(by("gaussian"), 1, INFINITY), InvalidInput);
    // Exactly zero off the support.
    for (const auto& g : catalog()) {
      if (g.compact()) CHECK(eval_gain(g, 1.3, 1.3 * 1.0000001) == 0.0);
    }
  }

  TEST_CASE("derivative examples") {
    CHECK(eval_gain_derivative(by("gaussian"), 1, 0) == 0.0);
    CHECK(eval_gain_derivative(by("epanechnikov"), 1, 0.5) == Approx(-1.0));
    CHECK(eval_gain_derivative(by("laplace"), 1, -0.5) == Approx(std::exp(-0.5)));
    // Right derivative at the Laplace kink and at compact support edges.
    CHECK(eval_gain_derivative(by("laplace"), 1, 0) == Approx(-1.0));
    CHECK(eval_gain_derivative(by("triangular"), 1, 0) == Approx(-1.0));
    CHECK(eval_gain_derivative(by("epanechnikov"), 1, 1) == 0.0);
    CHECK(eval_gain_derivative(by("epanechnikov"), 1, -1) == Approx(2.0));
    CHECK_THROWS_AS(eval_gain_derivative(by("uniform"), 1, 0.2), UnsupportedOperation);
  }

  TEST_CASE("loss examples") {
    CHECK(loss_from_gain(by("triweight"), 1, 2) == Approx(1.0 / 6.0));
    CHECK(loss_from_gain(by("epanechnikov"), 2, 1) == Approx(1.0));
    CHECK(loss_from_gain(by("cauchy"), 1, 1) == Approx(0.5));
    CHECK(loss_from_gain(by("gaussian"), 3.7, 0) == 0.0);
    for (const auto& g : catalog()) {
      CHECK(loss_from_gain(g, 1.5, 0.0) == 0.0);
      // The plateau is the loss of a residual where the gain has vanished.
      const double plateau = g.loss_scale() * std::pow(1.5, g.loss_exponent()) * eval_gain(g, 1.5, 0.0);
      for (double t : grid(-50, 50, 2001)) CHECK(loss_from_gain(g, 1.5, t) <= plateau + 1e-12);
      CHECK(loss_from_gain(g, 1.5, 1e6) <= plateau + 1e-12);
    }
  }

  TEST_CASE("loss duality on every pair") {
    for (const auto& g : catalog()) {
      const auto [s, a] = kDuality.at(g.name());
      CHECK(g.loss_scale() == s);
      CHECK(g.loss_exponent() == a);
      for (double sigma : {0.5, 1.0, 3.0}) {
        double worst = 0.0;
        const double p0 = eval_gain(g, sigma, 0.0);
        for (double t : grid(-5 * sigma, 5 * sigma, 10000)) {
          const double dual = s * std::pow(sigma, a) * (p0 - eval_gain(g, sigma, t));
          worst = std::max(worst, std::abs(loss_from_gain(g, sigma, t) - dual));
        }
        CHECK_MESSAGE(worst < 1e-12, g.name() << " sigma=" << sigma);
      }
    }
  }

  TEST_CASE("unimodal and non-negative on a grid") {
    for (const auto& g : catalog()) {
      for (double sigma : {0.5, 1.0, 3.0}) {
        const auto ts = grid(-5 * sigma, 5 * sigma, 10001);
        for (std::size_t i = 1; i < ts.size(); ++i) {
          const double a = eval_gain(g, sigma, ts[i - 1]), b = eval_gain(g, sigma, ts[i]);
          REQUIRE(a >= 0.0);
          if (ts[i] <= 0.0) REQUIRE(b >= a);
          if (ts[i - 1] >= 0.0) REQUIRE(b <= a);
        }
      }
    }
  }

  TEST_CASE("psi agrees with phi") {
    std::vector<GainSpec> gains = catalog();
    gains.push_back(generalized_tukey(2, 4));
    const std::vector<MixtureComponent> mix{{0.3, 0.5}, {0.7, 2.0}};
    gains.push_back(mixture_gain(mix));
    for (const auto& g : gains) {
      if (!g.has_representing()) continue;
      double worst = 0.0;
      for (double u : grid(-5, 5, 10000)) worst = std::max(worst, std::abs(g.generating(u) - g.representing(u * u)));
      CHECK_MESSAGE(worst < 1e-12, g.name());
    }
  }

  TEST_CASE("derivative matches central differences away from kinks") {
    const double h = 1e-6;
    for (const auto& g : catalog()) {
      if (g.kind() == GainKind::uniform) continue;
      for (double sigma : {0.5, 2.0}) {
        for (double t : grid(-3 * sigma, 3 * sigma, 601)) {
          const double u = std::abs(t / sigma);
          if (u < 1e-3 || std::abs(u - 1.0) < 1e-3) continue;
          const double fd = (eval_gain(g, sigma, t + h) - eval_gain(g, sigma, t - h)) / (2 * h);
          const double an = eval_gain_derivative(g, sigma, t);
          CHECK_MESSAGE(std::abs(fd - an) <= 1e-4 * std::max(std::abs(an), 1e-3), g.name() << " t=" << t);
        }
      }
    }
  }

  TEST_CASE("half-quadratic weights") {
    CHECK(irls_weight(by("gaussian"), 1, 0) == 0.5);
    CHECK(irls_weight(by("triweight"), 1, 1) == 0.0);
    CHECK(irls_weight(by("cauchy"), 1, 1) == Approx(0.25));
    CHECK(irls_weight(by("triweight"), 1, 3) == 0.0);
    CHECK_THROWS_AS(irls_weight(by("laplace"), 1, 1), UnsupportedOperation);
    CHECK_THROWS_AS(irls_weight(by("uniform"), 1, 1), UnsupportedOperation);
    for (const auto& g : catalog()) {
      if (!g.has_representing() || g.calibration() == Calibration::none) continue;
      const auto& k = *g.constants();
      for (double sigma : {0.5, 2.0}) {
        for (double r : grid(-0.98 * sigma, 0.98 * sigma, 99)) {
          if (r == 0.0) continue;
          const double w = irls_weight(g, sigma, r);
          CHECK(w >= 0.0);
          CHECK(w <= k.L2 + k.c0 + 1e-12);
          CHECK(w * 2 * r / (sigma * sigma) == Approx(-eval_gain_derivative(g, sigma, r)).epsilon(1e-8));
        }
      }
    }
  }

  TEST_CASE("L3") {
    CHECK(lipschitz_L3(2, 0, 1) == 1.0);
    CHECK(lipschitz_L3(96 / (5 * std::sqrt(5.0)), 6, 3) == 9.0);
    CHECK(lipschitz_L3(std::exp(-0.5), 0.25, 0.5) == 0.75);
    CHECK_THROWS_AS(lipschitz_L3(-1, 0, 1), InvalidParameter);
    CHECK_THROWS_AS(lipschitz_L3(1, -1, 1), InvalidParameter);
    CHECK_THROWS_AS(lipschitz_L3(1, 1, 0), InvalidParameter);
  }

  TEST_CASE("scale equivariance") {
    for (const auto& g : catalog()) {
      for (double sigma : {0.3, 1.0, 4.0}) {
        for (double t : grid(-10, 10, 401)) {
          if (g.kind() == GainKind::uniform) {
            CHECK(eval_gain(g, sigma, t) == Approx((std::abs(t) <= sigma ? 1.0 : 0.0) / (2 * sigma)));
          } else {
            CHECK(eval_gain(g, sigma, t) == Approx(eval_gain(g, 1.0, t / sigma)).epsilon(1e-14));
          }
        }
      }
    }
  }

  TEST_CASE("mixture gain") {
    const std::vector<MixtureComponent> one{{1.0, 2.0}};
    const auto m1 = mixture_gain(one);
    CHECK(eval_gain(m1, 1, 0) == 1.0);
    CHECK(m1.calibration() == Calibration::strong);
    for (double t : grid(-6, 6, 121)) CHECK(eval_gain(m1, 1, t) == Approx(std::exp(-t * t / 4.0)));
    const std::vector<MixtureComponent> two{{0.5, 1.0}, {0.5, 2.0}};
    CHECK(eval_gain(mixture_gain(two), 1, 0) == 1.0);
    const std::vector<MixtureComponent> bad{{0.7, 1.0}, {0.7, 2.0}};
    CHECK_THROWS_AS(mixture_gain(bad), InvalidParameter);
    CHECK_THROWS_AS(mixture_gain(std::vector<MixtureComponent>{}), InvalidParameter);
    const std::vector<MixtureComponent> neg{{1.5, 1.0}, {-0.5, 2.0}};
    CHECK_THROWS_AS(mixture_gain(neg), InvalidParameter);
    CHECK(gain_by_name("mixture:0.5@1,0.5@2").generating(0.4) == Approx(mixture_gain(two).generating(0.4)));
    // The single-component mixture reproduces the exp(-t^2/sigma^2) convention.
    CHECK(eval_gain(m1, 1, 2.0) == Approx(std::exp(-1.0)));
  }

  TEST_CASE("unknown names") {
    CHECK_THROWS_AS(gain_by_name("nope"), InvalidParameter);
    CHECK_THROWS_AS(gain_by_name("gtukey:x,1"), InvalidParameter);
  }
}
