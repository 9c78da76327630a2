#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "egm/bench.hpp"
#include "egm/calibrate.hpp"
#include "egm/errors.hpp"

using namespace egm;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// Gaussian gain exp(-t^2 / (2 sigma^2)) against N(0, 1) noise, closed form.
double gauss_gain_oracle(double sigma, double delta) {
  const double v = sigma * sigma + 1.0;
  return sigma / std::sqrt(v) * std::exp(-delta * delta / (2 * v));
}

double gauss_gap_oracle(double sigma, double delta) {
  return sigma * sigma * (gauss_gain_oracle(sigma, 0) - gauss_gain_oracle(sigma, delta)) - delta * delta / 2;
}

// Plain composite Simpson on [a, b], used as an independent integrator.
template <class F>
double simpson(F f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double normal_pdf(double e) { return std::exp(-e * e / 2) / std::sqrt(2 * kPi); }

}  // namespace

TEST_SUITE("calibrate") {
  TEST_CASE("axiom checks") {
    const auto tri = check_gain_axioms(gain_by_name("triweight"));
    CHECK(tri.axiom_pass);
    CHECK(*tri.estimated.integral == Approx(32.0 / 35.0).epsilon(1e-10));
    const auto gau = check_gain_axioms(gain_by_name("gaussian"));
    CHECK(gau.axiom_pass);
    CHECK(*gau.estimated.integral == Approx(std::sqrt(2 * kPi)).epsilon(1e-10));
    CHECK(*check_gain_axioms(gain_by_name("cauchy")).estimated.integral == Approx(kPi).epsilon(1e-6));
    CHECK(*check_gain_axioms(gain_by_name("uniform")).estimated.integral == Approx(1.0).epsilon(1e-10));
    for (const auto& g : catalog()) CHECK_MESSAGE(check_gain_axioms(g).axiom_pass, g.name());

    CHECK_FALSE(check_gain_axioms("constant", [](double) { return 1.0; }).axiom_pass);
    CHECK_FALSE(check_gain_axioms("bimodal", [](double u) { return std::exp(-(u - 1) * (u - 1)); }).axiom_pass);
    CHECK_THROWS_AS(check_gain_axioms("bad", [](double u) { return 1.0 / u; }), CertificationFailure);
  }

  TEST_CASE("Lipschitz estimates") {
    const auto epa = estimate_lipschitz(gain_by_name("epanechnikov"));
    CHECK(epa.L1 == Approx(2.0).epsilon(0.01));
    CHECK(epa.L2 == Approx(0.0).epsilon(0.01));
    CHECK(estimate_lipschitz(gain_by_name("cauchy")).L1 == Approx(3 * std::sqrt(3.0) / 8).epsilon(0.01));
    CHECK(estimate_lipschitz(gain_by_name("cauchy")).L2 == Approx(2.0).epsilon(0.01));
    CHECK(estimate_lipschitz(gain_by_name("gaussian")).L1 == Approx(std::exp(-0.5)).epsilon(0.01));
    CHECK(estimate_lipschitz(gain_by_name("gaussian")).L2 == Approx(0.25).epsilon(0.01));
    CHECK(estimate_lipschitz(gain_by_name("triweight")).L2 == Approx(6.0).epsilon(0.01));
    CHECK(estimate_lipschitz(gain_by_name("cosine")).L2 == Approx(std::pow(kPi, 4) / 192).epsilon(0.01));
    // The sup of |d/dt (1 - t^2)^3| is at t = 1/sqrt(5).
    CHECK(estimate_lipschitz(gain_by_name("triweight")).L1 == Approx(96 / (25 * std::sqrt(5.0))).epsilon(1e-3));
    CHECK(estimate_lipschitz(gain_by_name("cosine")).L1 == Approx(kPi / 2).epsilon(1e-3));
    CHECK_THROWS_AS(estimate_lipschitz(gain_by_name("laplace")), UnsupportedOperation);
    for (const auto& g : catalog()) {
      if (!g.constants()) continue;
      CHECK_MESSAGE(certify_lipschitz(g).axiom_pass, g.name());
    }
  }

  TEST_CASE("type alpha") {
    const auto epa = check_type_alpha(gain_by_name("epanechnikov"));
    CHECK(epa.alpha == 2.0);
    CHECK(epa.c == 1.0);
    CHECK(epa.remainder_ok);
    CHECK(epa.exact_residual <= 1e-12);
    const auto lap = check_type_alpha(gain_by_name("laplace"));
    CHECK(lap.alpha == 1.0);
    CHECK(lap.c == 1.0);
    CHECK(lap.remainder_ok);
    const auto uni = check_type_alpha(gain_by_name("uniform"));
    CHECK(uni.alpha == 0.0);
    CHECK(uni.remainder_ok);
    CHECK(uni.exact_residual == 0.0);
    for (const auto& g : catalog()) CHECK_MESSAGE(check_type_alpha(g).remainder_ok, g.name());
    CHECK(check_type_alpha(generalized_tukey(3, 2)).remainder_ok);
  }

  TEST_CASE("population gain against the Gaussian convolution") {
    const auto g = gain_by_name("gaussian");
    const auto prob = LocationProblem::from_noise(NoiseSpec::gaussian(1.0), 0.0, 1.0);
    CHECK(population_gain(g, 1, prob) == Approx(1 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(population_gain(g, 1, prob.with_delta(1.0)) == Approx(std::exp(-0.25) / std::sqrt(2.0)).epsilon(1e-12));
    for (double s : {0.3, 2.0, 17.0}) {
      for (double d : {-0.7, 0.2, 1.0}) {
        CHECK(population_gain(g, s, prob.with_delta(d)) == Approx(gauss_gain_oracle(s, d)).epsilon(1e-10));
      }
    }
    CHECK(population_gain(g, 1, prob) - population_gain(g, 1, prob) == 0.0);
  }

  TEST_CASE("population gain is even for symmetric noise") {
    const auto noise = NoiseSpec::student_t(2.5);
    for (const auto& g : catalog()) {
      const auto p = LocationProblem::from_noise(noise, 0.0, 2.0);
      for (double d : {0.3, 1.1}) {
        CHECK_MESSAGE(std::abs(population_gain(g, 1.5, p.with_delta(d)) - population_gain(g, 1.5, p.with_delta(-d))) <
                          1e-8,
                      g.name());
      }
    }
  }

  TEST_CASE("population gain against a brute-force integral") {
    const auto noise = toy_noise();
    const auto prob = LocationProblem::from_noise(noise, 0.4, 1.0);
    for (const char* name : {"triweight", "epanechnikov", "triangular", "uniform"}) {
      const auto g = gain_by_name(name);
      const double sigma = 0.8;
      // Midpoint sums never touch the support edges, where the uniform gain jumps.
      const int n = 400000;
      const double h = 2 * sigma / n;
      double ref = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = 0.4 - sigma + (i + 0.5) * h;
        ref += eval_gain(g, sigma, e - 0.4) * noise.density(e) * h;
      }
      CHECK_MESSAGE(population_gain(g, sigma, prob) == Approx(ref).epsilon(1e-8), std::string(name));
    }
  }

  TEST_CASE("calibration gap") {
    const auto g = gain_by_name("gaussian");
    const auto prob = LocationProblem::from_noise(NoiseSpec::gaussian(1.0), 0.0, 1.0);
    CHECK(calibration_gap(g, 4, prob) == 0.0);
    const double gap10 = calibration_gap(g, 10, prob.with_delta(1.0));
    CHECK(std::abs(gap10) < 0.01);
    CHECK(gap10 == Approx(-0.00867).epsilon(1e-3));
    for (double s : {4.0, 8.0, 16.0, 32.0, 64.0}) {
      CHECK(calibration_gap(g, s, prob.with_delta(1.0)) == Approx(gauss_gap_oracle(s, 1.0)).epsilon(1e-6));
    }
    CHECK_THROWS_AS(calibration_gap(g, 1.5, prob), PreconditionError);
    CHECK_THROWS_AS(calibration_gap(gain_by_name("laplace"), 10, prob), UnsupportedOperation);
  }

  TEST_CASE("Epanechnikov gap against a brute-force integral") {
    const auto g = gain_by_name("epanechnikov");
    const auto prob = LocationProblem::from_noise(NoiseSpec::gaussian(1.0), 1.0, 1.0);
    for (double s : {4.0, 16.0}) {
      const auto diff = [&](double e) { return (eval_gain(g, s, e) - eval_gain(g, s, e - 1.0)) * normal_pdf(e); };
      const double ref = s * s * (simpson(diff, -s, 0.5, 400000) + simpson(diff, 0.5, s + 1, 400000)) - 1.0;
      CHECK(calibration_gap(g, s, prob) == Approx(ref).epsilon(1e-6));
    }
    const auto t = NoiseSpec::student_t(2.5);
    const auto tp = LocationProblem::from_noise(t, 1.0, 1.0);
    for (double s : {4.0, 64.0}) {
      const auto diff = [&](double e) { return (eval_gain(g, s, e) - eval_gain(g, s, e - 1.0)) * t.density(e); };
      const double ref = s * s * (simpson(diff, -s, 0.5, 400000) + simpson(diff, 0.5, s + 1, 400000)) - 1.0;
      CHECK(calibration_gap(g, s, tp) == Approx(ref).epsilon(1e-6));
    }
    CHECK(calibration_gap(g, 4, tp) == Approx(-0.1330241918).epsilon(1e-8));
    CHECK(calibration_gap(g, 64, tp) == Approx(-0.000153567265).epsilon(1e-6));
  }

  TEST_CASE("Gaussian gap decays like sigma^-2") {
    const auto g = gain_by_name("gaussian");
    const auto prob = LocationProblem::from_noise(NoiseSpec::gaussian(1.0), 1.0, 1.0);
    std::vector<double> s{4, 8, 16, 32, 64}, gaps, oracle;
    for (double v : s) {
      gaps.push_back(std::abs(calibration_gap(g, v, prob)));
      oracle.push_back(std::abs(gauss_gap_oracle(v, 1.0)));
    }
    CHECK(loglog_slope(s, gaps) == Approx(loglog_slope(s, oracle)).epsilon(1e-4));
    CHECK(std::abs(loglog_slope(s, gaps) + 2.0) < 0.3);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(gaps[i] * s[i] * s[i] < 1.0);
  }

  TEST_CASE("mde distance") {
    const auto prob = LocationProblem::from_noise(NoiseSpec::gaussian(1.0), 0.0, 3.0);
    CHECK(mde_distance(prob) == 0.0);
    const auto oracle = [](double d) { return std::sqrt(2 * (1 / (2 * std::sqrt(kPi))) * (1 - std::exp(-d * d / 4))); };
    const double d1 = mde_distance(prob.with_delta(1.0)), d2 = mde_distance(prob.with_delta(2.0));
    CHECK(d1 == Approx(oracle(1.0)).epsilon(1e-10));
    CHECK(d1 == Approx(0.35327).epsilon(1e-4));
    CHECK(d2 == Approx(oracle(2.0)).epsilon(1e-10));
    CHECK(d2 > d1);
  }

  TEST_CASE("location problem validation") {
    CHECK_THROWS_AS(LocationProblem::from_noise(NoiseSpec::gaussian(), 2.0, 1.0).validate({}), PreconditionError);
    LocationProblem p = LocationProblem::from_noise(NoiseSpec::gaussian(), 0.0, 1.0);
    p.density = [](double e) { return 2 * normal_pdf(e); };
    CHECK_THROWS_AS(p.validate({}), PreconditionError);
    QuadratureConfig q;
    q.nodes = 10;
    CHECK_THROWS_AS(q.validate(), InvalidParameter);
  }

  TEST_CASE("fourier transforms") {
    const auto g = gain_by_name("gaussian");
    CHECK(fourier_transform(g, 1.5, 0.7) == Approx(1.5 * std::sqrt(2 * kPi) * std::exp(-1.5 * 1.5 * 0.49 / 2)));
    const auto epa = gain_by_name("epanechnikov");
    // int_{-1}^{1} (1 - t^2) cos(xi t) dt = 4 (sin xi - xi cos xi) / xi^3.
    for (double xi : {0.3, 1.0, 2.5}) {
      CHECK(fourier_transform(epa, 1, xi) == Approx(4 * (std::sin(xi) - xi * std::cos(xi)) / (xi * xi * xi)).epsilon(1e-9));
    }
    const auto tri = gain_by_name("triweight");
    const double ref = simpson([](double t) { return std::pow(1 - t * t, 3) * std::cos(1.3 * t); }, -1, 1, 20000);
    CHECK(fourier_transform(tri, 1, 1.3) == Approx(ref).epsilon(1e-10));
  }

  TEST_CASE("sandwich bounds") {
    const std::vector<double> grid{-1, -0.5, -0.25, -0.1, 0, 0.1, 0.25, 0.5, 1};
    const std::map<std::string, double> frozen{{"triweight", 0.0647100701356465},
                                               {"epanechnikov", 0.0827407263602104},
                                               {"cauchy", 0.030790160879023},
                                               {"gaussian", 0.0589899732601547},
                                               {"cosine", 0.0802778002541315}};
    for (const auto& [name, C] : frozen) {
      const auto r = sandwich_check(gain_by_name(name), 1, 1, grid);
      CHECK_MESSAGE(r.pass, name);
      CHECK(r.C_sigma == Approx(C).epsilon(1e-8));
      for (const auto& row : r.rows) {
        if (row.delta == 0.0) {
          CHECK(row.gap == 0.0);
          CHECK(row.lower == 0.0);
          CHECK(row.upper == 0.0);
        } else {
          CHECK(row.gap > 0.0);
        }
      }
    }
    CHECK(sandwich_check(gain_by_name("gaussian"), 1, 1, grid).C_prime == Approx(2 * std::exp(-0.5)).epsilon(1e-15));
    const auto skip = sandwich_check(gain_by_name("gaussian"), 1, 0.25, {0.1, 0.6});
    CHECK_FALSE(skip.rows[0].skipped);
    CHECK(skip.rows[1].skipped);
  }

  TEST_CASE("Gaussian C_sigma from its closed-form transform") {
    // p_hat(xi) = sqrt(2 pi) exp(-xi^2 / 2), c = 1 / sqrt(2 pi), M = 1.
    const double c = 1 / std::sqrt(2 * kPi);
    const double integral =
        simpson([](double x) { return x * x * 2 * kPi * std::exp(-x * x); }, -kPi / 2, kPi / 2, 20000);
    const double C = c / (kPi * kPi * kPi) * integral;
    CHECK(sandwich_check(gain_by_name("gaussian"), 1, 1, {0.5}).C_sigma == Approx(C).epsilon(1e-10));
  }

  TEST_CASE("certify_gain covers the catalog") {
    for (const auto& g : catalog()) {
      for (const auto& r : certify_gain(g)) CHECK_MESSAGE(r.axiom_pass, g.name() << ' ' << r.check);
    }
  }

  TEST_CASE("doubling nodes leaves quantities unchanged") {
    QuadratureConfig fine;
    fine.nodes = 8192;
    const auto g = gain_by_name("cauchy");
    const auto p = LocationProblem::from_noise(NoiseSpec::student_t(2.5), 0.7, 1.0);
    CHECK(std::abs(population_gain(g, 2, p) - population_gain(g, 2, p, fine)) < 1e-6);
    CHECK(std::abs(mde_distance(p) - mde_distance(p, fine)) < 1e-6);
  }
}
