#include "doctest.h"

#include <cmath>

#include "egm/errors.hpp"
#include "egm/rng.hpp"
#include "egm/solver.hpp"

using namespace egm;
using doctest::Approx;

namespace {

Dataset line_data(std::size_t n, double slope, double intercept, double noise_sd, std::uint64_t seed) {
  return gen_location(n, Truth::linear(slope, intercept), NoiseSpec::gaussian(noise_sd), seed);
}

Dataset make(std::vector<double> x, std::vector<double> y) {
  Dataset d;
  d.inputs = Eigen::Map<Eigen::VectorXd>(x.data(), x.size());
  d.outputs = Eigen::Map<Eigen::VectorXd>(y.data(), y.size());
  return d;
}

bool non_decreasing(const std::vector<double>& v, double slack) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1] - slack) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("empirical gain examples") {
    const Dataset d = make({0.0, 0.5, 1.0}, {1.0, 2.0, 3.0});
    const HypothesisModel exact{FeatureMap::linear(1), Eigen::Vector2d(2, 1), 5, false};
    CHECK(empirical_gain(exact, d, gain_by_name("triweight"), 0.7) == 1.0);
    const HypothesisModel near{FeatureMap::linear(1), Eigen::Vector2d(2, 1.3), 5, false};
    CHECK(empirical_gain(near, d, gain_by_name("uniform"), 0.5) == Approx(1.0));
    const HypothesisModel off{FeatureMap::linear(1), Eigen::Vector2d(0, 2), 5, false};
    // Residuals (-1, 0, 1): only the middle one is inside [-0.5, 0.5].
    CHECK(empirical_gain(off, d, gain_by_name("uniform"), 0.5) == Approx(1.0 / 3.0));
    CHECK_THROWS_AS(empirical_gain(exact, make({}, {}), gain_by_name("gaussian"), 1), InvalidInput);
    CHECK_THROWS_AS(empirical_gain(exact, d, gain_by_name("gaussian"), 0), InvalidParameter);
  }

  TEST_CASE("noiseless linear data") {
    const Dataset d = line_data(40, 2, 1, 0.0, 4);
    const FitReport r = fit_egm(d, gain_by_name("gaussian"), 10, FeatureMap::linear(1), {});
    CHECK(r.model.coefficients(0) == Approx(2).epsilon(1e-6));
    CHECK(r.model.coefficients(1) == Approx(1).epsilon(1e-6));
    CHECK(r.empirical_gain == Approx(1.0));
    for (const char* name : {"triweight", "cauchy", "epanechnikov"}) {
      const FitReport s = fit_egm(d, gain_by_name(name), 1, FeatureMap::linear(1), {});
      CHECK(std::abs(s.model.coefficients(0) - 2) < 1e-6);
    }
  }

  TEST_CASE("single observation") {
    // At x = 0 only the intercept feature is active.
    const Dataset d = make({0.0}, {3.0});
    const FitReport r = fit_egm(d, gain_by_name("triweight"), 1, FeatureMap::linear(1), {});
    CHECK(r.model.coefficients(1) == Approx(3.0).epsilon(1e-6));
    CHECK(r.empirical_gain == Approx(1.0));
  }

  TEST_CASE("IRLS trace is monotone without ridge") {
    const auto noise = NoiseSpec::contaminated(NoiseSpec::gaussian(0.3), 0.2, 8.0, 1.0);
    for (const auto& g : catalog()) {
      if (!g.has_representing() || g.calibration() == Calibration::none) continue;
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Dataset d = gen_location(80, Truth::linear(1.5, -0.5), noise, seed);
        SolverConfig cfg;
        cfg.ridge = 0.0;
        cfg.restarts = 3;
        cfg.seed = seed;
        const FitReport r = fit_egm(d, g, 2.0, FeatureMap::linear(1), cfg);
        CHECK_MESSAGE(non_decreasing(r.gain_trace, 1e-10), g.name());
        for (double v : r.restart_gains) CHECK(r.empirical_gain >= v);
        CHECK(r.empirical_gain == Approx(*std::max_element(r.restart_gains.begin(), r.restart_gains.end())));
      }
    }
  }

  TEST_CASE("robust fit ignores gross outliers") {
    const auto noise = NoiseSpec::contaminated(NoiseSpec::gaussian(0.1), 0.2, 30.0);
    const Dataset d = gen_location(300, Truth::linear(2, 1), noise, 12);
    const FitReport r = fit_egm(d, gain_by_name("triweight"), 1.0, FeatureMap::linear(1), {});
    CHECK(std::abs(r.model.coefficients(0) - 2) < 0.1);
    CHECK(std::abs(r.model.coefficients(1) - 1) < 0.1);
  }

  TEST_CASE("analytic gradient matches finite differences") {
    Philox rng(77);
    const Dataset d = gen_location(60, Truth::sine(), NoiseSpec::student_t(3.0, 0.5), 8, 2);
    const FeatureMap map = FeatureMap::linear(2);
    for (const auto& g : catalog()) {
      if (g.kind() == GainKind::uniform) continue;
      int probes = 0;
      while (probes < 10) {
        Eigen::VectorXd c(3);
        for (int j = 0; j < 3; ++j) c(j) = rng.normal();
        const HypothesisModel m{map, c, 10, false};
        const double sigma = 0.5 + 2 * rng.uniform();
        // Skip probes that put a residual near a kink of the gain.
        const Eigen::VectorXd res = d.outputs - predict_all(m, d.inputs);
        bool near_kink = false;
        for (Eigen::Index i = 0; i < res.size(); ++i) {
          const double u = std::abs(res(i)) / sigma;
          near_kink |= u < 1e-3 || std::abs(u - 1) < 1e-3;
        }
        if (near_kink) continue;
        ++probes;
        const Eigen::VectorXd an = gain_gradient(m, d, g, sigma);
        const double h = 1e-6;
        for (int j = 0; j < 3; ++j) {
          HypothesisModel up = m, dn = m;
          up.coefficients(j) += h;
          dn.coefficients(j) -= h;
          const double fd = (empirical_gain(up, d, g, sigma) - empirical_gain(dn, d, g, sigma)) / (2 * h);
          CHECK_MESSAGE(std::abs(fd - an(j)) <= 1e-5 * std::max(std::abs(an(j)), 1e-3), g.name());
        }
      }
    }
  }

  TEST_CASE("gradient ascent improves on its start") {
    const auto noise = NoiseSpec::contaminated(NoiseSpec::gaussian(0.2), 0.15, 10.0);
    const Dataset d = gen_location(100, Truth::linear(-1, 2), noise, 5);
    SolverConfig cfg;
    cfg.method = SolverMethod::gradient;
    for (const char* name : {"laplace", "tricube", "triangular", "gaussian"}) {
      const FitReport r = fit_egm(d, gain_by_name(name), 0.8, FeatureMap::linear(1), cfg);
      CHECK(non_decreasing(r.gain_trace, 0.0));
      CHECK(std::abs(r.model.coefficients(0) + 1) < 0.3);
    }
  }

  TEST_CASE("consensus search for the uniform gain") {
    const auto noise = NoiseSpec::contaminated(NoiseSpec::gaussian(0.05), 0.3, 20.0);
    const Dataset d = gen_location(120, Truth::linear(3, -1), noise, 6);
    SolverConfig cfg;
    cfg.method = SolverMethod::grid_consensus;
    cfg.seed = 9;
    const FitReport r = fit_egm(d, gain_by_name("uniform"), 0.2, FeatureMap::linear(1), cfg);
    CHECK(std::abs(r.model.coefficients(0) - 3) < 0.3);
    // Value is (1 / 2 sigma) times the inlier fraction.
    CHECK(r.empirical_gain * 0.4 > 0.6);
    const FitReport again = fit_egm(d, gain_by_name("uniform"), 0.2, FeatureMap::linear(1), cfg);
    CHECK(again.model.coefficients == r.model.coefficients);
  }

  TEST_CASE("method support") {
    const Dataset d = line_data(20, 1, 0, 0.1, 1);
    SolverConfig cfg;
    CHECK_THROWS_AS(fit_egm(d, gain_by_name("laplace"), 1, FeatureMap::linear(1), cfg), UnsupportedOperation);
    CHECK_THROWS_AS(fit_egm(d, gain_by_name("uniform"), 1, FeatureMap::linear(1), cfg), UnsupportedOperation);
    cfg.method = SolverMethod::grid_consensus;
    CHECK_THROWS_AS(fit_egm(d, gain_by_name("gaussian"), 1, FeatureMap::linear(1), cfg), UnsupportedOperation);
    cfg.method = SolverMethod::gradient;
    CHECK_THROWS_AS(fit_egm(d, gain_by_name("uniform"), 1, FeatureMap::linear(1), cfg), UnsupportedOperation);
    SolverConfig bad;
    bad.tol = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad = {};
    bad.ridge = -1;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
  }

  TEST_CASE("degenerate and singular systems") {
    const Dataset far = make({0.0, 1.0, 2.0}, {100.0, 101.0, 102.0});
    SolverConfig cfg;
    cfg.M = 1.0;
    // Start from a model far from the data: every residual lies off the support.
    CHECK_THROWS_AS(fit_egm(far, gain_by_name("triweight"), 0.1, FeatureMap::linear(1), [] {
                      SolverConfig c;
                      c.ridge = 1e6;
                      return c;
                    }()),
                    DegenerateIterate);
    SolverConfig nr;
    nr.ridge = 0.0;
    const Dataset one = make({0.5}, {1.0});
    CHECK_THROWS_AS(fit_egm(one, gain_by_name("gaussian"), 1, FeatureMap::linear(1), nr), SingularSystem);
    const Dataset same_x = make({0.5, 0.5, 0.5}, {1.0, 1.2, 0.9});
    CHECK_THROWS_AS(fit_egm(same_x, gain_by_name("gaussian"), 1, FeatureMap::linear(1), nr), SingularSystem);
  }

  TEST_CASE("location equivariance") {
    const auto noise = NoiseSpec::contaminated(NoiseSpec::gaussian(0.3), 0.1, 10.0);
    const Dataset d = gen_location(100, Truth::linear(1, 0.5), noise, 21);
    Dataset shifted = d;
    const double b = 3.25;
    shifted.outputs.array() += b;
    SolverConfig cfg;
    cfg.ridge = 0.0;
    for (const char* name : {"triweight", "cauchy", "gaussian"}) {
      const auto g = gain_by_name(name);
      const FitReport r = fit_egm(d, g, 1.0, FeatureMap::linear(1), cfg);
      const FitReport s = fit_egm(shifted, g, 1.0, FeatureMap::linear(1), cfg);
      CHECK(s.model.coefficients(1) - r.model.coefficients(1) == Approx(b).epsilon(1e-8));
      CHECK(std::abs(s.empirical_gain - r.empirical_gain) < 1e-8);
    }
  }

  TEST_CASE("scale equivariance") {
    const auto noise = NoiseSpec::contaminated(NoiseSpec::gaussian(0.3), 0.1, 10.0);
    const Dataset d = gen_location(100, Truth::linear(1, 0.5), noise, 22);
    Dataset scaled = d;
    const double t = 4.0;
    scaled.outputs *= t;
    SolverConfig cfg;
    cfg.ridge = 0.0;
    for (const char* name : {"triweight", "cosine", "gaussian"}) {
      const auto g = gain_by_name(name);
      const FitReport r = fit_egm(d, g, 1.0, FeatureMap::linear(1), cfg);
      const FitReport s = fit_egm(scaled, g, t, FeatureMap::linear(1), cfg);
      const Eigen::VectorXd pr = predict_all(r.model, d.inputs), ps = predict_all(s.model, d.inputs);
      CHECK((ps - t * pr).cwiseAbs().maxCoeff() < 1e-8 * t);
      CHECK(std::abs(s.empirical_gain - r.empirical_gain) < 1e-8);
      CHECK(s.model.M == Approx(t * r.model.M));
    }
  }

  TEST_CASE("restarts are seeded") {
    const auto noise = NoiseSpec::contaminated(NoiseSpec::gaussian(0.3), 0.3, 5.0, 2.0);
    const Dataset d = gen_location(60, Truth::sine(), noise, 31);
    SolverConfig cfg;
    cfg.restarts = 5;
    cfg.seed = 123;
    const FitReport a = fit_egm(d, gain_by_name("cauchy"), 0.3, FeatureMap::linear(1), cfg);
    const FitReport b = fit_egm(d, gain_by_name("cauchy"), 0.3, FeatureMap::linear(1), cfg);
    CHECK(a.restart_gains == b.restart_gains);
    CHECK(a.restart_gains.size() == 5);
    CHECK(a.model.coefficients == b.model.coefficients);
  }

  TEST_CASE("clipping is applied only to the returned model") {
    const Dataset d = line_data(30, 10, 0, 0.0, 2);
    SolverConfig cfg;
    cfg.clip = true;
    cfg.M = 1.0;
    const FitReport r = fit_egm(d, gain_by_name("gaussian"), 5, FeatureMap::linear(1), cfg);
    CHECK(r.clipped_at_evaluation);
    CHECK(r.model.clip);
    CHECK(r.model.coefficients(0) == Approx(10).epsilon(1e-6));
    CHECK(predict(r.model, Eigen::VectorXd::Constant(1, 0.9)) == 1.0);
  }

  TEST_CASE("default M") {
    const Dataset d = make({0.0, 1.0}, {-2.0, 1.0});
    const FitReport r = fit_egm(d, gain_by_name("gaussian"), 5, FeatureMap::linear(1), {});
    CHECK(r.model.M == Approx(2.4));
  }

  TEST_CASE("sigma schedules") {
    CHECK(sigma_schedule(Schedule::theta1, 1, 1, 256) == Approx(4.0).epsilon(1e-14));
    CHECK(schedule_exponent(Schedule::theta1, 4, 1) == Approx(1.0 / 6.0));
    CHECK(schedule_exponent(Schedule::theta2, 3, 1) == Approx(2.0 / 17.0));
    for (double q : {0.1, 0.5, 1.0, 2.0, 7.0}) {
      for (auto v : {Schedule::theta1, Schedule::theta2}) {
        CHECK(std::abs(schedule_exponent(v, std::nextafter(1.0, 0.0), q) -
                       schedule_exponent(v, std::nextafter(1.0, 2.0), q)) < 1e-12);
      }
    }
    CHECK_THROWS_AS(schedule_exponent(Schedule::theta1, 0, 1), InvalidParameter);
    CHECK_THROWS_AS(schedule_exponent(Schedule::theta2, 1, -1), InvalidParameter);
    CHECK_THROWS_AS(sigma_schedule(Schedule::theta1, 1, 1, 0), InvalidParameter);
    CHECK(parse_schedule("theta2") == Schedule::theta2);
    CHECK_THROWS_AS(parse_schedule("theta3"), InvalidParameter);
  }

  TEST_CASE("folds partition the indices") {
    const auto f = make_folds(23, 5, 4);
    std::vector<int> seen(23, 0);
    for (const auto& fold : f) {
      CHECK(fold.size() >= 4);
      for (auto i : fold) ++seen[i];
    }
    for (int s : seen) CHECK(s == 1);
    CHECK(make_folds(23, 5, 4) == f);
    CHECK(make_folds(23, 5, 5) != f);
  }

  TEST_CASE("cross validation") {
    const auto noise = NoiseSpec::contaminated(NoiseSpec::gaussian(0.3), 0.1, 10.0);
    const Dataset d = gen_location(60, Truth::linear(1, 0), noise, 41);
    const auto g = gain_by_name("gaussian");
    const auto map = FeatureMap::linear(1);
    CHECK(cross_validate_sigma(d, g, {0.7}, map, {}, 5, 1).best == 0.7);
    const auto dup = cross_validate_sigma(d, g, {0.5, 0.5}, map, {}, 5, 1);
    CHECK(dup.best == 0.5);
    CHECK(dup.table[0].mean_gain == dup.table[1].mean_gain);
    const auto a = cross_validate_sigma(d, g, {0.3, 1, 3}, map, {}, 4, 9);
    const auto b = cross_validate_sigma(d, g, {0.3, 1, 3}, map, {}, 4, 9);
    REQUIRE(a.table.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.table[i].fold_gains == b.table[i].fold_gains);
      CHECK(a.table[i].mean_gain == b.table[i].mean_gain);
    }
    CHECK(a.best == b.best);

    SolverConfig nr;
    nr.ridge = 0.0;
    const Dataset tiny = make({0.1, 0.2}, {1, 2});
    CHECK_THROWS_AS(cross_validate_sigma(tiny, g, {1.0}, map, nr, 2, 0), SingularSystem);
    CHECK_THROWS_AS(cross_validate_sigma(d, g, {}, map, {}, 4, 0), InvalidParameter);
    CHECK_THROWS_AS(cross_validate_sigma(d, g, {1.0}, map, {}, 1, 0), InvalidParameter);
  }

  TEST_CASE("bandwidth cross validation is deterministic") {
    const Dataset d = gen_toy(60, 3);
    SolverConfig cfg;
    cfg.ridge = 1e-2;
    const auto a = cross_validate_bandwidth(d, gain_by_name("gaussian"), 2.0, {0.1, 0.3}, cfg, 3, 5);
    const auto b = cross_validate_bandwidth(d, gain_by_name("gaussian"), 2.0, {0.1, 0.3}, cfg, 3, 5);
    CHECK(a.best == b.best);
    CHECK(a.table[0].mean_gain == b.table[0].mean_gain);
  }

  TEST_CASE("method names") {
    CHECK(parse_method("irls") == SolverMethod::irls);
    CHECK(to_string(SolverMethod::grid_consensus) == "grid_consensus");
    CHECK_THROWS_AS(parse_method("newton"), InvalidParameter);
  }
}
