#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "egm/simulate.hpp"
#include "egm/solver.hpp"

namespace egm {

struct BenchToyConfig {
  std::size_t n_train = 200;
  std::size_t n_test = 200;
  std::vector<double> sigmas{0.05, 10.0};
  std::uint64_t seed = 0;
  std::vector<double> bandwidth_grid{0.05, 0.1, 0.2, 0.5, 1.0};
  int folds = 5;
  double ridge = 1e-2;
  /// Fits at sigma below this value start from it and anneal down.
  double anneal_from = 10.0;
  int restarts = 1;
  int max_iters = 500;
  int curve_points = 101;

  nlohmann::json to_json() const;
};

struct ToySummary {
  double sigma = 0.0;
  double bandwidth = 0.0;
  double rmse_mean = 0.0;
  double rmse_mode = 0.0;
  double empirical_gain = 0.0;
  int iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

struct ToyCurvePoint {
  double sigma = 0.0;
  double x = 0.0;
  double fit = 0.0;
  double f_mean = 0.0;
  double f_mode = 0.0;
};

struct BenchToyResult {
  BenchToyConfig config;
  std::vector<ToySummary> summary;
  std::vector<ToyCurvePoint> curves;
  std::vector<CvResult> bandwidth_cv;
};

BenchToyResult run_bench_toy(const BenchToyConfig& cfg);
/// One CSV: a `summary` row per sigma, then `curve` rows. Timings are left out
/// so that reruns are byte-identical.
void write_bench_toy_csv(std::ostream& os, const BenchToyResult& r);
nlohmann::json bench_toy_metadata(const BenchToyResult& r);

struct BenchRatesConfig {
  std::string gain = "triweight";
  NoiseSpec noise = NoiseSpec::contaminated(NoiseSpec::gaussian(1.0), 0.1, 50.0);
  Truth truth = Truth::constant(1.0);
  double epsilon = 1.0;
  double q = 1.0;
  Schedule schedule = Schedule::theta1;
  std::vector<std::size_t> n_list{50, 200, 800, 3200};
  int reps = 5;
  std::uint64_t seed = 0;
  std::size_t mc_points = 10000;
  /// Continuation starts at anneal_ratio * sigma; 0 disables it.
  double anneal_ratio = 10.0;
  int restarts = 1;

  nlohmann::json to_json() const;
};

struct RateCell {
  std::size_t n = 0;
  int rep = 0;
  double sigma = 0.0;
  double egm_error = 0.0;
  double ols_error = 0.0;
};

struct RateSummary {
  std::size_t n = 0;
  double theta = 0.0;
  double sigma = 0.0;
  double median_egm = 0.0;
  double median_ols = 0.0;
};

struct BenchRatesResult {
  BenchRatesConfig config;
  std::vector<RateCell> cells;
  std::vector<RateSummary> summary;
  /// Least-squares slope of log median error against log n.
  double slope_egm = 0.0;
  double slope_ols = 0.0;
};

BenchRatesResult run_bench_rates(const BenchRatesConfig& cfg);
void write_bench_rates_csv(std::ostream& os, const BenchRatesResult& r);
nlohmann::json bench_rates_metadata(const BenchRatesResult& r);

/// Least-squares slope of log y on log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace egm
