#include "egm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

#include "egm/errors.hpp"
#include "egm/rng.hpp"

namespace egm {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string seed_text(std::uint64_t s) { return std::to_string(s); }

}  // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("slope needs two or more matching points");
  double mx = 0.0, my = 0.0;
  const double k = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidInput("log-log slope needs positive values");
    mx += std::log(x[i]) / k;
    my += std::log(y[i]) / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Toy benchmark

nlohmann::json BenchToyConfig::to_json() const {
  return {{"n_train", n_train},
          {"n_test", n_test},
          {"sigmas", sigmas},
          {"seed", seed_text(seed)},
          {"gain", "gaussian"},
          {"feature_map", "kernel_dictionary"},
          {"bandwidth_grid", bandwidth_grid},
          {"folds", folds},
          {"ridge", ridge},
          {"anneal_from", anneal_from},
          {"anneal_factor", SolverConfig{}.anneal_factor},
          {"restarts", restarts},
          {"max_iters", max_iters},
          {"curve_points", curve_points}};
}

BenchToyResult run_bench_toy(const BenchToyConfig& cfg) {
  if (cfg.n_train < 2 || cfg.n_test < 1) throw InvalidParameter("toy benchmark needs n_train >= 2 and n_test >= 1");
  if (cfg.sigmas.empty()) throw InvalidParameter("toy benchmark needs at least one sigma");
  if (cfg.curve_points < 2) throw InvalidParameter("need at least two curve points");
  BenchToyResult out;
  out.config = cfg;
  const Dataset train = gen_toy(cfg.n_train, derive_seed(cfg.seed, 0));
  const Dataset test = gen_toy(cfg.n_test, derive_seed(cfg.seed, 1));
  const GainSpec gain = make_gain(GainKind::gaussian);

  for (std::size_t k = 0; k < cfg.sigmas.size(); ++k) {
    const double sigma = cfg.sigmas[k];
    const auto start = std::chrono::steady_clock::now();
    SolverConfig sc;
    sc.ridge = cfg.ridge;
    sc.restarts = cfg.restarts;
    sc.max_iters = cfg.max_iters;
    sc.seed = derive_seed(cfg.seed, 100 + k);
    if (sigma < cfg.anneal_from) sc.anneal_from = cfg.anneal_from;

    const std::uint64_t cv_seed = derive_seed(cfg.seed, 200 + k);
    auto cv = cross_validate_bandwidth(train, gain, sigma, cfg.bandwidth_grid, sc, cfg.folds, cv_seed);
    const double h = cv.best;
    const FeatureMap map = FeatureMap::kernel_on(train.inputs, h, 500, cv_seed);
    const FitReport fit = fit_egm(train, gain, sigma, map, sc);

    const Eigen::VectorXd f = predict_all(fit.model, test.inputs);
    double se_me = 0.0, se_mo = 0.0;
    for (Eigen::Index i = 0; i < test.size(); ++i) {
      const auto [me, mo] = toy_references(test.inputs(i, 0));
      se_me += (f(i) - me) * (f(i) - me);
      se_mo += (f(i) - mo) * (f(i) - mo);
    }
    ToySummary s;
    s.sigma = sigma;
    s.bandwidth = h;
    s.rmse_mean = std::sqrt(se_me / static_cast<double>(test.size()));
    s.rmse_mode = std::sqrt(se_mo / static_cast<double>(test.size()));
    s.empirical_gain = fit.empirical_gain;
    s.iterations = fit.iterations;
    s.converged = fit.converged;
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.summary.push_back(s);
    out.bandwidth_cv.push_back(std::move(cv));

    Eigen::MatrixXd grid(cfg.curve_points, 1);
    for (int j = 0; j < cfg.curve_points; ++j) grid(j, 0) = static_cast<double>(j) / (cfg.curve_points - 1);
    const Eigen::VectorXd g = predict_all(fit.model, grid);
    for (int j = 0; j < cfg.curve_points; ++j) {
      const auto [me, mo] = toy_references(grid(j, 0));
      out.curves.push_back({sigma, grid(j, 0), g(j), me, mo});
    }
  }
  return out;
}

void write_bench_toy_csv(std::ostream& os, const BenchToyResult& r) {
  os << "kind,sigma,bandwidth,rmse_mean,rmse_mode,empirical_gain,iterations,x,fit,f_mean,f_mode\n";
  for (const auto& s : r.summary) {
    os << "summary," << format_real(s.sigma) << ',' << format_real(s.bandwidth) << ',' << format_real(s.rmse_mean)
       << ',' << format_real(s.rmse_mode) << ',' << format_real(s.empirical_gain) << ',' << s.iterations
       << ",,,,\n";
  }
  for (const auto& c : r.curves) {
    os << "curve," << format_real(c.sigma) << ",,,,,," << format_real(c.x) << ',' << format_real(c.fit) << ','
       << format_real(c.f_mean) << ',' << format_real(c.f_mode) << '\n';
  }
}

nlohmann::json bench_toy_metadata(const BenchToyResult& r) {
  nlohmann::json j;
  j["config"] = r.config.to_json();
  j["train_seed"] = seed_text(derive_seed(r.config.seed, 0));
  j["test_seed"] = seed_text(derive_seed(r.config.seed, 1));
  j["noise"] = toy_noise().to_json();
  auto cv = nlohmann::json::array();
  for (std::size_t k = 0; k < r.bandwidth_cv.size(); ++k) {
    auto rows = nlohmann::json::array();
    for (const auto& row : r.bandwidth_cv[k].table) rows.push_back({{"bandwidth", row.value}, {"mean_gain", row.mean_gain}});
    cv.push_back({{"sigma", r.summary[k].sigma}, {"best_bandwidth", r.bandwidth_cv[k].best}, {"table", rows}});
  }
  j["bandwidth_cv"] = cv;
  auto conv = nlohmann::json::array();
  for (const auto& s : r.summary) conv.push_back({{"sigma", s.sigma}, {"converged", s.converged}});
  j["convergence"] = conv;
  return j;
}

// ---------------------------------------------------------------------------
// Rate benchmark

nlohmann::json BenchRatesConfig::to_json() const {
  return {{"gain", gain},
          {"noise", noise.to_json()},
          {"truth", truth.id()},
          {"epsilon", epsilon},
          {"q", q},
          {"schedule", std::string(to_string(schedule))},
          {"n_list", n_list},
          {"reps", reps},
          {"seed", seed_text(seed)},
          {"mc_points", mc_points},
          {"anneal_ratio", anneal_ratio},
          {"restarts", restarts},
          {"feature_map", "linear_with_intercept"}};
}

BenchRatesResult run_bench_rates(const BenchRatesConfig& cfg) {
  if (cfg.n_list.empty()) throw InvalidParameter("n_list is empty");
  for (std::size_t i = 1; i < cfg.n_list.size(); ++i) {
    if (cfg.n_list[i] <= cfg.n_list[i - 1]) throw InvalidParameter("n_list must be increasing");
  }
  if (cfg.reps < 1) throw InvalidParameter("reps must be positive");
  if (cfg.mc_points < 1) throw InvalidParameter("mc_points must be positive");
  if (cfg.n_list.front() < 2) throw InvalidParameter("every n must be at least 2");
  const GainSpec gain = gain_by_name(cfg.gain);
  const double theta = schedule_exponent(cfg.schedule, cfg.epsilon, cfg.q);
  const FeatureMap map = FeatureMap::linear(1);

  BenchRatesResult out;
  out.config = cfg;
  for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
    const std::size_t n = cfg.n_list[ni];
    const double sigma = sigma_schedule(cfg.schedule, cfg.epsilon, cfg.q, n);
    const std::uint64_t cell_root = derive_seed(cfg.seed, n);
    std::vector<double> egm_err, ols_err;
    for (int rep = 0; rep < cfg.reps; ++rep) {
      const std::uint64_t rep_seed = derive_seed(cell_root, static_cast<std::uint64_t>(rep));
      const Dataset data = gen_location(n, cfg.truth, cfg.noise, derive_seed(rep_seed, 0));

      SolverConfig sc;
      sc.method = gain.has_representing() ? SolverMethod::irls
                                          : (gain.kind() == GainKind::uniform ? SolverMethod::grid_consensus
                                                                              : SolverMethod::gradient);
      sc.restarts = cfg.restarts;
      sc.seed = derive_seed(rep_seed, 1);
      if (cfg.anneal_ratio > 1.0) sc.anneal_from = cfg.anneal_ratio * sigma;
      const FitReport fit = fit_egm(data, gain, sigma, map, sc);

      const Eigen::MatrixXd X = design_matrix(map, data.inputs);
      const Eigen::VectorXd ols = X.colPivHouseholderQr().solve(data.outputs);

      Philox mc(derive_seed(rep_seed, 2));
      double se = 0.0, so = 0.0;
      for (std::size_t m = 0; m < cfg.mc_points; ++m) {
        const double x = mc.uniform();
        const double truth = cfg.truth(x);
        const double fe = fit.model.coefficients(0) * x + fit.model.coefficients(1);
        const double fo = ols(0) * x + ols(1);
        se += (fe - truth) * (fe - truth);
        so += (fo - truth) * (fo - truth);
      }
      se /= static_cast<double>(cfg.mc_points);
      so /= static_cast<double>(cfg.mc_points);
      out.cells.push_back({n, rep, sigma, se, so});
      egm_err.push_back(se);
      ols_err.push_back(so);
    }
    out.summary.push_back({n, theta, sigma, median(egm_err), median(ols_err)});
  }
  if (out.summary.size() >= 2) {
    std::vector<double> ns, e, o;
    for (const auto& s : out.summary) {
      ns.push_back(static_cast<double>(s.n));
      e.push_back(s.median_egm);
      o.push_back(s.median_ols);
    }
    out.slope_egm = loglog_slope(ns, e);
    out.slope_ols = loglog_slope(ns, o);
  }
  return out;
}

void write_bench_rates_csv(std::ostream& os, const BenchRatesResult& r) {
  os << "kind,n,rep,theta,sigma,egm_error,ols_error\n";
  for (const auto& c : r.cells) {
    os << "cell," << c.n << ',' << c.rep << ",," << format_real(c.sigma) << ',' << format_real(c.egm_error) << ','
       << format_real(c.ols_error) << '\n';
  }
  for (const auto& s : r.summary) {
    os << "median," << s.n << ",," << format_real(s.theta) << ',' << format_real(s.sigma) << ','
       << format_real(s.median_egm) << ',' << format_real(s.median_ols) << '\n';
  }
  os << "slope,,,,," << format_real(r.slope_egm) << ',' << format_real(r.slope_ols) << '\n';
}

nlohmann::json bench_rates_metadata(const BenchRatesResult& r) {
  nlohmann::json j;
  j["config"] = r.config.to_json();
  j["theta"] = r.summary.empty() ? 0.0 : r.summary.front().theta;
  j["slope_egm"] = r.slope_egm;
  j["slope_ols"] = r.slope_ols;
  return j;
}

}  // namespace egm
