#include "egm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "egm/errors.hpp"
#include "egm/rng.hpp"

namespace egm {

namespace {

struct Problem {
  const GainSpec& spec;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
};

double mean_gain(const Problem& P, const Eigen::VectorXd& beta, double sigma) {
  const Eigen::VectorXd r = P.y - P.X * beta;
  double s = 0.0;
  for (Eigen::Index i = 0; i < P.n; ++i) s += eval_gain(P.spec, sigma, r(i));
  return s / static_cast<double>(P.n);
}

// Penalised objective whose ascent IRLS and gradient steps guarantee.
double objective(const Problem& P, const Eigen::VectorXd& beta, double sigma, double lambda) {
  double J = mean_gain(P, beta, sigma);
  if (lambda > 0.0) J -= lambda / (static_cast<double>(P.n) * sigma * sigma) * beta.squaredNorm();
  return J;
}

bool small_change(double before, double after, double tol) {
  return std::abs(after - before) <= tol * std::max(std::abs(before), std::numeric_limits<double>::min());
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda) {
  Eigen::MatrixXd H = A;
  if (lambda > 0.0) H.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  // Eigen's LDLT silently pseudo-inverts zero pivots, so look at D directly.
  const Eigen::VectorXd D = ldlt.vectorD();
  const bool bad = ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(ldlt.rcond() > 1e-14) ||
                   !(D.minCoeff() > 1e-14 * D.maxCoeff());
  if (bad) {
    throw SingularSystem(lambda == 0.0 ? "weighted normal equations are singular; set a positive ridge"
                                       : "weighted normal equations are numerically singular");
  }
  Eigen::VectorXd x = ldlt.solve(b);
  if (!x.allFinite()) throw SingularSystem("weighted least squares produced non-finite coefficients");
  return x;
}

Eigen::VectorXd least_squares(const Problem& P, double lambda) {
  return solve_spd(P.X.transpose() * P.X, P.X.transpose() * P.y, lambda);
}

Eigen::VectorXd weights(const Problem& P, const Eigen::VectorXd& beta, double sigma) {
  const Eigen::VectorXd r = P.y - P.X * beta;
  Eigen::VectorXd w(P.n);
  for (Eigen::Index i = 0; i < P.n; ++i) w(i) = irls_weight(P.spec, sigma, r(i));
  return w;
}

struct RunResult {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;
};

RunResult run_irls(const Problem& P, Eigen::VectorXd beta, double sigma, double lambda, int iters, double tol,
                   std::vector<double>* trace) {
  RunResult out;
  double J = objective(P, beta, sigma, lambda);
  if (trace) trace->push_back(mean_gain(P, beta, sigma));
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd w = weights(P, beta, sigma);
    if (!(w.maxCoeff() > 0.0)) {
      throw DegenerateIterate("every residual lies outside the gain support at sigma = " + format_real(sigma) +
                              "; increase sigma or use sigma annealing");
    }
    const Eigen::MatrixXd Xw = P.X.array().colwise() * w.array();
    const Eigen::VectorXd next = solve_spd(Xw.transpose() * P.X, Xw.transpose() * P.y, lambda);
    const double Jn = objective(P, next, sigma, lambda);
    ++out.iterations;
    if (Jn < J) {
      // Round-off only: the minorant step cannot decrease the objective.
      out.converged = true;
      break;
    }
    beta = next;
    if (trace) trace->push_back(mean_gain(P, beta, sigma));
    const bool done = small_change(J, Jn, tol);
    J = Jn;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.beta = std::move(beta);
  return out;
}

RunResult run_gradient(const Problem& P, Eigen::VectorXd beta, double sigma, double lambda, const SolverConfig& cfg,
                       int iters, std::vector<double>* trace) {
  RunResult out;
  const double nn = static_cast<double>(P.n);
  const double scale = std::max(P.X.squaredNorm() / nn, 1e-300);
  double step = cfg.step0 * sigma * sigma / scale;
  double J = objective(P, beta, sigma, lambda);
  if (trace) trace->push_back(mean_gain(P, beta, sigma));
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd r = P.y - P.X * beta;
    Eigen::VectorXd d(P.n);
    for (Eigen::Index i = 0; i < P.n; ++i) d(i) = eval_gain_derivative(P.spec, sigma, r(i));
    Eigen::VectorXd g = -(P.X.transpose() * d) / nn;
    if (lambda > 0.0) g -= 2.0 * lambda / (nn * sigma * sigma) * beta;
    const double g2 = g.squaredNorm();
    ++out.iterations;
    if (!(g2 > 0.0)) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    double Jn = J;
    Eigen::VectorXd trial;
    for (int b = 0; b <= cfg.max_backtracks; ++b) {
      trial = beta + step * g;
      Jn = objective(P, trial, sigma, lambda);
      if (Jn >= J + cfg.armijo * step * g2) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    beta = trial;
    if (trace) trace->push_back(mean_gain(P, beta, sigma));
    const bool done = small_change(J, Jn, cfg.tol);
    J = Jn;
    step *= 2.0;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.beta = std::move(beta);
  return out;
}

Eigen::Index consensus(const Problem& P, const Eigen::VectorXd& beta, double sigma) {
  const Eigen::VectorXd r = P.y - P.X * beta;
  return (r.array().abs() <= sigma).count();
}

RunResult run_consensus(const Problem& P, Eigen::VectorXd beta, double sigma, const SolverConfig& cfg,
                        std::uint64_t seed, std::vector<double>* trace) {
  RunResult out;
  const double unit = 1.0 / (2.0 * sigma * static_cast<double>(P.n));
  Eigen::Index best = consensus(P, beta, sigma);
  if (trace) trace->push_back(best * unit);
  auto offer = [&](const Eigen::VectorXd& cand) {
    const Eigen::Index c = consensus(P, cand, sigma);
    if (c > best) {
      best = c;
      beta = cand;
      if (trace) trace->push_back(best * unit);
      return true;
    }
    return false;
  };

  // Minimal-subset hypotheses.
  Philox rng(seed);
  const auto n = static_cast<std::uint64_t>(P.n);
  const auto p = static_cast<std::uint64_t>(P.p);
  if (n >= p) {
    std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    Eigen::MatrixXd A(P.p, P.p);
    Eigen::VectorXd b(P.p);
    for (int s = 0; s < cfg.consensus_samples; ++s) {
      for (std::uint64_t k = 0; k < p; ++k) {
        const auto j = k + rng.below(n - k);
        std::swap(pool[k], pool[j]);
        A.row(static_cast<Eigen::Index>(k)) = P.X.row(pool[k]);
        b(static_cast<Eigen::Index>(k)) = P.y(pool[k]);
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
      if (qr.rank() < P.p) continue;
      offer(qr.solve(b));
      ++out.iterations;
    }
  }

  // Least squares on the current inliers.
  {
    const Eigen::VectorXd r = P.y - P.X * beta;
    std::vector<Eigen::Index> in;
    for (Eigen::Index i = 0; i < P.n; ++i) {
      if (std::abs(r(i)) <= sigma) in.push_back(i);
    }
    if (static_cast<Eigen::Index>(in.size()) >= P.p) {
      Eigen::MatrixXd Xi(static_cast<Eigen::Index>(in.size()), P.p);
      Eigen::VectorXd yi(static_cast<Eigen::Index>(in.size()));
      for (std::size_t k = 0; k < in.size(); ++k) {
        Xi.row(static_cast<Eigen::Index>(k)) = P.X.row(in[k]);
        yi(static_cast<Eigen::Index>(k)) = P.y(in[k]);
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xi);
      if (qr.rank() == P.p) offer(qr.solve(yi));
    }
  }

  // Coordinate refinement on a shrinking step.
  for (int k = 0; k <= 10; ++k) {
    const double step = std::ldexp(sigma, -k);
    bool improved = true;
    while (improved) {
      improved = false;
      for (Eigen::Index j = 0; j < P.p; ++j) {
        for (double sgn : {1.0, -1.0}) {
          Eigen::VectorXd cand = beta;
          cand(j) += sgn * step;
          if (offer(cand)) improved = true;
        }
      }
      ++out.iterations;
    }
  }
  out.converged = true;
  out.beta = std::move(beta);
  return out;
}

}  // namespace

std::string_view to_string(SolverMethod m) noexcept {
  switch (m) {
    case SolverMethod::irls: return "irls";
    case SolverMethod::gradient: return "gradient";
    case SolverMethod::grid_consensus: return "grid_consensus";
  }
  return "?";
}

SolverMethod parse_method(std::string_view s) {
  if (s == "irls") return SolverMethod::irls;
  if (s == "gradient") return SolverMethod::gradient;
  if (s == "grid_consensus") return SolverMethod::grid_consensus;
  throw InvalidParameter("unknown solver method '" + std::string(s) + "'");
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw InvalidParameter("max_iters must be positive");
  if (!(tol > 0.0)) throw InvalidParameter("tol must be positive");
  if (ridge && !(*ridge >= 0.0 && std::isfinite(*ridge))) throw InvalidParameter("ridge must be >= 0");
  if (restarts < 1) throw InvalidParameter("restarts must be positive");
  if (!(step0 > 0.0) || !(backtrack > 0.0 && backtrack < 1.0) || !(armijo > 0.0 && armijo < 1.0) ||
      max_backtracks < 1) {
    throw InvalidParameter("invalid line-search parameters");
  }
  if (consensus_samples < 0) throw InvalidParameter("consensus_samples must be >= 0");
  if (M && !(*M > 0.0 && std::isfinite(*M))) throw InvalidParameter("M must be positive");
  if (anneal_from && !(*anneal_from > 0.0 && std::isfinite(*anneal_from))) {
    throw InvalidParameter("anneal_from must be positive");
  }
  if (!(anneal_factor > 0.0 && anneal_factor < 1.0)) throw InvalidParameter("anneal_factor must lie in (0, 1)");
  if (anneal_stage_iters < 1) throw InvalidParameter("anneal_stage_iters must be positive");
}

double empirical_gain(const HypothesisModel& model, const Dataset& data, const GainSpec& spec, double sigma) {
  if (!(sigma > 0.0)) throw InvalidParameter("sigma must be positive");
  if (data.size() == 0) throw InvalidInput("empirical gain of an empty dataset");
  const Eigen::VectorXd f = predict_all(model, data.inputs);
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) s += eval_gain(spec, sigma, data.outputs(i) - f(i));
  return s / static_cast<double>(data.size());
}

Eigen::VectorXd gain_gradient(const HypothesisModel& model, const Dataset& data, const GainSpec& spec,
                              double sigma) {
  if (data.size() == 0) throw InvalidInput("gradient on an empty dataset");
  const Eigen::MatrixXd X = design_matrix(model.map, data.inputs);
  const Eigen::VectorXd r = data.outputs - X * model.coefficients;
  Eigen::VectorXd d(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) d(i) = eval_gain_derivative(spec, sigma, r(i));
  return -(X.transpose() * d) / static_cast<double>(data.size());
}

FitReport fit_egm(const Dataset& data, const GainSpec& spec, double sigma, const FeatureMap& map,
                  const SolverConfig& cfg) {
  cfg.validate();
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidParameter("sigma must be positive and finite");
  if (data.size() == 0) throw InvalidInput("cannot fit an empty dataset");
  if (data.dim() != map.input_dim()) throw InvalidInput("dataset dimension does not match the feature map");
  if (!data.inputs.allFinite() || !data.outputs.allFinite()) throw InvalidInput("dataset contains non-finite values");
  switch (cfg.method) {
    case SolverMethod::irls:
      if (!spec.has_representing() || spec.calibration() == Calibration::none) {
        throw UnsupportedOperation("irls needs a mean-calibrated gain; '" + spec.name() + "' is not");
      }
      break;
    case SolverMethod::gradient:
      if (spec.kind() == GainKind::uniform) {
        throw UnsupportedOperation("the uniform gain is piecewise constant; use grid_consensus");
      }
      break;
    case SolverMethod::grid_consensus:
      if (spec.kind() != GainKind::uniform) throw UnsupportedOperation("grid_consensus is for the uniform gain only");
      break;
  }

  Problem P{spec, design_matrix(map, data.inputs), data.outputs, data.size(), map.feature_count()};
  if (cfg.ridge && *cfg.ridge == 0.0 && P.n < P.p) {
    throw SingularSystem("n = " + std::to_string(P.n) + " < " + std::to_string(P.p) +
                         " features with zero ridge");
  }
  const double trXX = P.X.squaredNorm();
  const double ols_lambda = cfg.ridge ? *cfg.ridge : 1e-8 * trXX / static_cast<double>(P.p);
  const Eigen::VectorXd ols = least_squares(P, ols_lambda);

  double lambda = ols_lambda;
  if (!cfg.ridge && cfg.method != SolverMethod::grid_consensus) {
    const double start_sigma = cfg.anneal_from ? std::max(*cfg.anneal_from, sigma) : sigma;
    double tr = 0.0;
    if (spec.has_representing()) {
      const Eigen::VectorXd w = weights(P, ols, start_sigma);
      tr = (P.X.array().square().colwise() * w.array()).sum();
    }
    if (!(tr > 0.0)) tr = trXX * (spec.constants() ? spec.constants()->c0 : 1.0);
    lambda = 1e-8 * tr / static_cast<double>(P.p);
  }

  FitReport rep;
  rep.sigma = sigma;
  rep.ridge = lambda;
  rep.model.map = map;
  rep.model.M = cfg.M ? *cfg.M : std::max(1.2 * data.outputs.cwiseAbs().maxCoeff(), 0.0);
  if (!(rep.model.M > 0.0)) rep.model.M = 1.0;
  rep.model.clip = cfg.clip;
  rep.clipped_at_evaluation = cfg.clip;

  const double ols_norm = ols.norm();
  const double jitter = ols_norm > 0.0 ? 0.5 * ols_norm / std::sqrt(static_cast<double>(P.p)) : 0.5;

  auto run_at = [&](const Eigen::VectorXd& start, double s, int iters, std::uint64_t seed,
                    std::vector<double>* trace) {
    switch (cfg.method) {
      case SolverMethod::irls: return run_irls(P, start, s, lambda, iters, cfg.tol, trace);
      case SolverMethod::gradient: return run_gradient(P, start, s, lambda, cfg, iters, trace);
      case SolverMethod::grid_consensus: return run_consensus(P, start, s, cfg, seed, trace);
    }
    return RunResult{};
  };

  double best_gain = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.restarts; ++k) {
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    Eigen::VectorXd beta = ols;
    if (k > 0) {
      Philox rng(seed, 1);
      for (Eigen::Index j = 0; j < P.p; ++j) beta(j) += jitter * rng.normal();
    }
    std::vector<double> trace;
    RunResult res;
    int iterations = 0;
    try {
      if (cfg.anneal_from && cfg.method != SolverMethod::grid_consensus) {
        for (double s = *cfg.anneal_from; s > sigma * (1.0 + 1e-12); s *= cfg.anneal_factor) {
          const auto stage = run_at(beta, s, cfg.anneal_stage_iters, seed, nullptr);
          beta = stage.beta;
          iterations += stage.iterations;
        }
      }
      res = run_at(beta, sigma, cfg.max_iters, seed, &trace);
      iterations += res.iterations;
    } catch (const DegenerateIterate&) {
      if (k == 0) throw;
      rep.notes.push_back("restart " + std::to_string(k) + " hit an all-zero-weight iterate and kept its start");
      res.beta = beta;
      res.converged = false;
      trace.assign(1, mean_gain(P, beta, sigma));
    }
    HypothesisModel m = rep.model;
    m.coefficients = res.beta;
    const double g = empirical_gain(m, data, spec, sigma);
    rep.restart_gains.push_back(g);
    rep.iterations += iterations;
    if (g > best_gain) {
      best_gain = g;
      rep.model.coefficients = res.beta;
      rep.gain_trace = std::move(trace);
      rep.converged = res.converged;
      rep.best_restart = k;
    }
  }
  rep.empirical_gain = best_gain;
  return rep;
}

// ---------------------------------------------------------------------------
// Schedules

Schedule parse_schedule(std::string_view s) {
  if (s == "theta1") return Schedule::theta1;
  if (s == "theta2") return Schedule::theta2;
  throw InvalidParameter("unknown schedule '" + std::string(s) + "'");
}

std::string_view to_string(Schedule s) noexcept { return s == Schedule::theta1 ? "theta1" : "theta2"; }

double schedule_exponent(Schedule variant, double e, double q) {
  if (!(e > 0.0) || !std::isfinite(e)) throw InvalidParameter("epsilon must be positive");
  if (!(q > 0.0) || !std::isfinite(q)) throw InvalidParameter("q must be positive");
  if (e <= 1.0) return 1.0 / ((q + 1.0) * (e + 1.0));
  if (variant == Schedule::theta2) return (1.0 + e) / ((q + e + q * e) * (1.0 + e) + 2.0 * e);
  if (e < 2.0) return (1.0 + e) / ((1.0 + e) * (e + q + q * e) + 2.0 * e);
  if (e < 3.0) return (1.0 + e) / ((2.0 + 3.0 * q) * (1.0 + e) + e);
  return 1.0 / (3.0 * (q + 1.0));
}

double sigma_schedule(Schedule variant, double epsilon, double q, std::size_t n) {
  if (n < 1) throw InvalidParameter("n must be positive");
  return std::pow(static_cast<double>(n), schedule_exponent(variant, epsilon, q));
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidParameter("need at least two folds");
  if (n < folds) throw InvalidInput("fewer observations than folds");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Philox rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < idx.size(); ++i) out[i % static_cast<std::size_t>(folds)].push_back(idx[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

namespace {

std::vector<Eigen::Index> complement(Eigen::Index n, const std::vector<Eigen::Index>& held) {
  std::vector<Eigen::Index> out;
  std::size_t h = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (h < held.size() && held[h] == i) {
      ++h;
      continue;
    }
    out.push_back(i);
  }
  return out;
}

template <class Fit>
CvResult run_cv(const Dataset& data, const std::vector<double>& grid, int folds, std::uint64_t seed, Fit&& fit) {
  if (grid.empty()) throw InvalidParameter("cross-validation grid is empty");
  for (double v : grid) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter("cross-validation grid values must be positive");
  }
  const auto split = make_folds(data.size(), folds, seed);
  CvResult res;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (double v : grid) {
    CvRow row;
    row.value = v;
    for (const auto& held : split) {
      const Dataset train = data.subset(complement(data.size(), held));
      const Dataset test = data.subset(held);
      row.fold_gains.push_back(fit(train, test, v));
    }
    row.mean_gain = std::accumulate(row.fold_gains.begin(), row.fold_gains.end(), 0.0) /
                    static_cast<double>(row.fold_gains.size());
    if (row.mean_gain > best_mean || (row.mean_gain == best_mean && v >= res.best)) {
      best_mean = row.mean_gain;
      res.best = v;
    }
    res.table.push_back(std::move(row));
  }
  return res;
}

void check_fold_size(const Dataset& data, int folds, Eigen::Index p, const SolverConfig& cfg) {
  const Eigen::Index smallest_train = data.size() - (data.size() + folds - 1) / folds;
  if (cfg.ridge && *cfg.ridge == 0.0 && smallest_train < p) {
    throw SingularSystem("a training fold has " + std::to_string(smallest_train) + " points for " +
                         std::to_string(p) + " features with zero ridge");
  }
}

}  // namespace

CvResult cross_validate_sigma(const Dataset& data, const GainSpec& spec, const std::vector<double>& sigma_grid,
                              const FeatureMap& map, const SolverConfig& cfg, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidParameter("need at least two folds");
  check_fold_size(data, folds, map.feature_count(), cfg);
  return run_cv(data, sigma_grid, folds, seed, [&](const Dataset& train, const Dataset& test, double s) {
    const auto fit = fit_egm(train, spec, s, map, cfg);
    return empirical_gain(fit.model, test, spec, s);
  });
}

CvResult cross_validate_bandwidth(const Dataset& data, const GainSpec& spec, double sigma,
                                  const std::vector<double>& bandwidth_grid, const SolverConfig& cfg, int folds,
                                  std::uint64_t seed, std::size_t center_cap) {
  if (folds < 2) throw InvalidParameter("need at least two folds");
  const auto cap = static_cast<Eigen::Index>(center_cap);
  check_fold_size(data, folds, std::min(cap, data.size() - data.size() / folds), cfg);
  int fold = 0;
  return run_cv(data, bandwidth_grid, folds, seed, [&](const Dataset& train, const Dataset& test, double h) {
    const auto map = FeatureMap::kernel_on(train.inputs, h, center_cap, derive_seed(seed, static_cast<std::uint64_t>(fold++)));
    const auto fit = fit_egm(train, spec, sigma, map, cfg);
    return empirical_gain(fit.model, test, spec, sigma);
  });
}

}  // namespace egm
