#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "egm/gains.hpp"
#include "egm/hypothesis.hpp"
#include "egm/simulate.hpp"

namespace egm {

enum class SolverMethod { irls, gradient, grid_consensus };

std::string_view to_string(SolverMethod m) noexcept;
SolverMethod parse_method(std::string_view s);

struct SolverConfig {
  SolverMethod method = SolverMethod::irls;
  int max_iters = 200;
  /// Relative change of the objective below which a run counts as converged.
  double tol = 1e-10;
  /// Ridge lambda; when empty, 1e-8 tr(X'WX) / p at the starting weights.
  std::optional<double> ridge;
  int restarts = 1;
  std::uint64_t seed = 0;

  // Gradient ascent.
  double step0 = 1.0;
  double backtrack = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 60;

  // Maximum consensus search (uniform gain).
  int consensus_samples = 2000;

  /// Sup bound of the fitted model; 1.2 max|y| when empty.
  std::optional<double> M;
  /// Clip predictions to [-M, M]. Applied to the returned model only, never
  /// during optimisation.
  bool clip = false;

  /// Sigma continuation: start at anneal_from and shrink by anneal_factor,
  /// running anneal_stage_iters iterations per stage, before the final fit.
  std::optional<double> anneal_from;
  double anneal_factor = 0.5;
  int anneal_stage_iters = 10;

  void validate() const;
};

struct FitReport {
  HypothesisModel model;
  double empirical_gain = 0.0;
  double sigma = 0.0;
  int iterations = 0;
  /// Empirical gain after every iterate of the final sigma stage of the kept run.
  std::vector<double> gain_trace;
  /// Final empirical gain of every restart, in restart order.
  std::vector<double> restart_gains;
  bool converged = false;
  int best_restart = 0;
  double ridge = 0.0;
  /// Clipping is never active during the fit; true when the returned model clips.
  bool clipped_at_evaluation = false;
  std::vector<std::string> notes;
};

/// (1/n) sum_i p_sigma(y_i - f(x_i)).
double empirical_gain(const HypothesisModel& model, const Dataset& data, const GainSpec& spec, double sigma);

/// Gradient of empirical_gain with respect to the coefficients (clipping ignored).
Eigen::VectorXd gain_gradient(const HypothesisModel& model, const Dataset& data, const GainSpec& spec,
                              double sigma);

FitReport fit_egm(const Dataset& data, const GainSpec& spec, double sigma, const FeatureMap& map,
                  const SolverConfig& cfg);

enum class Schedule { theta1, theta2 };
Schedule parse_schedule(std::string_view s);
std::string_view to_string(Schedule s) noexcept;

/// The exponent theta such that sigma = n^theta.
double schedule_exponent(Schedule variant, double epsilon, double q);
double sigma_schedule(Schedule variant, double epsilon, double q, std::size_t n);

struct CvRow {
  double value = 0.0;
  double mean_gain = 0.0;
  std::vector<double> fold_gains;
};

struct CvResult {
  double best = 0.0;
  std::vector<CvRow> table;
};

/// k-fold split by a seeded shuffle; position i of the shuffle goes to fold i mod k.
std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, int folds, std::uint64_t seed);

/// Mean held-out empirical gain per sigma (held-out data scored at the same
/// sigma); the argmax wins, ties go to the largest sigma.
CvResult cross_validate_sigma(const Dataset& data, const GainSpec& spec, const std::vector<double>& sigma_grid,
                              const FeatureMap& map, const SolverConfig& cfg, int folds, std::uint64_t seed);

/// Kernel bandwidth selection at a fixed sigma; each training fold gets its
/// own dictionary. Ties go to the largest bandwidth.
CvResult cross_validate_bandwidth(const Dataset& data, const GainSpec& spec, double sigma,
                                  const std::vector<double>& bandwidth_grid, const SolverConfig& cfg, int folds,
                                  std::uint64_t seed, std::size_t center_cap = 500);

}  // namespace egm
