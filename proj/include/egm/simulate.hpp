#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "egm/rng.hpp"

namespace egm {

enum class NoiseFamily { gaussian_mixture, student_t, symmetric_pareto, contaminated };

struct NormalComponent {
  double weight = 1.0;
  double mean = 0.0;
  double sd = 1.0;
};

/// Additive noise law with a known moment ceiling.
///
/// symmetric_pareto is S * Lomax(a) with S = +-1 equiprobable, i.e. density
/// (a / 2s) (1 + |e| / s)^-(a + 1); it is symmetric, hence already centred.
/// contaminated replaces a Bernoulli(rate) fraction of base draws by
/// +-magnitude + spread * N(0, 1).
class NoiseSpec {
 public:
  static NoiseSpec gaussian(double sd = 1.0);
  static NoiseSpec mixture(std::vector<NormalComponent> components);
  static NoiseSpec student_t(double dof, double scale = 1.0);
  static NoiseSpec symmetric_pareto(double tail_index, double scale = 1.0);
  static NoiseSpec contaminated(NoiseSpec base, double rate, double magnitude, double spread = 0.0);

  NoiseFamily family() const noexcept { return family_; }
  const std::vector<NormalComponent>& components() const noexcept { return components_; }
  double dof() const noexcept { return dof_; }
  double tail_index() const noexcept { return tail_index_; }
  double scale() const noexcept { return scale_; }
  double rate() const noexcept { return rate_; }
  double magnitude() const noexcept { return magnitude_; }
  double spread() const noexcept { return spread_; }
  const NoiseSpec* base() const noexcept { return base_.get(); }

  /// Supremum of m with E|eps|^m finite (+infinity for Gaussian mixtures).
  double moment_bound() const noexcept;
  bool has_density() const noexcept;
  /// Throws UnsupportedOperation for point masses (sd = 0, spread = 0).
  double density(double e) const;
  double sample(Philox& rng) const;

  /// Points where the density concentrates, and the narrowest length scale;
  /// used to grade quadrature meshes.
  std::vector<double> centers() const;
  double length_scale() const;

  std::string describe() const;
  nlohmann::json to_json() const;
  static NoiseSpec from_json(const nlohmann::json& j);

 private:
  NoiseSpec() = default;
  void validate() const;

  NoiseFamily family_ = NoiseFamily::gaussian_mixture;
  std::vector<NormalComponent> components_;
  double dof_ = 0.0;
  double tail_index_ = 0.0;
  double scale_ = 1.0;
  double rate_ = 0.0;
  double magnitude_ = 0.0;
  double spread_ = 0.0;
  std::shared_ptr<const NoiseSpec> base_;
};

/// Regression function f* for synthetic data.
struct Truth {
  enum class Kind { sine, linear, constant, toy };
  Kind kind = Kind::constant;
  double a = 0.0;
  double b = 0.0;

  static Truth sine() { return {Kind::sine, 0.0, 0.0}; }
  static Truth linear(double slope, double intercept) { return {Kind::linear, slope, intercept}; }
  static Truth constant(double c) { return {Kind::constant, c, 0.0}; }

  /// Acts on the first input coordinate.
  double operator()(double x0) const noexcept;
  std::string id() const;
  static Truth parse(const std::string& id);
};

/// n observations (x_i, y_i); inputs are stored one observation per row.
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd outputs;
  std::optional<std::uint64_t> seed;
  std::optional<NoiseSpec> noise;
  std::optional<std::string> truth;

  Eigen::Index size() const noexcept { return outputs.size(); }
  Eigen::Index dim() const noexcept { return inputs.cols(); }
  /// Rows selected by `rows`, metadata carried over.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

/// y = 2 sin(pi x) + (1 + 2x) eps, x ~ U(0, 1),
/// eps ~ 0.5 N(-1, 2.5^2) + 0.5 N(1, 0.5^2).
Dataset gen_toy(std::size_t n, std::uint64_t seed);

/// The noise law of the toy model.
NoiseSpec toy_noise();

/// y = f*(x) + eps with x ~ U(0, 1)^dim.
Dataset gen_location(std::size_t n, const Truth& truth, const NoiseSpec& noise, std::uint64_t seed,
                     int dim = 1);

/// Conditional mean 2 sin(pi x) and approximate conditional mode
/// 2 sin(pi x) + 1 + 2x of the toy model. x must lie in [0, 1].
std::pair<double, double> toy_references(double x);

/// Exact conditional mode of the toy model by 1-D density maximisation.
double toy_exact_mode(double x);

/// CSV with header x_0,...,x_{d-1},y and '\n' line endings.
void write_csv(std::ostream& os, const Dataset& data);
Dataset read_csv(std::istream& is);
void save_csv(const std::string& path, const Dataset& data);
Dataset load_csv(const std::string& path);

/// Sidecar metadata: seed, noise spec, truth id, size.
nlohmann::json dataset_metadata(const Dataset& data);

/// Shortest round-trip decimal rendering used by every writer.
std::string format_real(double x);

}  // namespace egm
