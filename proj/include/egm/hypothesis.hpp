#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include "json.hpp"

namespace egm {

enum class FeatureKind { linear_with_intercept, kernel_dictionary };

/// Features [x_0, ..., x_{d-1}, 1] or Gaussian bumps exp(-|x - c_j|^2 / (2 h^2)).
class FeatureMap {
 public:
  static FeatureMap linear(int input_dim);
  /// One center per row; throws InvalidParameter for no centers or h <= 0.
  static FeatureMap kernel(Eigen::MatrixXd centers, double bandwidth);
  /// Kernel map centred on the rows of `inputs`, subsampled uniformly without
  /// replacement down to `cap` rows when there are more.
  static FeatureMap kernel_on(const Eigen::MatrixXd& inputs, double bandwidth, std::size_t cap = 500,
                              std::uint64_t seed = 0);

  FeatureKind kind() const noexcept { return kind_; }
  int input_dim() const noexcept { return input_dim_; }
  const Eigen::MatrixXd& centers() const noexcept { return centers_; }
  double bandwidth() const noexcept { return bandwidth_; }
  Eigen::Index feature_count() const noexcept;

  /// phi(x) for one input (any vector-like of length input_dim).
  Eigen::VectorXd features(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  FeatureMap() = default;
  FeatureKind kind_ = FeatureKind::linear_with_intercept;
  int input_dim_ = 1;
  Eigen::MatrixXd centers_;
  double bandwidth_ = 0.0;
};

/// n x p matrix of features, one input per row of `inputs`.
Eigen::MatrixXd design_matrix(const FeatureMap& map, const Eigen::MatrixXd& inputs);

struct HypothesisModel {
  FeatureMap map = FeatureMap::linear(1);
  Eigen::VectorXd coefficients;
  double M = 1.0;
  bool clip = false;

  /// Throws InvalidParameter when the coefficient length or M is inconsistent.
  void validate() const;
};

double predict(const HypothesisModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Predictions for every row of `inputs`.
Eigen::VectorXd predict_all(const HypothesisModel& model, const Eigen::MatrixXd& inputs);

nlohmann::json model_to_json(const HypothesisModel& model);
HypothesisModel model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const HypothesisModel& model);
HypothesisModel load_model(const std::string& path);

}  // namespace egm
