#include "egm/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "egm/errors.hpp"
#include "egm/rng.hpp"

namespace egm {

FeatureMap FeatureMap::linear(int input_dim) {
  if (input_dim < 1) throw InvalidParameter("input dimension must be positive");
  FeatureMap m;
  m.kind_ = FeatureKind::linear_with_intercept;
  m.input_dim_ = input_dim;
  return m;
}

FeatureMap FeatureMap::kernel(Eigen::MatrixXd centers, double bandwidth) {
  if (centers.rows() < 1 || centers.cols() < 1) throw InvalidParameter("kernel map needs at least one center");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InvalidParameter("bandwidth must be positive");
  if (!centers.allFinite()) throw InvalidParameter("kernel centers must be finite");
  FeatureMap m;
  m.kind_ = FeatureKind::kernel_dictionary;
  m.input_dim_ = static_cast<int>(centers.cols());
  m.centers_ = std::move(centers);
  m.bandwidth_ = bandwidth;
  return m;
}

FeatureMap FeatureMap::kernel_on(const Eigen::MatrixXd& inputs, double bandwidth, std::size_t cap,
                                 std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(inputs.rows());
  if (cap == 0) throw InvalidParameter("center cap must be positive");
  if (n <= cap) return kernel(inputs, bandwidth);
  // Partial Fisher-Yates, then restore input order so the map does not depend on draw order.
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Philox rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  Eigen::MatrixXd c(static_cast<Eigen::Index>(cap), inputs.cols());
  for (std::size_t i = 0; i < cap; ++i) c.row(static_cast<Eigen::Index>(i)) = inputs.row(idx[i]);
  return kernel(std::move(c), bandwidth);
}

Eigen::Index FeatureMap::feature_count() const noexcept {
  return kind_ == FeatureKind::linear_with_intercept ? input_dim_ + 1 : centers_.rows();
}

Eigen::VectorXd FeatureMap::features(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_dim_) {
    throw InvalidInput("input has " + std::to_string(x.size()) + " components, expected " +
                       std::to_string(input_dim_));
  }
  Eigen::VectorXd phi(feature_count());
  if (kind_ == FeatureKind::linear_with_intercept) {
    phi.head(input_dim_) = x;
    phi(input_dim_) = 1.0;
  } else {
    const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
    for (Eigen::Index j = 0; j < centers_.rows(); ++j) {
      phi(j) = std::exp(-(centers_.row(j).transpose() - x).squaredNorm() * inv);
    }
  }
  return phi;
}

Eigen::MatrixXd design_matrix(const FeatureMap& map, const Eigen::MatrixXd& inputs) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index p = map.feature_count();
  if (n > 0 && inputs.cols() != map.input_dim()) {
    throw InvalidInput("inputs have " + std::to_string(inputs.cols()) + " columns, expected " +
                       std::to_string(map.input_dim()));
  }
  Eigen::MatrixXd X(n, p);
  if (n == 0) return X;
  if (map.kind() == FeatureKind::linear_with_intercept) {
    X.leftCols(map.input_dim()) = inputs;
    X.col(p - 1).setOnes();
    return X;
  }
  const auto& C = map.centers();
  const double inv = 1.0 / (2.0 * map.bandwidth() * map.bandwidth());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      X(i, j) = std::exp(-(inputs.row(i) - C.row(j)).squaredNorm() * inv);
    }
  }
  return X;
}

void HypothesisModel::validate() const {
  if (coefficients.size() != map.feature_count()) {
    throw InvalidParameter("model has " + std::to_string(coefficients.size()) + " coefficients for " +
                           std::to_string(map.feature_count()) + " features");
  }
  if (!(M > 0.0) || !std::isfinite(M)) throw InvalidParameter("sup bound M must be positive and finite");
}

double predict(const HypothesisModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double raw = model.map.features(x).dot(model.coefficients);
  return model.clip ? std::clamp(raw, -model.M, model.M) : raw;
}

Eigen::VectorXd predict_all(const HypothesisModel& model, const Eigen::MatrixXd& inputs) {
  Eigen::VectorXd out = design_matrix(model.map, inputs) * model.coefficients;
  if (model.clip) out = out.cwiseMax(-model.M).cwiseMin(model.M);
  return out;
}

nlohmann::json model_to_json(const HypothesisModel& model) {
  model.validate();
  nlohmann::json j;
  j["kind"] = model.map.kind() == FeatureKind::linear_with_intercept ? "linear_with_intercept" : "kernel_dictionary";
  j["input_dim"] = model.map.input_dim();
  if (model.map.kind() == FeatureKind::kernel_dictionary) {
    j["bandwidth"] = model.map.bandwidth();
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < model.map.centers().rows(); ++i) {
      rows.push_back(std::vector<double>(model.map.centers().row(i).begin(), model.map.centers().row(i).end()));
    }
    j["centers"] = rows;
  }
  j["coefficients"] = std::vector<double>(model.coefficients.begin(), model.coefficients.end());
  j["M"] = model.M;
  j["clip"] = model.clip;
  return j;
}

HypothesisModel model_from_json(const nlohmann::json& j) {
  try {
    HypothesisModel m;
    const auto kind = j.at("kind").get<std::string>();
    const int dim = j.at("input_dim").get<int>();
    if (kind == "linear_with_intercept") {
      m.map = FeatureMap::linear(dim);
    } else if (kind == "kernel_dictionary") {
      const auto& rows = j.at("centers");
      Eigen::MatrixXd c(static_cast<Eigen::Index>(rows.size()), dim);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = rows[i].get<std::vector<double>>();
        if (static_cast<int>(r.size()) != dim) throw InvalidInput("center row has the wrong length");
        for (int k = 0; k < dim; ++k) c(static_cast<Eigen::Index>(i), k) = r[static_cast<std::size_t>(k)];
      }
      m.map = FeatureMap::kernel(std::move(c), j.at("bandwidth").get<double>());
    } else {
      throw InvalidInput("unknown feature map kind '" + kind + "'");
    }
    const auto coef = j.at("coefficients").get<std::vector<double>>();
    m.coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    m.M = j.at("M").get<double>();
    m.clip = j.value("clip", false);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const std::string& path, const HypothesisModel& model) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open '" + path + "' for writing");
  os << model_to_json(model).dump(2) << '\n';
}

HypothesisModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("cannot parse '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace egm
