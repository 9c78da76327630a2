#include "egm/simulate.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "egm/errors.hpp"

namespace egm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * kPi));
}

std::string family_name(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::gaussian_mixture: return "gaussian_mixture";
    case NoiseFamily::student_t: return "student_t";
    case NoiseFamily::symmetric_pareto: return "symmetric_pareto";
    case NoiseFamily::contaminated: return "contaminated";
  }
  return "?";
}

}  // namespace

std::string format_real(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw InvalidInput("cannot format number");
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// NoiseSpec

NoiseSpec NoiseSpec::gaussian(double sd) { return mixture({{1.0, 0.0, sd}}); }

NoiseSpec NoiseSpec::mixture(std::vector<NormalComponent> components) {
  NoiseSpec s;
  s.family_ = NoiseFamily::gaussian_mixture;
  s.components_ = std::move(components);
  s.validate();
  return s;
}

NoiseSpec NoiseSpec::student_t(double dof, double scale) {
  NoiseSpec s;
  s.family_ = NoiseFamily::student_t;
  s.dof_ = dof;
  s.scale_ = scale;
  s.validate();
  return s;
}

NoiseSpec NoiseSpec::symmetric_pareto(double tail_index, double scale) {
  NoiseSpec s;
  s.family_ = NoiseFamily::symmetric_pareto;
  s.tail_index_ = tail_index;
  s.scale_ = scale;
  s.validate();
  return s;
}

NoiseSpec NoiseSpec::contaminated(NoiseSpec base, double rate, double magnitude, double spread) {
  if (base.family() == NoiseFamily::contaminated) {
    throw InvalidParameter("contaminated noise cannot nest another contaminated law");
  }
  NoiseSpec s;
  s.family_ = NoiseFamily::contaminated;
  s.base_ = std::make_shared<const NoiseSpec>(std::move(base));
  s.rate_ = rate;
  s.magnitude_ = magnitude;
  s.spread_ = spread;
  s.validate();
  return s;
}

void NoiseSpec::validate() const {
  switch (family_) {
    case NoiseFamily::gaussian_mixture: {
      if (components_.empty()) throw InvalidParameter("gaussian mixture needs a component");
      double total = 0.0;
      for (const auto& c : components_) {
        if (!(c.weight > 0.0)) throw InvalidParameter("mixture weights must be positive");
        if (!(c.sd >= 0.0) || !std::isfinite(c.sd)) throw InvalidParameter("component sd must be >= 0");
        if (!std::isfinite(c.mean)) throw InvalidParameter("component mean must be finite");
        total += c.weight;
      }
      if (std::abs(total - 1.0) > 1e-12) throw InvalidParameter("mixture weights must sum to 1");
      break;
    }
    case NoiseFamily::student_t:
      if (!(dof_ > 1.0) || !std::isfinite(dof_)) throw InvalidParameter("student_t requires dof > 1");
      if (!(scale_ > 0.0)) throw InvalidParameter("student_t scale must be positive");
      break;
    case NoiseFamily::symmetric_pareto:
      if (!(tail_index_ > 1.0) || !std::isfinite(tail_index_)) {
        throw InvalidParameter("symmetric_pareto requires tail index > 1");
      }
      if (!(scale_ > 0.0)) throw InvalidParameter("symmetric_pareto scale must be positive");
      break;
    case NoiseFamily::contaminated:
      if (!(rate_ >= 0.0 && rate_ < 1.0)) throw InvalidParameter("contamination rate must lie in [0, 1)");
      if (!std::isfinite(magnitude_)) throw InvalidParameter("outlier magnitude must be finite");
      if (!(spread_ >= 0.0) || !std::isfinite(spread_)) throw InvalidParameter("outlier spread must be >= 0");
      break;
  }
}

double NoiseSpec::moment_bound() const noexcept {
  switch (family_) {
    case NoiseFamily::gaussian_mixture: return kInf;
    case NoiseFamily::student_t: return dof_;
    case NoiseFamily::symmetric_pareto: return tail_index_;
    case NoiseFamily::contaminated: return base_->moment_bound();
  }
  return kInf;
}

bool NoiseSpec::has_density() const noexcept {
  switch (family_) {
    case NoiseFamily::gaussian_mixture:
      for (const auto& c : components_) {
        if (c.sd == 0.0) return false;
      }
      return true;
    case NoiseFamily::contaminated:
      return base_->has_density() && (rate_ == 0.0 || spread_ > 0.0);
    default:
      return true;
  }
}

double NoiseSpec::density(double e) const {
  if (!has_density()) throw UnsupportedOperation("noise law " + describe() + " has atoms and no density");
  switch (family_) {
    case NoiseFamily::gaussian_mixture: {
      double s = 0.0;
      for (const auto& c : components_) s += c.weight * normal_pdf(e, c.mean, c.sd);
      return s;
    }
    case NoiseFamily::student_t: {
      const double nu = dof_;
      const double z = e / scale_;
      const double log_norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * kPi);
      return std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(z * z / nu)) / scale_;
    }
    case NoiseFamily::symmetric_pareto: {
      const double a = tail_index_;
      return 0.5 * a / scale_ * std::pow(1.0 + std::abs(e) / scale_, -(a + 1.0));
    }
    case NoiseFamily::contaminated: {
      double d = (1.0 - rate_) * base_->density(e);
      if (rate_ > 0.0) {
        d += rate_ * 0.5 * (normal_pdf(e, magnitude_, spread_) + normal_pdf(e, -magnitude_, spread_));
      }
      return d;
    }
  }
  return 0.0;
}

double NoiseSpec::sample(Philox& rng) const {
  switch (family_) {
    case NoiseFamily::gaussian_mixture: {
      std::size_t k = 0;
      if (components_.size() > 1) {
        const double u = rng.uniform();
        double acc = 0.0;
        k = components_.size() - 1;
        for (std::size_t j = 0; j < components_.size(); ++j) {
          acc += components_[j].weight;
          if (u < acc) {
            k = j;
            break;
          }
        }
      }
      const auto& c = components_[k];
      return c.mean + c.sd * rng.normal();
    }
    case NoiseFamily::student_t: {
      const double z = rng.normal();
      const double chi2 = 2.0 * rng.gamma(0.5 * dof_);
      return scale_ * z / std::sqrt(chi2 / dof_);
    }
    case NoiseFamily::symmetric_pareto: {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double lomax = std::pow(rng.uniform(), -1.0 / tail_index_) - 1.0;
      return sign * scale_ * lomax;
    }
    case NoiseFamily::contaminated: {
      if (rng.uniform() < rate_) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        double out = sign * magnitude_;
        if (spread_ > 0.0) out += spread_ * rng.normal();
        return out;
      }
      return base_->sample(rng);
    }
  }
  return 0.0;
}

std::vector<double> NoiseSpec::centers() const {
  switch (family_) {
    case NoiseFamily::gaussian_mixture: {
      std::vector<double> c;
      for (const auto& comp : components_) c.push_back(comp.mean);
      return c;
    }
    case NoiseFamily::contaminated: {
      auto c = base_->centers();
      if (rate_ > 0.0) {
        c.push_back(magnitude_);
        c.push_back(-magnitude_);
      }
      return c;
    }
    default:
      return {0.0};
  }
}

double NoiseSpec::length_scale() const {
  switch (family_) {
    case NoiseFamily::gaussian_mixture: {
      double s = kInf;
      for (const auto& c : components_) s = std::min(s, c.sd);
      return s;
    }
    case NoiseFamily::contaminated:
      return rate_ > 0.0 ? std::min(base_->length_scale(), spread_) : base_->length_scale();
    default:
      return scale_;
  }
}

std::string NoiseSpec::describe() const {
  std::ostringstream os;
  switch (family_) {
    case NoiseFamily::gaussian_mixture:
      os << "mixture(";
      for (std::size_t j = 0; j < components_.size(); ++j) {
        if (j) os << ", ";
        os << format_real(components_[j].weight) << "*N(" << format_real(components_[j].mean) << ", "
           << format_real(components_[j].sd) << "^2)";
      }
      os << ")";
      break;
    case NoiseFamily::student_t:
      os << "student_t(dof=" << format_real(dof_) << ", scale=" << format_real(scale_) << ")";
      break;
    case NoiseFamily::symmetric_pareto:
      os << "symmetric_pareto(a=" << format_real(tail_index_) << ", scale=" << format_real(scale_) << ")";
      break;
    case NoiseFamily::contaminated:
      os << "contaminated(" << base_->describe() << ", rate=" << format_real(rate_)
         << ", outliers=+-" << format_real(magnitude_) << ", spread=" << format_real(spread_) << ")";
      break;
  }
  return os.str();
}

nlohmann::json NoiseSpec::to_json() const {
  nlohmann::json j;
  j["family"] = family_name(family_);
  switch (family_) {
    case NoiseFamily::gaussian_mixture: {
      auto arr = nlohmann::json::array();
      for (const auto& c : components_) arr.push_back({{"weight", c.weight}, {"mean", c.mean}, {"sd", c.sd}});
      j["components"] = arr;
      break;
    }
    case NoiseFamily::student_t:
      j["dof"] = dof_;
      j["scale"] = scale_;
      break;
    case NoiseFamily::symmetric_pareto:
      j["tail_index"] = tail_index_;
      j["scale"] = scale_;
      break;
    case NoiseFamily::contaminated:
      j["base"] = base_->to_json();
      j["rate"] = rate_;
      j["magnitude"] = magnitude_;
      j["spread"] = spread_;
      break;
  }
  const double mb = moment_bound();
  j["moment_bound"] = std::isfinite(mb) ? nlohmann::json(mb) : nlohmann::json("inf");
  return j;
}

NoiseSpec NoiseSpec::from_json(const nlohmann::json& j) {
  const auto family = j.at("family").get<std::string>();
  if (family == "gaussian_mixture") {
    std::vector<NormalComponent> comps;
    for (const auto& c : j.at("components")) {
      comps.push_back({c.at("weight").get<double>(), c.at("mean").get<double>(), c.at("sd").get<double>()});
    }
    return mixture(std::move(comps));
  }
  if (family == "student_t") return student_t(j.at("dof").get<double>(), j.value("scale", 1.0));
  if (family == "symmetric_pareto") {
    return symmetric_pareto(j.at("tail_index").get<double>(), j.value("scale", 1.0));
  }
  if (family == "contaminated") {
    return contaminated(from_json(j.at("base")), j.at("rate").get<double>(), j.at("magnitude").get<double>(),
                        j.value("spread", 0.0));
  }
  throw InvalidParameter("unknown noise family '" + family + "'");
}

// ---------------------------------------------------------------------------
// Truth

double Truth::operator()(double x0) const noexcept {
  switch (kind) {
    case Kind::sine: return 2.0 * std::sin(kPi * x0);
    case Kind::linear: return a * x0 + b;
    case Kind::constant: return a;
    case Kind::toy: return 2.0 * std::sin(kPi * x0);
  }
  return 0.0;
}

std::string Truth::id() const {
  switch (kind) {
    case Kind::sine: return "sine";
    case Kind::linear: return "linear(" + format_real(a) + "," + format_real(b) + ")";
    case Kind::constant: return "constant(" + format_real(a) + ")";
    case Kind::toy: return "toy";
  }
  return "?";
}

Truth Truth::parse(const std::string& id) {
  auto args = [&](const std::string& prefix) {
    if (id.size() < prefix.size() + 2 || id.back() != ')') throw InvalidParameter("bad truth id '" + id + "'");
    std::vector<double> out;
    std::stringstream ss(id.substr(prefix.size() + 1, id.size() - prefix.size() - 2));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw InvalidParameter("bad truth id '" + id + "'");
      }
    }
    return out;
  };
  if (id == "sine") return sine();
  if (id.starts_with("linear(")) {
    const auto v = args("linear");
    if (v.size() != 2) throw InvalidParameter("linear truth needs two arguments");
    return linear(v[0], v[1]);
  }
  if (id.starts_with("constant(")) {
    const auto v = args("constant");
    if (v.size() != 1) throw InvalidParameter("constant truth needs one argument");
    return constant(v[0]);
  }
  throw InvalidParameter("unknown truth '" + id + "'");
}

// ---------------------------------------------------------------------------
// Dataset and generators

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.outputs.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
    out.outputs(static_cast<Eigen::Index>(i)) = outputs(rows[i]);
  }
  out.seed = seed;
  out.noise = noise;
  out.truth = truth;
  return out;
}

NoiseSpec toy_noise() { return NoiseSpec::mixture({{0.5, -1.0, 2.5}, {0.5, 1.0, 0.5}}); }

Dataset gen_toy(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidParameter("n must be positive");
  const NoiseSpec eps = toy_noise();
  Philox rng(seed);
  Dataset d;
  const auto rows = static_cast<Eigen::Index>(n);
  d.inputs.resize(rows, 1);
  d.outputs.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double x = rng.uniform();
    const double e = eps.sample(rng);
    d.inputs(i, 0) = x;
    d.outputs(i) = 2.0 * std::sin(kPi * x) + (1.0 + 2.0 * x) * e;
  }
  d.seed = seed;
  d.noise = eps;
  d.truth = "toy";
  return d;
}

Dataset gen_location(std::size_t n, const Truth& truth, const NoiseSpec& noise, std::uint64_t seed, int dim) {
  if (n == 0) throw InvalidParameter("n must be positive");
  if (dim < 1) throw InvalidParameter("input dimension must be positive");
  Philox rng(seed);
  Dataset d;
  const auto rows = static_cast<Eigen::Index>(n);
  d.inputs.resize(rows, dim);
  d.outputs.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int k = 0; k < dim; ++k) d.inputs(i, k) = rng.uniform();
    d.outputs(i) = truth(d.inputs(i, 0)) + noise.sample(rng);
  }
  d.seed = seed;
  d.noise = noise;
  d.truth = truth.id();
  return d;
}

std::pair<double, double> toy_references(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("toy reference defined on [0, 1] only");
  const double mean = 2.0 * std::sin(kPi * x);
  return {mean, mean + 1.0 + 2.0 * x};
}

double toy_exact_mode(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("toy reference defined on [0, 1] only");
  // The conditional law is f*(x) + kappa(x) eps, so its mode is f*(x) + kappa(x) mode(eps).
  // Golden-section search on the eps density, bracketed around the narrow component.
  const NoiseSpec eps = toy_noise();
  double lo = 0.0, hi = 2.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = eps.density(a), fb = eps.density(b);
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = eps.density(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = eps.density(a);
    }
  }
  const double mode = 0.5 * (lo + hi);
  return 2.0 * std::sin(kPi * x) + (1.0 + 2.0 * x) * mode;
}

// ---------------------------------------------------------------------------
// CSV

void write_csv(std::ostream& os, const Dataset& data) {
  for (Eigen::Index k = 0; k < data.dim(); ++k) os << "x_" << k << ',';
  os << "y\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index k = 0; k < data.dim(); ++k) os << format_real(data.inputs(i, k)) << ',';
    os << format_real(data.outputs(i)) << '\n';
  }
}

Dataset read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  if (header.size() < 2 || header.back() != "y") {
    throw InvalidInput("CSV header must be x_0,...,x_{d-1},y");
  }
  const std::size_t dim = header.size() - 1;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    for (;;) {
      const auto pos = line.find(',', start);
      const std::string_view tok(line.data() + start, (pos == std::string::npos ? line.size() : pos) - start);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw InvalidInput("bad CSV value '" + std::string(tok) + "' on data row " + std::to_string(rows + 1));
      }
      values.push_back(v);
      ++fields;
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (fields != dim + 1) throw InvalidInput("CSV row " + std::to_string(rows + 1) + " has wrong field count");
    ++rows;
  }
  Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  d.outputs.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      d.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = values[i * (dim + 1) + k];
    }
    d.outputs(static_cast<Eigen::Index>(i)) = values[i * (dim + 1) + dim];
  }
  return d;
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open '" + path + "' for writing");
  write_csv(os, data);
  if (!os) throw InvalidInput("write to '" + path + "' failed");
}

Dataset load_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open '" + path + "'");
  return read_csv(is);
}

nlohmann::json dataset_metadata(const Dataset& data) {
  nlohmann::json j;
  j["n"] = data.size();
  j["dim"] = data.dim();
  j["seed"] = data.seed ? nlohmann::json(*data.seed) : nlohmann::json(nullptr);
  j["noise"] = data.noise ? data.noise->to_json() : nlohmann::json(nullptr);
  j["truth"] = data.truth ? nlohmann::json(*data.truth) : nlohmann::json(nullptr);
  j["generator"] = "philox4x32-10";
  return j;
}

}  // namespace egm
