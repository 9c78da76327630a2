// egm: catalog, eval, certify, simulate, fit and the two benchmarks.
//
// Exit codes: 0 success, 1 usage error, 2 runtime or precision failure,
// 3 certification failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "egm/bench.hpp"
#include "egm/calibrate.hpp"
#include "egm/errors.hpp"
#include "egm/gains.hpp"
#include "egm/hypothesis.hpp"
#include "egm/simulate.hpp"
#include "egm/solver.hpp"

namespace {

using nlohmann::json;

constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kCertification = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes to `path`, or stdout for "-" / empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw egm::InvalidInput("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish(const std::string& path) {
    stream().flush();
    if (!stream()) throw egm::InvalidInput("write to '" + (path.empty() ? std::string("stdout") : path) + "' failed");
  }

 private:
  std::ofstream file_;
};

void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw egm::InvalidInput("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw egm::InvalidInput("write to '" + path + "' failed");
}

std::string sidecar_for(const std::string& out, const std::string& meta) {
  if (!meta.empty()) return meta;
  if (out.empty() || out == "-") return {};
  return out + ".json";
}

// ---------------------------------------------------------------------------
// Noise flags shared by simulate and bench rates.

struct NoiseFlags {
  std::string family = "gaussian";
  double sd = 1.0;
  double dof = 2.5;
  double tail_index = 2.5;
  double scale = 1.0;
  double rate = 0.1;
  double magnitude = 50.0;
  double spread = 0.0;
  std::string base = "gaussian";
  std::string json_text;

  void attach(CLI::App* app) {
    app->add_option("--noise", family, "gaussian | student_t | pareto | contaminated | toy")->capture_default_str();
    app->add_option("--noise-sd", sd, "Gaussian sd")->capture_default_str();
    app->add_option("--dof", dof, "Student-t degrees of freedom")->capture_default_str();
    app->add_option("--tail-index", tail_index, "symmetric Pareto tail index")->capture_default_str();
    app->add_option("--noise-scale", scale, "Student-t / Pareto scale")->capture_default_str();
    app->add_option("--rate", rate, "contamination rate")->capture_default_str();
    app->add_option("--magnitude", magnitude, "outlier magnitude (outliers at +-magnitude)")->capture_default_str();
    app->add_option("--spread", spread, "outlier sd around +-magnitude")->capture_default_str();
    app->add_option("--base", base, "base law of the contaminated family: gaussian | student_t | pareto")
        ->capture_default_str();
    app->add_option("--noise-json", json_text, "noise law as a JSON document (overrides the other noise flags)");
  }

  egm::NoiseSpec simple(const std::string& f) const {
    if (f == "gaussian") return egm::NoiseSpec::gaussian(sd);
    if (f == "student_t") return egm::NoiseSpec::student_t(dof, scale);
    if (f == "pareto" || f == "symmetric_pareto") return egm::NoiseSpec::symmetric_pareto(tail_index, scale);
    if (f == "toy") return egm::toy_noise();
    throw UsageError("unknown noise family '" + f + "'");
  }

  egm::NoiseSpec resolve() const {
    if (!json_text.empty()) {
      try {
        return egm::NoiseSpec::from_json(json::parse(json_text));
      } catch (const json::exception& e) {
        throw UsageError(std::string("bad --noise-json: ") + e.what());
      }
    }
    if (family == "contaminated") return egm::NoiseSpec::contaminated(simple(base), rate, magnitude, spread);
    return simple(family);
  }
};

template <class T>
void parse_list(const std::string& text, std::vector<T>& out, const char* what) {
  out.clear();
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(static_cast<T>(std::stod(tok, &used)));
      } else {
        out.push_back(static_cast<T>(std::stoull(tok, &used)));
      }
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad value '") + tok + "' in " + what);
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
}

// ---------------------------------------------------------------------------
// catalog

json gain_record(const egm::GainSpec& g) {
  json j;
  j["name"] = g.name();
  j["gain"] = g.gain_formula();
  j["loss"] = g.loss_formula();
  j["loss_name"] = g.loss_name();
  if (!g.psi_formula().empty()) j["psi"] = g.psi_formula();
  j["calibration"] = std::string(egm::to_string(g.calibration()));
  if (g.type_alpha()) {
    j["type"] = {{"alpha", g.type_alpha()->alpha}, {"c", g.type_alpha()->c}, {"exact", g.type_alpha()->exact}};
  }
  if (g.constants()) {
    const auto& k = *g.constants();
    j["constants"] = {{"L1", k.L1}, {"L2", k.L2}, {"L3", k.L3}, {"c0", k.c0}};
  }
  j["support_radius"] = g.compact() ? json(g.support_radius()) : json("inf");
  j["loss_scale"] = g.loss_scale();
  j["loss_exponent"] = g.loss_exponent();
  j["peak_value"] = g.peak_value() ? json(*g.peak_value()) : json("1/(2 sigma)");
  return j;
}

// ---------------------------------------------------------------------------
// certify

std::string opt(const std::optional<double>& v) { return v ? egm::format_real(*v) : std::string(); }

std::string estimates_text(const egm::Estimates& e) {
  std::vector<std::string> parts;
  if (e.integral) parts.push_back("integral=" + opt(e.integral));
  if (e.alpha) parts.push_back("alpha=" + opt(e.alpha));
  if (e.c) parts.push_back("c=" + opt(e.c));
  if (e.L1) parts.push_back("L1=" + opt(e.L1));
  if (e.L2) parts.push_back("L2=" + opt(e.L2));
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? ";" : "") + parts[i];
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical gain maximization: robust regression with bounded nonconvex losses"};
  app.set_config("--config", "", "TOML/INI file mirroring the flags; flags given on the command line win");
  app.require_subcommand(1);

  // catalog
  auto* cat = app.add_subcommand("catalog", "List the gain catalog with formulas and constants");
  std::string cat_out;
  std::vector<std::string> cat_extra;
  cat->add_option("-o,--out", cat_out, "output file (default stdout)");
  cat->add_option("--include", cat_extra, "extra gains to list, e.g. gtukey:2,4 or mixture:0.5@1,0.5@2");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a gain, its derivative, loss or IRLS weight");
  std::string ev_gain = "gaussian", ev_what = "gain";
  double ev_sigma = 1.0, ev_t = 0.0;
  ev->add_option("--gain", ev_gain, "gain name")->capture_default_str();
  ev->add_option("--sigma", ev_sigma, "scale")->capture_default_str();
  ev->add_option("--t", ev_t, "residual")->capture_default_str();
  ev->add_option("--what", ev_what, "gain | derivative | loss | weight")->capture_default_str();

  // certify
  auto* ce = app.add_subcommand("certify", "Numerically certify gain axioms, type, constants and sandwich bounds");
  std::vector<std::string> ce_gains;
  std::string ce_out;
  egm::QuadratureConfig quad;
  ce->add_option("--gain", ce_gains, "gain(s) to certify (default: whole catalog)");
  ce->add_option("--nodes", quad.nodes, "quadrature node budget")->capture_default_str();
  ce->add_option("--half-width", quad.half_width, "quadrature truncation in length scales")->capture_default_str();
  ce->add_option("-o,--out", ce_out, "CSV output (default stdout)");

  // simulate
  auto* si = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string si_kind = "toy", si_truth = "constant(0)", si_out, si_meta;
  std::size_t si_n = 200;
  std::uint64_t si_seed = 0;
  int si_dim = 1;
  NoiseFlags si_noise;
  si->add_option("--kind", si_kind, "toy | location")->capture_default_str();
  si->add_option("--n", si_n, "sample size")->capture_default_str();
  si->add_option("--seed", si_seed, "root seed")->capture_default_str();
  si->add_option("--truth", si_truth, "sine | linear(a,b) | constant(c)")->capture_default_str();
  si->add_option("--dim", si_dim, "input dimension (location kind)")->capture_default_str();
  si->add_option("-o,--out", si_out, "CSV output (default stdout)");
  si->add_option("--meta", si_meta, "metadata sidecar (default <out>.json)");
  si_noise.attach(si);

  // fit
  auto* fi = app.add_subcommand("fit", "Fit an EGM estimator to a CSV dataset");
  std::string fi_data, fi_gain = "gaussian", fi_map = "linear", fi_method = "auto", fi_save, fi_load, fi_resid,
                       fi_report, fi_schedule;
  std::optional<double> fi_sigma, fi_lambda, fi_M, fi_anneal;
  double fi_eps = 1.0, fi_q = 1.0, fi_bandwidth = 0.2, fi_tol = 1e-10;
  std::string fi_bw_grid;
  int fi_restarts = 1, fi_iters = 200, fi_folds = 5;
  std::uint64_t fi_seed = 0;
  bool fi_clip = false;
  fi->add_option("--data", fi_data, "input CSV (x_0,...,x_{d-1},y)")->required();
  fi->add_option("--gain", fi_gain, "gain name")->capture_default_str();
  fi->add_option("--sigma", fi_sigma, "scale parameter");
  fi->add_option("--schedule", fi_schedule, "theta1 | theta2: sigma = n^theta(epsilon, q)");
  fi->add_option("--epsilon", fi_eps, "moment exponent epsilon for --schedule")->capture_default_str();
  fi->add_option("--q", fi_q, "capacity exponent q for --schedule")->capture_default_str();
  fi->add_option("--map", fi_map, "linear | kernel")->capture_default_str();
  fi->add_option("--bandwidth", fi_bandwidth, "kernel bandwidth")->capture_default_str();
  fi->add_option("--bandwidth-grid", fi_bw_grid, "comma list; select the bandwidth by cross-validation");
  fi->add_option("--folds", fi_folds, "cross-validation folds")->capture_default_str();
  fi->add_option("--lambda", fi_lambda, "ridge lambda (default 1e-8 tr(X'WX)/p)");
  fi->add_option("--method", fi_method, "auto | irls | gradient | grid_consensus")->capture_default_str();
  fi->add_option("--restarts", fi_restarts, "random restarts")->capture_default_str();
  fi->add_option("--max-iters", fi_iters, "iterations per run")->capture_default_str();
  fi->add_option("--tol", fi_tol, "relative objective tolerance")->capture_default_str();
  fi->add_option("--anneal-from", fi_anneal, "start sigma continuation here");
  fi->add_option("--M", fi_M, "sup bound (default 1.2 max|y|)");
  fi->add_flag("--clip", fi_clip, "clip predictions of the saved model to [-M, M]");
  fi->add_option("--seed", fi_seed, "root seed")->capture_default_str();
  fi->add_option("--save", fi_save, "write the fitted model (JSON)");
  fi->add_option("--load", fi_load, "evaluate a saved model instead of fitting");
  fi->add_option("--residuals", fi_resid, "write residuals CSV");
  fi->add_option("--report", fi_report, "write the fit report (JSON, default stdout)");

  // bench
  auto* be = app.add_subcommand("bench", "Benchmark experiments");
  be->require_subcommand(1);
  auto* bt = be->add_subcommand("toy", "Mean-versus-mode toy experiment");
  egm::BenchToyConfig toy;
  std::string bt_sigmas = "0.05,10", bt_bw = "0.05,0.1,0.2,0.5,1", bt_out, bt_meta;
  bt->add_option("--n-train", toy.n_train, "training size")->capture_default_str();
  bt->add_option("--n-test", toy.n_test, "test size")->capture_default_str();
  bt->add_option("--sigmas", bt_sigmas, "comma list of sigma values")->capture_default_str();
  bt->add_option("--bandwidth-grid", bt_bw, "comma list for bandwidth CV")->capture_default_str();
  bt->add_option("--folds", toy.folds, "CV folds")->capture_default_str();
  bt->add_option("--lambda", toy.ridge, "ridge lambda")->capture_default_str();
  bt->add_option("--anneal-from", toy.anneal_from, "sigma continuation start")->capture_default_str();
  bt->add_option("--restarts", toy.restarts, "random restarts")->capture_default_str();
  bt->add_option("--seed", toy.seed, "root seed")->capture_default_str();
  bt->add_option("-o,--out", bt_out, "CSV output (default stdout)");
  bt->add_option("--meta", bt_meta, "metadata sidecar (default <out>.json)");

  auto* br = be->add_subcommand("rates", "Error decay under a sigma schedule");
  egm::BenchRatesConfig rates;
  std::string br_schedule = "theta1", br_nlist = "50,200,800,3200", br_truth = "constant(1)", br_out, br_meta;
  NoiseFlags br_noise;
  br_noise.family = "contaminated";
  br->add_option("--gain", rates.gain, "gain name")->capture_default_str();
  br->add_option("--epsilon", rates.epsilon, "moment exponent epsilon")->capture_default_str();
  br->add_option("--q", rates.q, "capacity exponent q")->capture_default_str();
  br->add_option("--schedule", br_schedule, "theta1 | theta2")->capture_default_str();
  br->add_option("--n-list", br_nlist, "increasing comma list of sample sizes")->capture_default_str();
  br->add_option("--reps", rates.reps, "repetitions per n")->capture_default_str();
  br->add_option("--truth", br_truth, "sine | linear(a,b) | constant(c)")->capture_default_str();
  br->add_option("--mc-points", rates.mc_points, "Monte Carlo inputs for the L2 error")->capture_default_str();
  br->add_option("--anneal-ratio", rates.anneal_ratio, "continuation starts at ratio * sigma (<= 1 disables)")
      ->capture_default_str();
  br->add_option("--restarts", rates.restarts, "random restarts")->capture_default_str();
  br->add_option("--seed", rates.seed, "root seed")->capture_default_str();
  br->add_option("-o,--out", br_out, "CSV output (default stdout)");
  br->add_option("--meta", br_meta, "metadata sidecar (default <out>.json)");
  br_noise.attach(br);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (cat->parsed()) {
      json doc = json::array();
      for (const auto& g : egm::catalog()) doc.push_back(gain_record(g));
      for (const auto& name : cat_extra) doc.push_back(gain_record(egm::gain_by_name(name)));
      Output out(cat_out);
      out.stream() << doc.dump(2) << '\n';
      out.finish(cat_out);
      return 0;
    }

    if (ev->parsed()) {
      const auto g = egm::gain_by_name(ev_gain);
      double v = 0.0;
      if (ev_what == "gain") {
        v = egm::eval_gain(g, ev_sigma, ev_t);
      } else if (ev_what == "derivative") {
        v = egm::eval_gain_derivative(g, ev_sigma, ev_t);
      } else if (ev_what == "loss") {
        v = egm::loss_from_gain(g, ev_sigma, ev_t);
      } else if (ev_what == "weight") {
        v = egm::irls_weight(g, ev_sigma, ev_t);
      } else {
        throw UsageError("--what must be gain, derivative, loss or weight");
      }
      std::cout << egm::format_real(v) << '\n';
      return 0;
    }

    if (ce->parsed()) {
      quad.validate();
      std::vector<egm::GainSpec> gains;
      if (ce_gains.empty()) {
        gains = egm::catalog();
      } else {
        for (const auto& n : ce_gains) gains.push_back(egm::gain_by_name(n));
      }
      Output out(ce_out);
      auto& os = out.stream();
      os << "gain,check,pass,estimated,declared,max_violation,notes\n";
      bool all = true;
      for (const auto& g : gains) {
        for (const auto& r : egm::certify_gain(g, quad)) {
          std::string notes;
          for (std::size_t i = 0; i < r.notes.size(); ++i) notes += (i ? "; " : "") + r.notes[i];
          os << csv_field(r.gain) << ',' << r.check << ',' << (r.axiom_pass ? "true" : "false") << ','
             << csv_field(estimates_text(r.estimated)) << ',' << csv_field(estimates_text(r.declared)) << ','
             << egm::format_real(r.max_violation) << ',' << csv_field(notes) << '\n';
          all = all && r.axiom_pass;
        }
      }
      out.finish(ce_out);
      return all ? 0 : kCertification;
    }

    if (si->parsed()) {
      egm::Dataset d;
      if (si_kind == "toy") {
        d = egm::gen_toy(si_n, si_seed);
      } else if (si_kind == "location") {
        d = egm::gen_location(si_n, egm::Truth::parse(si_truth), si_noise.resolve(), si_seed, si_dim);
      } else {
        throw UsageError("--kind must be toy or location");
      }
      Output out(si_out);
      egm::write_csv(out.stream(), d);
      out.finish(si_out);
      json meta = egm::dataset_metadata(d);
      meta["kind"] = si_kind;
      meta["seed"] = std::to_string(si_seed);
      const auto side = sidecar_for(si_out, si_meta);
      if (!side.empty()) write_json_file(side, meta);
      return 0;
    }

    if (fi->parsed()) {
      const egm::Dataset data = egm::load_csv(fi_data);
      const auto gain = egm::gain_by_name(fi_gain);
      json config = {{"data", fi_data}, {"gain", gain.name()}, {"map", fi_map}, {"seed", std::to_string(fi_seed)}};

      egm::HypothesisModel model;
      json report;
      if (!fi_load.empty()) {
        if (!fi_sigma) throw UsageError("--load needs --sigma to score the model");
        model = egm::load_model(fi_load);
        config["load"] = fi_load;
        config["sigma"] = *fi_sigma;
        report["empirical_gain"] = egm::empirical_gain(model, data, gain, *fi_sigma);
        report["sigma"] = *fi_sigma;
      } else {
        double sigma = 0.0;
        if (fi_sigma && !fi_schedule.empty()) throw UsageError("give either --sigma or --schedule, not both");
        if (fi_sigma) {
          sigma = *fi_sigma;
        } else if (!fi_schedule.empty()) {
          sigma = egm::sigma_schedule(egm::parse_schedule(fi_schedule), fi_eps, fi_q,
                                      static_cast<std::size_t>(data.size()));
          config["schedule"] = fi_schedule;
          config["epsilon"] = fi_eps;
          config["q"] = fi_q;
        } else {
          throw UsageError("fit needs --sigma or --schedule");
        }
        config["sigma"] = sigma;

        egm::SolverConfig sc;
        if (fi_method == "auto") {
          sc.method = gain.kind() == egm::GainKind::uniform ? egm::SolverMethod::grid_consensus
                      : gain.has_representing() && gain.calibration() != egm::Calibration::none
                          ? egm::SolverMethod::irls
                          : egm::SolverMethod::gradient;
        } else {
          sc.method = egm::parse_method(fi_method);
        }
        sc.ridge = fi_lambda;
        sc.restarts = fi_restarts;
        sc.max_iters = fi_iters;
        sc.tol = fi_tol;
        sc.seed = fi_seed;
        sc.M = fi_M;
        sc.clip = fi_clip;
        sc.anneal_from = fi_anneal;
        config["method"] = std::string(egm::to_string(sc.method));
        config["lambda"] = fi_lambda ? json(*fi_lambda) : json("default");
        config["restarts"] = fi_restarts;
        config["max_iters"] = fi_iters;
        config["tol"] = fi_tol;
        config["anneal_from"] = fi_anneal ? json(*fi_anneal) : json(nullptr);
        config["clip"] = fi_clip;

        egm::FeatureMap map = egm::FeatureMap::linear(static_cast<int>(data.dim()));
        if (fi_map == "kernel") {
          double h = fi_bandwidth;
          if (!fi_bw_grid.empty()) {
            std::vector<double> grid;
            parse_list(fi_bw_grid, grid, "--bandwidth-grid");
            const auto cv = egm::cross_validate_bandwidth(data, gain, sigma, grid, sc, fi_folds,
                                                          egm::derive_seed(fi_seed, 7));
            h = cv.best;
            json rows = json::array();
            for (const auto& r : cv.table) rows.push_back({{"bandwidth", r.value}, {"mean_gain", r.mean_gain}});
            report["bandwidth_cv"] = rows;
          }
          config["bandwidth"] = h;
          map = egm::FeatureMap::kernel_on(data.inputs, h, 500, egm::derive_seed(fi_seed, 7));
        } else if (fi_map != "linear") {
          throw UsageError("--map must be linear or kernel");
        }

        const auto fit = egm::fit_egm(data, gain, sigma, map, sc);
        model = fit.model;
        report["empirical_gain"] = fit.empirical_gain;
        report["sigma"] = fit.sigma;
        report["iterations"] = fit.iterations;
        report["converged"] = fit.converged;
        report["gain_trace"] = fit.gain_trace;
        report["restart_gains"] = fit.restart_gains;
        report["best_restart"] = fit.best_restart;
        report["ridge"] = fit.ridge;
        report["clipped_at_evaluation"] = fit.clipped_at_evaluation;
        report["notes"] = fit.notes;
      }
      report["config"] = config;
      report["model"] = egm::model_to_json(model);
      if (!fi_save.empty()) egm::save_model(fi_save, model);
      if (!fi_resid.empty()) {
        const Eigen::VectorXd f = egm::predict_all(model, data.inputs);
        std::ofstream os(fi_resid, std::ios::binary);
        if (!os) throw egm::InvalidInput("cannot open '" + fi_resid + "' for writing");
        os << "fitted,residual\n";
        for (Eigen::Index i = 0; i < data.size(); ++i) {
          os << egm::format_real(f(i)) << ',' << egm::format_real(data.outputs(i) - f(i)) << '\n';
        }
      }
      if (fi_report.empty()) {
        std::cout << report.dump(2) << '\n';
      } else {
        write_json_file(fi_report, report);
      }
      return 0;
    }

    if (bt->parsed()) {
      parse_list(bt_sigmas, toy.sigmas, "--sigmas");
      parse_list(bt_bw, toy.bandwidth_grid, "--bandwidth-grid");
      const auto res = egm::run_bench_toy(toy);
      Output out(bt_out);
      egm::write_bench_toy_csv(out.stream(), res);
      out.finish(bt_out);
      const auto side = sidecar_for(bt_out, bt_meta);
      if (!side.empty()) write_json_file(side, egm::bench_toy_metadata(res));
      return 0;
    }

    if (br->parsed()) {
      rates.schedule = egm::parse_schedule(br_schedule);
      parse_list(br_nlist, rates.n_list, "--n-list");
      rates.truth = egm::Truth::parse(br_truth);
      rates.noise = br_noise.resolve();
      const auto res = egm::run_bench_rates(rates);
      Output out(br_out);
      egm::write_bench_rates_csv(out.stream(), res);
      out.finish(br_out);
      const auto side = sidecar_for(br_out, br_meta);
      if (!side.empty()) write_json_file(side, egm::bench_rates_metadata(res));
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "egm: " << e.what() << '\n';
    return kUsage;
  } catch (const egm::InvalidParameter& e) {
    std::cerr << "egm: " << e.what() << '\n';
    return kUsage;
  } catch (const egm::CertificationFailure& e) {
    std::cerr << "egm: " << e.what() << '\n';
    return kCertification;
  } catch (const std::exception& e) {
    std::cerr << "egm: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
