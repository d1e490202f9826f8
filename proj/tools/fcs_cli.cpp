#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fcs/fcs.hpp"

namespace fs = std::filesystem;
using fcs::Index;
using fcs::Matrix;
using fcs::Vector;

namespace {

class ConfigError : public fcs::InvalidArgument {
 public:
  using fcs::InvalidArgument::InvalidArgument;
};

struct CliConfig {
  std::uint64_t seed = 20240101;
  int threads = 1;
  std::string out = ".";
  std::string rho = "default";
  double pve = 0.95;
  double pve_weights = 0.95;
  int bootstrap = 0;
  std::vector<std::string> methods;
  std::vector<std::string> weights;

  // simulate
  std::vector<int> scenarios{1};
  std::vector<double> censoring{0.2};
  Index n = 400;
  int reps = 100;
  Index grid_size = 101;
  std::string dgp = "table";
  bool curves = false;
  bool prediction = true;
  bool export_data = false;

  // fit / balance
  std::string treatment;
  std::string covariates;
  std::string survival;
  std::vector<std::string> binary;
};

// ---- config file -----------------------------------------------------------

using json = nlohmann::json;

template <class T>
T get_as(const json& j, const std::string& path);

template <>
double get_as<double>(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

template <>
std::int64_t get_as<std::int64_t>(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<std::int64_t>();
}

template <>
std::string get_as<std::string>(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

template <>
bool get_as<bool>(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  return j.get<bool>();
}

/// Scalar or array of scalars.
template <class T>
std::vector<T> get_list(const json& j, const std::string& path) {
  std::vector<T> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(get_as<T>(j[i], path + "[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(get_as<T>(j, path));
  }
  return out;
}

const std::set<std::string>& allowed_keys(const std::string& sub) {
  static const std::set<std::string> common{"seed", "threads", "out", "rho", "pve",
                                            "pve_weights", "method", "weights"};
  static const std::set<std::string> simulate = [] {
    std::set<std::string> s = common;
    s.insert({"scenario", "censoring", "n", "reps", "grid_size", "dgp", "curves", "prediction",
              "export_data"});
    return s;
  }();
  static const std::set<std::string> fit = [] {
    std::set<std::string> s = common;
    s.insert({"treatment", "covariates", "survival", "bootstrap"});
    return s;
  }();
  static const std::set<std::string> balance = [] {
    std::set<std::string> s = common;
    s.insert({"treatment", "covariates", "binary"});
    return s;
  }();
  if (sub == "simulate") return simulate;
  if (sub == "fit") return fit;
  return balance;
}

void apply_config_file(const std::string& path, const std::string& sub, CliConfig& c) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
  const auto& keys = allowed_keys(sub);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string field = "config." + k;
    if (!keys.count(k)) throw ConfigError(field + ": unknown key for '" + sub + "'");
    const json& v = it.value();
    if (k == "seed") {
      const auto s = get_as<std::int64_t>(v, field);
      if (s < 0) throw ConfigError(field + ": must be nonnegative");
      c.seed = std::uint64_t(s);
    } else if (k == "threads") {
      c.threads = int(get_as<std::int64_t>(v, field));
    } else if (k == "out") {
      c.out = get_as<std::string>(v, field);
    } else if (k == "rho") {
      c.rho = get_as<std::string>(v, field);
    } else if (k == "pve") {
      c.pve = get_as<double>(v, field);
    } else if (k == "pve_weights") {
      c.pve_weights = get_as<double>(v, field);
    } else if (k == "method") {
      c.methods = get_list<std::string>(v, field);
    } else if (k == "weights") {
      c.weights = get_list<std::string>(v, field);
    } else if (k == "scenario") {
      c.scenarios.clear();
      for (auto s : get_list<std::int64_t>(v, field)) c.scenarios.push_back(int(s));
    } else if (k == "censoring") {
      c.censoring = get_list<double>(v, field);
    } else if (k == "n") {
      c.n = Index(get_as<std::int64_t>(v, field));
    } else if (k == "reps") {
      c.reps = int(get_as<std::int64_t>(v, field));
    } else if (k == "grid_size") {
      c.grid_size = Index(get_as<std::int64_t>(v, field));
    } else if (k == "dgp") {
      c.dgp = get_as<std::string>(v, field);
    } else if (k == "curves") {
      c.curves = get_as<bool>(v, field);
    } else if (k == "prediction") {
      c.prediction = get_as<bool>(v, field);
    } else if (k == "export_data") {
      c.export_data = get_as<bool>(v, field);
    } else if (k == "treatment") {
      c.treatment = get_as<std::string>(v, field);
    } else if (k == "covariates") {
      c.covariates = get_as<std::string>(v, field);
    } else if (k == "survival") {
      c.survival = get_as<std::string>(v, field);
    } else if (k == "bootstrap") {
      c.bootstrap = int(get_as<std::int64_t>(v, field));
    } else if (k == "binary") {
      c.binary = get_list<std::string>(v, field);
    }
  }
}

// ---- validation ------------------------------------------------------------

fcs::RhoPreset parse_rho(const std::string& s) {
  if (s == "default") return fcs::RhoPreset::kDefault;
  if (s == "loose") return fcs::RhoPreset::kLoose;
  if (s == "tight") return fcs::RhoPreset::kTight;
  throw ConfigError("rho: expected default, loose or tight, got '" + s + "'");
}

fcs::WeightMethod parse_weight(const std::string& s) {
  if (s == "para") return fcs::WeightMethod::kParametric;
  if (s == "np") return fcs::WeightMethod::kNonparametric;
  throw ConfigError("weights: expected para or np, got '" + s + "'");
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return char(std::tolower(ch)); });
  return s;
}

fcs::CausalMethod parse_causal_method(const std::string& s) {
  const std::string m = lower(s);
  if (m == "naive") return fcs::CausalMethod::kNaive;
  if (m == "reg_adjust" || m == "regadj") return fcs::CausalMethod::kRegAdjust;
  if (m == "fipw") return fcs::CausalMethod::kFipw;
  if (m == "double_robust" || m == "dr") return fcs::CausalMethod::kDoubleRobust;
  throw ConfigError("method: expected naive, reg_adjust, fipw or double_robust, got '" + s + "'");
}

void validate_common(const CliConfig& c) {
  if (c.threads < 1) throw ConfigError("threads: must be at least 1");
  if (!(c.pve > 0.0 && c.pve <= 1.0)) throw ConfigError("pve: must lie in (0, 1]");
  if (!(c.pve_weights > 0.0 && c.pve_weights <= 1.0)) {
    throw ConfigError("pve_weights: must lie in (0, 1]");
  }
  parse_rho(c.rho);
  for (const auto& w : c.weights) parse_weight(w);
  if (c.out.empty()) throw ConfigError("out: must not be empty");
}

fcs::CausalConfig causal_config(const CliConfig& c) {
  fcs::CausalConfig cc;
  cc.pve = c.pve;
  cc.pve_weights = c.pve_weights;
  return cc;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw fcs::DataError(dir + ": cannot create output directory");
}

// ---- simulate --------------------------------------------------------------

int cmd_simulate(const CliConfig& c) {
  validate_common(c);
  if (c.reps < 2) throw ConfigError("reps: must be at least 2");
  if (c.n < 50) throw ConfigError("n: must be at least 50");
  if (c.grid_size < 2) throw ConfigError("grid_size: must be at least 2");
  if (c.dgp != "table" && c.dgp != "literal") {
    throw ConfigError("dgp: expected table or literal, got '" + c.dgp + "'");
  }
  if (c.scenarios.empty()) throw ConfigError("scenario: at least one required");
  if (c.censoring.empty()) throw ConfigError("censoring: at least one rate required");
  for (std::size_t i = 0; i < c.scenarios.size(); ++i) {
    if (c.scenarios[i] != 1 && c.scenarios[i] != 2) {
      throw ConfigError("scenario[" + std::to_string(i) + "]: must be 1 or 2");
    }
  }
  for (std::size_t i = 0; i < c.censoring.size(); ++i) {
    if (!(c.censoring[i] >= 0.0 && c.censoring[i] <= 0.9)) {
      throw ConfigError("censoring[" + std::to_string(i) + "]: must lie in [0, 0.9]");
    }
  }
  if (!c.weights.empty()) throw ConfigError("weights: not used by simulate; select estimators with --method");

  fcs::StudyOptions opt;
  opt.reps = c.reps;
  opt.threads = c.threads;
  opt.master_seed = c.seed;
  opt.causal = causal_config(c);
  opt.rho = fcs::rho_preset(parse_rho(c.rho), c.n);
  opt.prediction = c.prediction;
  opt.keep_curves = c.curves;
  if (!c.methods.empty()) {
    opt.methods.clear();
    for (std::size_t i = 0; i < c.methods.size(); ++i) {
      const auto id = fcs::estimator_from_string(c.methods[i]);
      if (!id) {
        throw ConfigError("method[" + std::to_string(i) + "]: unknown estimator '" + c.methods[i] +
                          "' (expected Naive, RegAdj, FIPW-para, FIPW-np, DR.para or DR.np)");
      }
      opt.methods.push_back(*id);
    }
  }
  const fcs::DgpParams dgp = c.dgp == "literal" ? fcs::DgpParams::literal() : fcs::DgpParams::table();
  std::vector<fcs::ScenarioConfig> settings;
  for (int s : c.scenarios) {
    for (double rate : c.censoring) {
      fcs::ScenarioConfig sc;
      sc.scenario = s;
      sc.n = c.n;
      sc.censor_target = rate;
      sc.grid_size = c.grid_size;
      sc.dgp = dgp;
      settings.push_back(sc);
    }
  }

  ensure_dir(c.out);
  if (c.export_data) {
    fcs::ScenarioConfig sc = settings.front();
    sc.seed = c.seed;
    const auto d = fcs::generate_scenario(sc);
    const std::string dir = (fs::path(c.out) / "data").string();
    ensure_dir(dir);
    fcs::io::write_text((fs::path(dir) / "treatment.csv").string(), fcs::io::functional_csv(d.treatment));
    fcs::io::write_text((fs::path(dir) / "covariates.csv").string(), fcs::io::covariate_csv(d.covariates));
    fcs::io::write_text((fs::path(dir) / "survival.csv").string(), fcs::io::survival_csv(d.survival));
  }

  const fcs::StudyResult res = fcs::run_study(settings, opt);
  fcs::io::write_text((fs::path(c.out) / "study.csv").string(), fcs::io::study_csv(res));
  fcs::io::write_text((fs::path(c.out) / "study.json").string(),
                      fcs::io::study_json(res).dump(2) + "\n");
  if (c.curves) {
    const std::string dir = (fs::path(c.out) / "curves").string();
    ensure_dir(dir);
    for (const auto& cell : res.cells) {
      std::string name = "s" + std::to_string(cell.scenario) + "_c" +
                         std::to_string(int(std::lround(cell.censor_target * 100))) + "_" +
                         fcs::to_string(cell.method) + ".csv";
      fcs::io::write_text((fs::path(dir) / name).string(),
                          fcs::io::curves_csv(res.grid, res.true_curve, cell));
    }
  }

  int empty_cells = 0;
  for (const auto& cell : res.cells) {
    if (cell.failures > 0) {
      std::cerr << "scenario " << cell.scenario << ", censoring " << cell.censor_target << ", "
                << fcs::to_string(cell.method) << ": " << cell.failures << " of "
                << cell.failures + cell.replications << " replications failed\n";
    }
    if (cell.replications == 0) ++empty_cells;
  }
  std::cout << "wrote " << res.cells.size() << " study cells to " << c.out << "\n";
  if (empty_cells > 0) {
    std::cerr << empty_cells << " cell(s) have no successful replication\n";
    return 4;
  }
  return 0;
}

// ---- fit -------------------------------------------------------------------

fcs::WeightSpec weight_spec(const CliConfig& c, Index n) {
  const std::string w = c.weights.empty() ? "np" : c.weights.front();
  if (c.weights.size() > 1) throw ConfigError("weights: fit takes a single weight method");
  if (parse_weight(w) == fcs::WeightMethod::kParametric) return fcs::WeightSpec::make_parametric();
  return fcs::WeightSpec::make_nonparametric(fcs::rho_preset(parse_rho(c.rho), n));
}

void print_fit(const fcs::FaftFit& f, const char* label) {
  std::cout << label << ": " << (f.converged ? "converged" : "not converged") << " after "
            << f.iterations << " iterations";
  if (f.cycle_detected) std::cout << " (cycle detected)";
  std::cout << "\n";
}

int cmd_fit(const CliConfig& c) {
  validate_common(c);
  if (c.treatment.empty()) throw ConfigError("treatment: path required");
  if (c.survival.empty()) throw ConfigError("survival: path required");
  if (c.methods.size() > 1) throw ConfigError("method: fit takes a single method");
  if (c.bootstrap != 0 && c.bootstrap < 50) throw ConfigError("bootstrap: use 0 or at least 50 replicates");
  const fcs::CausalMethod method = parse_causal_method(c.methods.empty() ? "fipw" : c.methods.front());

  fcs::io::LoadedData data = fcs::io::load_data(c.treatment, c.covariates, c.survival);
  const Index n = data.treatment.size();
  fcs::CausalDataset ds(data.treatment, data.covariates, *data.survival, causal_config(c));

  fcs::CausalEstimate est;
  switch (method) {
    case fcs::CausalMethod::kNaive: est = fcs::estimate_naive(ds); break;
    case fcs::CausalMethod::kRegAdjust: est = fcs::estimate_reg_adjust(ds); break;
    case fcs::CausalMethod::kFipw: est = fcs::estimate_fipw(ds, weight_spec(c, n)); break;
    case fcs::CausalMethod::kDoubleRobust:
      est = fcs::estimate_double_robust(ds, weight_spec(c, n));
      break;
  }

  if (c.bootstrap > 0) {
    const fcs::FaftOptions& fo = ds.config().faft;
    if (method == fcs::CausalMethod::kNaive || method == fcs::CausalMethod::kFipw) {
      std::optional<Vector> w;
      if (est.weights) w = est.weights->weights;
      est.fit.se = fcs::bootstrap_se(fcs::FaftDesign(ds.scores()), ds.survival(), fo, c.bootstrap,
                                     c.seed, c.threads, w);
    } else {
      est.outcome_fit->se = fcs::bootstrap_se(fcs::FaftDesign(ds.scores(), ds.covariates()),
                                              ds.survival(), fo, c.bootstrap, c.seed, c.threads);
    }
  }

  ensure_dir(c.out);
  fcs::io::json j = fcs::io::estimate_json(est, ds.basis().grid);
  j["n"] = n;
  j["components"] = ds.basis().num_components();
  j["censoring_rate"] = ds.survival().censoring_rate();
  fcs::io::write_text((fs::path(c.out) / "estimate.json").string(), j.dump(2) + "\n");
  fcs::io::write_text((fs::path(c.out) / "beta.csv").string(),
                      fcs::io::curve_csv(ds.basis().grid, est.beta_curve));

  std::cout << "method " << fcs::to_string(est.method) << ", n " << n << ", K "
            << ds.basis().num_components() << ", censoring rate "
            << ds.survival().censoring_rate() << "\n";
  if (est.outcome_fit) print_fit(*est.outcome_fit, "outcome model");
  print_fit(est.fit, "final fit");
  if (est.weights) {
    const auto& w = *est.weights;
    std::cout << "weights " << fcs::to_string(w.method) << ": min " << w.min() << ", max "
              << w.max() << ", ESS " << w.effective_sample_size() << ", max |corr| "
              << w.diagnostics.max_abs_corr << "\n";
  }
  std::cout << "wrote estimate.json and beta.csv to " << c.out << "\n";
  return 0;
}

// ---- balance ---------------------------------------------------------------

int cmd_balance(const CliConfig& c) {
  validate_common(c);
  if (c.treatment.empty()) throw ConfigError("treatment: path required");
  if (c.covariates.empty()) throw ConfigError("covariates: path required");
  if (!c.methods.empty()) throw ConfigError("method: not used by balance; choose weights with --weights");
  fcs::io::LoadedData data = fcs::io::load_data(c.treatment, c.covariates);
  const Index n = data.treatment.size();
  const Index p = data.covariates.cols();
  if (p == 0) throw fcs::DataError(c.covariates + ": no covariate columns");

  std::vector<fcs::CovariateKind> kinds(std::size_t(p), fcs::CovariateKind::kContinuous);
  for (Index l = 0; l < p; ++l) {
    const auto col = data.covariates.col(l);
    const bool zero_one = (col.array() == 0.0 || col.array() == 1.0).all();
    const bool named = std::find(c.binary.begin(), c.binary.end(),
                                 data.covariate_names[std::size_t(l)]) != c.binary.end();
    if (zero_one || named) kinds[std::size_t(l)] = fcs::CovariateKind::kBinary;
  }
  for (const auto& b : c.binary) {
    if (std::find(data.covariate_names.begin(), data.covariate_names.end(), b) ==
        data.covariate_names.end()) {
      throw ConfigError("binary: no covariate column named '" + b + "'");
    }
  }

  // Zero-variance columns cannot enter the weight models; they stay in the
  // report, flagged degenerate.
  std::vector<Index> usable;
  for (Index l = 0; l < p; ++l) {
    const auto col = data.covariates.col(l);
    if (col.maxCoeff() > col.minCoeff()) usable.push_back(l);
  }
  const Matrix zc = data.covariates.rowwise() - data.covariates.colwise().mean();

  fcs::CausalConfig cc = causal_config(c);
  const fcs::FpcaResult fp = fcs::estimate_fpca(data.treatment, cc.pve_weights);
  const Matrix a_star = fcs::standardize_scores(fp.scores, fp.basis).standardized;

  ensure_dir(c.out);
  std::ostringstream summary;
  summary << "weights,status,max_abs_corr,max_weighted_corr,min,max,ess\n";
  const auto emit = [&](const std::string& label, const fcs::WeightSet& w) {
    const fcs::BalanceReport rep = fcs::balance_diagnostics(w.weights, a_star, zc, kinds);
    fcs::io::write_text((fs::path(c.out) / ("balance_" + label + ".csv")).string(),
                        fcs::io::balance_csv(rep, data.covariate_names));
    summary << label << ",ok," << fcs::io::format_double(rep.max_abs_corr) << ','
            << fcs::io::format_double(rep.max_weighted_corr) << ','
            << fcs::io::format_double(w.min()) << ',' << fcs::io::format_double(w.max()) << ','
            << fcs::io::format_double(w.effective_sample_size()) << '\n';
    std::cout << label << ": max |corr| " << rep.max_abs_corr << ", max weighted |corr| "
              << rep.max_weighted_corr;
    if (rep.any_degenerate()) std::cout << " (degenerate columns flagged)";
    std::cout << "\n";
  };

  fcs::WeightSet unit;
  unit.weights = Vector::Ones(n);
  emit("unit", unit);

  std::vector<std::string> methods = c.weights.empty() ? std::vector<std::string>{"para", "np"} : c.weights;
  int failed = 0;
  for (const auto& m : methods) {
    try {
      if (usable.empty()) throw fcs::DataError("no covariate column has positive variance");
      const Matrix z_star =
          fcs::standardize_covariates(fcs::linalg::select_cols(zc, usable)).z_star;
      fcs::WeightSet w =
          parse_weight(m) == fcs::WeightMethod::kParametric
              ? fcs::fit_parametric_weights(a_star, z_star).second
              : fcs::fit_nonparametric_weights(a_star, z_star,
                                               fcs::rho_preset(parse_rho(c.rho), n));
      emit(m, w);
    } catch (const fcs::EstimationError& e) {
      ++failed;
      summary << m << ",failed,,,,,\n";
      std::cerr << m << " weights failed: " << e.what() << "\n";
    }
  }
  fcs::io::write_text((fs::path(c.out) / "balance_summary.csv").string(), summary.str());
  return failed > 0 ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal effect estimation for functional treatments with censored survival outcomes"};
  app.require_subcommand(1);

  CliConfig cfg;
  std::string config_path;
  // Flag values are held apart and applied over the config file afterwards.
  CliConfig flags;
  std::vector<std::string> method_flags, weight_flags, binary_flags;
  std::vector<int> scenario_flags;
  std::vector<double> censoring_flags;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON config file; flags override its values");
    s->add_option("--seed", flags.seed, "master seed");
    s->add_option("--threads", flags.threads, "worker threads");
    s->add_option("--out", flags.out, "output directory");
    s->add_option("--rho", flags.rho, "nonparametric penalty preset")
        ->check(CLI::IsMember({"default", "loose", "tight"}));
    s->add_option("--pve", flags.pve, "variance fraction for the outcome basis");
    s->add_option("--pve-weights", flags.pve_weights, "variance fraction for the weight basis");
    s->add_option("--method", method_flags, "estimator(s)")->delimiter(',');
    s->add_option("--weights", weight_flags, "weight method(s)")
        ->delimiter(',')
        ->check(CLI::IsMember({"para", "np"}));
  };

  CLI::App* sim = app.add_subcommand("simulate", "run the two-scenario simulation study");
  add_common(sim);
  sim->add_option("--scenario", scenario_flags, "scenario(s), 1 and/or 2")->delimiter(',');
  sim->add_option("--censoring", censoring_flags, "target censoring rate(s)")->delimiter(',');
  sim->add_option("--n", flags.n, "sample size per replication");
  sim->add_option("--reps", flags.reps, "replications per setting");
  sim->add_option("--grid-size", flags.grid_size, "grid points on [0, 1]");
  sim->add_option("--dgp", flags.dgp, "variance reading of the design")
      ->check(CLI::IsMember({"table", "literal"}));
  sim->add_flag("--curves", flags.curves, "write per-replication curves");
  sim->add_flag("--no-prediction", "skip the train/test prediction fits");
  sim->add_flag("--export-data", flags.export_data, "also write one dataset as CSV under data/");

  CLI::App* fit = app.add_subcommand("fit", "fit a causal estimator to CSV data");
  add_common(fit);
  fit->add_option("--treatment", flags.treatment, "curve CSV (header row = grid)");
  fit->add_option("--covariates", flags.covariates, "covariate CSV (id,<names...>)");
  fit->add_option("--survival", flags.survival, "survival CSV (id,time,status)");
  fit->add_option("--bootstrap", flags.bootstrap, "pairs bootstrap replicates");

  CLI::App* bal = app.add_subcommand("balance", "covariate balance report for weights");
  add_common(bal);
  bal->add_option("--treatment", flags.treatment, "curve CSV (header row = grid)");
  bal->add_option("--covariates", flags.covariates, "covariate CSV (id,<names...>)");
  bal->add_option("--binary", binary_flags, "covariate names to treat as binary")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (!config_path.empty()) apply_config_file(config_path, name, cfg);
    auto given = [&](const char* opt) {
      try {
        return sub->count(opt) > 0;
      } catch (const CLI::OptionNotFound&) {
        return false;
      }
    };
    if (given("--seed")) cfg.seed = flags.seed;
    if (given("--threads")) cfg.threads = flags.threads;
    if (given("--out")) cfg.out = flags.out;
    if (given("--rho")) cfg.rho = flags.rho;
    if (given("--pve")) cfg.pve = flags.pve;
    if (given("--pve-weights")) cfg.pve_weights = flags.pve_weights;
    if (given("--method")) cfg.methods = method_flags;
    if (given("--weights")) cfg.weights = weight_flags;
    if (given("--scenario")) cfg.scenarios = scenario_flags;
    if (given("--censoring")) cfg.censoring = censoring_flags;
    if (given("--n")) cfg.n = flags.n;
    if (given("--reps")) cfg.reps = flags.reps;
    if (given("--grid-size")) cfg.grid_size = flags.grid_size;
    if (given("--dgp")) cfg.dgp = flags.dgp;
    if (given("--curves")) cfg.curves = true;
    if (given("--no-prediction")) cfg.prediction = false;
    if (given("--export-data")) cfg.export_data = true;
    if (given("--treatment")) cfg.treatment = flags.treatment;
    if (given("--covariates")) cfg.covariates = flags.covariates;
    if (given("--survival")) cfg.survival = flags.survival;
    if (given("--bootstrap")) cfg.bootstrap = flags.bootstrap;
    if (given("--binary")) cfg.binary = binary_flags;

    if (name == "simulate") return cmd_simulate(cfg);
    if (name == "fit") return cmd_fit(cfg);
    return cmd_balance(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fcs::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const fcs::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const fcs::EstimationError& e) {
    std::cerr << "estimation failed: " << e.what() << "\n";
    return 4;
  }
}
