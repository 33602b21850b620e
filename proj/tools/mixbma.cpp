// Batch front-end: `mixbma run|oracle|simulate <config.json>`.
// Exit codes: 0 success, 1 configuration error, 2 runtime/numeric error,
// 3 oracle tolerance violation.  Diagnostics go to stderr; verbosity is
// controlled by the MIXBMA_LOG environment variable (quiet|info|debug).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixbma/analysis.hpp"
#include "mixbma/core.hpp"
#include "mixbma/lincode.hpp"
#include "mixbma/oracle.hpp"
#include "mixbma/poisgeo.hpp"
#include "mixbma/sampler.hpp"

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace mixbma;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int log_level() {
  static const int level = [] {
    const char* v = std::getenv("MIXBMA_LOG");
    if (!v) return 1;
    const std::string s(v);
    if (s == "quiet") return 0;
    if (s == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "mixbma: " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "mixbma[debug]: " << msg << "\n";
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Config {
  std::string suite;
  // exactly one data source
  std::optional<ordered_json> simulate;
  std::optional<std::string> file;
  std::optional<double> gauss_y;

  ChainConfig chain;
  double p0 = 0.5, p1 = 0.5;

  lincode::KernelSpec kernel;
  bool grid_enabled = true;
  int grid_size = 2048;
  std::optional<std::uint64_t> reconstruction_seed;
  int prediction_points = 101;
  int hist_bins = 50;

  double oracle_marginal_tol = 1e-6;
  double oracle_se_multiplier = 3.0;

  std::string output_dir;
};

const std::set<std::string> kTopKeys = {
    "suite",        "data",          "sampler",          "prior_weights",
    "kernel",       "evidence_grid", "reconstruction_seed",
    "prediction_points", "hist_bins", "oracle",          "output_dir"};

std::uint64_t get_seed(const ordered_json& j, const std::string& where) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw ConfigError(where + " seed must be an integer");
  if (j.is_number_integer() && j.get<long long>() < 0)
    throw ConfigError(where + " seed must be non-negative");
  return j.get<std::uint64_t>();
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");
  for (const auto& [key, _] : j.items())
    if (!kTopKeys.count(key))
      throw ConfigError("unknown config key: " + key);

  Config cfg;
  if (!j.contains("suite") || !j["suite"].is_string())
    throw ConfigError("config needs a string 'suite'");
  cfg.suite = j["suite"].get<std::string>();
  if (cfg.suite != "poisgeo" && cfg.suite != "lincode" &&
      cfg.suite != "gaussian_check")
    throw ConfigError("suite must be poisgeo, lincode, or gaussian_check");

  if (!j.contains("data") || !j["data"].is_object())
    throw ConfigError("config needs a 'data' object");
  const auto& data = j["data"];
  int sources = 0;
  if (data.contains("simulate")) {
    cfg.simulate = data["simulate"];
    ++sources;
  }
  if (data.contains("file")) {
    cfg.file = data["file"].get<std::string>();
    ++sources;
  }
  if (data.contains("y")) {
    cfg.gauss_y = data["y"].get<double>();
    ++sources;
  }
  if (sources != 1)
    throw ConfigError("data must have exactly one of simulate, file, y");
  if (cfg.gauss_y && cfg.suite != "gaussian_check")
    throw ConfigError("data.y applies to the gaussian_check suite only");
  if (cfg.suite == "gaussian_check" && !cfg.gauss_y)
    throw ConfigError("gaussian_check needs data.y");

  // Suite defaults; the sampler seed stays mandatory.
  if (cfg.suite == "poisgeo")
    cfg.chain = poisgeo::default_config(0);
  else if (cfg.suite == "lincode")
    cfg.chain = lincode::default_config(0);
  else
    cfg.chain = oracle::conjugate_gaussian_config(0);

  if (!j.contains("sampler") || !j["sampler"].is_object())
    throw ConfigError("config needs a 'sampler' object");
  const auto& sampler = j["sampler"];
  for (const auto& [key, _] : sampler.items())
    if (key != "iterations" && key != "burn_in" && key != "thin" &&
        key != "seed" && key != "adapt")
      throw ConfigError("unknown sampler key: " + key);
  if (!sampler.contains("seed"))
    throw ConfigError("sampler.seed is mandatory (no wall-clock seeding)");
  cfg.chain.seed = get_seed(sampler["seed"], "sampler");
  if (sampler.contains("iterations"))
    cfg.chain.iterations = sampler["iterations"].get<long>();
  if (sampler.contains("burn_in"))
    cfg.chain.burn_in = sampler["burn_in"].get<long>();
  if (sampler.contains("thin")) cfg.chain.thin = sampler["thin"].get<long>();
  if (sampler.contains("adapt")) cfg.chain.adapt = sampler["adapt"].get<bool>();
  try {
    cfg.chain.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("sampler: ") + e.what());
  }

  if (j.contains("prior_weights")) {
    const auto& w = j["prior_weights"];
    if (!w.is_array() || w.size() != 2)
      throw ConfigError("prior_weights must be a 2-element array");
    cfg.p0 = w[0].get<double>();
    cfg.p1 = w[1].get<double>();
    if (!(cfg.p0 > 0.0) || !(cfg.p1 > 0.0) ||
        std::abs(cfg.p0 + cfg.p1 - 1.0) > 1e-12)
      throw ConfigError("prior_weights must be positive and sum to 1");
  }

  if (j.contains("kernel")) {
    if (cfg.suite != "lincode")
      throw ConfigError("kernel applies to the lincode suite only");
    const auto& k = j["kernel"];
    if (k.contains("gamma")) cfg.kernel.gamma = k["gamma"].get<double>();
    if (k.contains("jitter")) cfg.kernel.jitter = k["jitter"].get<double>();
    try {
      cfg.kernel.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("kernel: ") + e.what());
    }
  }
  if (j.contains("evidence_grid")) {
    const auto& g = j["evidence_grid"];
    if (g.contains("enabled")) cfg.grid_enabled = g["enabled"].get<bool>();
    if (g.contains("size")) cfg.grid_size = g["size"].get<int>();
    if (cfg.grid_enabled && cfg.grid_size < 2)
      throw ConfigError("evidence_grid.size must be at least 2");
  }
  if (j.contains("reconstruction_seed"))
    cfg.reconstruction_seed =
        get_seed(j["reconstruction_seed"], "reconstruction");
  if (j.contains("prediction_points")) {
    cfg.prediction_points = j["prediction_points"].get<int>();
    if (cfg.prediction_points < 2)
      throw ConfigError("prediction_points must be at least 2");
  }
  if (j.contains("hist_bins")) {
    cfg.hist_bins = j["hist_bins"].get<int>();
    if (cfg.hist_bins < 1) throw ConfigError("hist_bins must be positive");
  }
  if (j.contains("oracle")) {
    const auto& o = j["oracle"];
    if (o.contains("marginal_tol"))
      cfg.oracle_marginal_tol = o["marginal_tol"].get<double>();
    if (o.contains("se_multiplier"))
      cfg.oracle_se_multiplier = o["se_multiplier"].get<double>();
  }
  if (j.contains("output_dir"))
    cfg.output_dir = j["output_dir"].get<std::string>();
  return cfg;
}

// ---------------------------------------------------------------------------
// Serialization helpers

ordered_json summary_json(const WeightedSummary& s) {
  return ordered_json{{"mean", s.mean},   {"q025", s.q025},
                      {"q50", s.q50},     {"q975", s.q975},
                      {"ess", s.ess},     {"low_ess", s.low_ess}};
}

void write_hist_csv(const fs::path& path, const std::vector<HistBin>& hist) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "bin_left,bin_right,weight\n";
  for (const auto& b : hist)
    out << fmt17(b.left) << "," << fmt17(b.right) << "," << fmt17(b.mass)
        << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_chain_csv(const fs::path& path, const Chain& chain,
                     const MixtureEnsemble& ensemble) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iter";
  for (const auto& c : ensemble.coords()) out << "," << c.sampled_label();
  for (const auto& m : ensemble.models()) out << ",loglik_" << m.name;
  out << "\n";
  for (long s = 0; s < chain.size(); ++s) {
    out << chain.iteration[static_cast<size_t>(s)];
    for (int jx = 0; jx < chain.draws.cols(); ++jx)
      out << "," << fmt17(chain.draws(s, jx));
    for (int k = 0; k < chain.per_model_loglik.cols(); ++k)
      out << "," << fmt17(chain.per_model_loglik(s, k));
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ordered_json report_json(const BmaReport& rep, const Chain& chain) {
  ordered_json j;
  j["models"] = rep.model_names;
  j["prior_weights"] = {rep.prior_weights[0], rep.prior_weights[1]};
  j["sample_size"] = rep.sample_size;
  j["seed"] = chain.seed;
  j["acceptance_rate"] = chain.acceptance_rate;
  ordered_json probs = ordered_json::array();
  ordered_json cis = ordered_json::array();
  for (int k = 0; k < rep.prob.size(); ++k) {
    probs.push_back(rep.prob[k]);
    cis.push_back({rep.prob_ci[static_cast<size_t>(k)].first,
                   rep.prob_ci[static_cast<size_t>(k)].second});
  }
  j["probabilities"] = {{"estimate", probs}, {"ci", cis}};
  ordered_json bfs = ordered_json::array();
  for (size_t k = 0; k < rep.bf.size(); ++k)
    for (size_t l = 0; l < rep.bf[k].size(); ++l) {
      if (k == l) continue;
      const auto& bf = rep.bf[k][l];
      bfs.push_back({{"numerator", rep.model_names[k]},
                     {"denominator", rep.model_names[l]},
                     {"estimate", bf.estimate},
                     {"ci", {bf.ci.first, bf.ci.second}}});
    }
  j["bayes_factors"] = bfs;
  ordered_json ess_vals = ordered_json::array();
  ordered_json ess_lbs = ordered_json::array();
  for (const auto& b : rep.bounds) {
    ess_vals.push_back(b.ess_value);
    ess_lbs.push_back(b.lower_bound);
  }
  j["ess"] = {{"values", ess_vals}, {"lower_bounds", ess_lbs}};
  ordered_json coords = ordered_json::array();
  for (const auto& c : rep.coordinates) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["bma"] = summary_json(c.bma);
    ordered_json per = ordered_json::object();
    for (size_t k = 0; k < c.per_model.size(); ++k)
      per[rep.model_names[k]] = summary_json(c.per_model[k]);
    cj["per_model"] = per;
    coords.push_back(cj);
  }
  j["coordinates"] = coords;
  j["warnings"] = rep.warnings;
  return j;
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_hists(const fs::path& dir, const BmaReport& rep) {
  for (const auto& c : rep.coordinates) {
    write_hist_csv(dir / ("hist_" + c.name + "_bma.csv"), c.bma.hist);
    for (size_t k = 0; k < c.per_model.size(); ++k)
      write_hist_csv(
          dir / ("hist_" + c.name + "_" + rep.model_names[k] + ".csv"),
          c.per_model[k].hist);
  }
}

// ---------------------------------------------------------------------------
// Data loading

poisgeo::CountData load_poisgeo_data(const Config& cfg,
                                     ordered_json* truth = nullptr) {
  if (cfg.file) {
    log_info("reading counts from " + *cfg.file);
    try {
      return poisgeo::CountData::read_file(*cfg.file);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  const auto& sim = *cfg.simulate;
  const long n = sim.contains("n") ? sim["n"].get<long>() : 10;
  const double lambda =
      sim.contains("lambda") ? sim["lambda"].get<double>() : 1.0;
  if (!sim.contains("seed"))
    throw ConfigError("data.simulate.seed is mandatory");
  const std::uint64_t seed = get_seed(sim["seed"], "data.simulate");
  if (truth)
    *truth = ordered_json{
        {"suite", "poisgeo"}, {"n", n}, {"lambda_true", lambda}, {"seed", seed}};
  log_info("simulating " + std::to_string(n) + " counts");
  return poisgeo::simulate(n, lambda, seed);
}

lincode::SimulatedLinCode load_lincode_data(const Config& cfg,
                                            ordered_json* truth = nullptr) {
  if (cfg.file) {
    log_info("reading data from " + *cfg.file);
    try {
      return {lincode::LinCodeData::read_file(*cfg.file), Eigen::VectorXd()};
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  const auto& sim = *cfg.simulate;
  const long n = sim.contains("n") ? sim["n"].get<long>() : 25;
  const double theta = sim.contains("theta") ? sim["theta"].get<double>() : 2.0;
  const double lambda =
      sim.contains("lambda") ? sim["lambda"].get<double>() : 0.1;
  const double k = sim.contains("k") ? sim["k"].get<double>() : 25.0;
  if (!sim.contains("seed"))
    throw ConfigError("data.simulate.seed is mandatory");
  const std::uint64_t seed = get_seed(sim["seed"], "data.simulate");
  if (truth)
    *truth = ordered_json{{"suite", "lincode"},
                          {"n", n},
                          {"theta_true", theta},
                          {"lambda_true", lambda},
                          {"k_true", k},
                          {"gamma", cfg.kernel.gamma},
                          {"jitter", cfg.kernel.jitter},
                          {"seed", seed}};
  log_info("simulating lincode data, n=" + std::to_string(n));
  return lincode::simulate_lincode(n, theta, lambda, k, cfg.kernel, seed);
}

// ---------------------------------------------------------------------------
// run

int run_poisgeo(const Config& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const poisgeo::CountData data = load_poisgeo_data(cfg);
  if (data.total() == 0)
    throw std::runtime_error(
        "posterior improper: S_n = 0, the mixture posterior has "
        "non-integrable mass at lambda -> 0");
  const MixtureEnsemble ensemble = poisgeo::make_ensemble(data, cfg.p0, cfg.p1);
  Eigen::VectorXd init(1);
  init[0] = std::log(poisgeo::initializers(data).first);
  const Chain chain =
      run_chain(ensemble, init, poisgeo::default_proposal(), cfg.chain);
  log_info("chain done: acceptance " + std::to_string(chain.acceptance_rate) +
           ", " + std::to_string(chain.size()) + " retained draws");
  const BmaReport rep = make_report(chain, ensemble, cfg.hist_bins);

  ordered_json j = report_json(rep, chain);
  j["suite"] = "poisgeo";
  j["s_n"] = data.total();
  j["bf01_closed_form"] = std::exp(poisgeo::log_bf01(data));
  j["bf01_estimate"] = rep.bf[0][1].estimate;
  j["bf01_ci"] = {rep.bf[0][1].ci.first, rep.bf[0][1].ci.second};
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  j["runtime_seconds"] = secs;

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_chain_csv(dir / "chain.csv", chain, ensemble);
  write_json(dir / "report.json", j);
  write_hists(dir, rep);
  log_info("outputs written to " + dir.string());
  return 0;
}

int run_gaussian(const Config& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const double y = *cfg.gauss_y;
  const MixtureEnsemble ensemble =
      oracle::make_conjugate_gaussian_ensemble(y, cfg.p0, cfg.p1);
  Eigen::VectorXd init(1);
  init[0] = 0.5 * y;
  const Chain chain = run_chain(ensemble, init,
                                oracle::conjugate_gaussian_proposal(),
                                cfg.chain);
  log_info("chain done: acceptance " + std::to_string(chain.acceptance_rate));
  const BmaReport rep = make_report(chain, ensemble, cfg.hist_bins);

  ordered_json j = report_json(rep, chain);
  j["suite"] = "gaussian_check";
  j["y"] = y;
  j["prob_m0"] = rep.prob[0];
  j["prob_m0_exact"] = oracle::conjugate_gaussian_case(y).prob_m0;
  j["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_chain_csv(dir / "chain.csv", chain, ensemble);
  write_json(dir / "report.json", j);
  write_hists(dir, rep);
  return 0;
}

void write_prediction_csv(const fs::path& path,
                          const lincode::TendencyPrediction& pred) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "x,group,mean,q025,q975\n";
  const auto rows = [&](const char* name, const lincode::TendencyBand& b) {
    if (!b.present) return;
    for (Eigen::Index i = 0; i < pred.x.size(); ++i)
      out << fmt17(pred.x[i]) << "," << name << "," << fmt17(b.mean[i]) << ","
          << fmt17(b.q025[i]) << "," << fmt17(b.q975[i]) << "\n";
  };
  rows("m0", pred.m0);
  rows("m1", pred.m1);
  rows("bma", pred.bma);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

int run_lincode(const Config& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!cfg.reconstruction_seed)
    throw ConfigError("lincode run needs reconstruction_seed");
  const lincode::SimulatedLinCode sim = load_lincode_data(cfg);
  const lincode::LinCodeCollapsed collapsed(sim.data, cfg.kernel, cfg.p0,
                                            cfg.p1, cfg.grid_size,
                                            cfg.grid_enabled);
  const MixtureEnsemble ensemble = collapsed.make_ensemble();
  const Chain chain = run_kappa_imh(collapsed, cfg.chain);
  log_info("kappa chain done: acceptance " +
           std::to_string(chain.acceptance_rate));
  const BmaReport rep = make_report(chain, ensemble, cfg.hist_bins);

  Rng recon_rng(*cfg.reconstruction_seed);
  const std::vector<lincode::ReconstructionDraw> draws =
      reconstruct(chain, collapsed, recon_rng);
  double zeta_mean = 0.0;
  for (const auto& d : draws) zeta_mean += d.zeta;
  zeta_mean /= static_cast<double>(draws.size());

  // Reconstruction summaries per quantity and group; the pooled draws are
  // the BMA posterior itself.
  const long m = static_cast<long>(draws.size());
  std::vector<long> g0, g1, all;
  for (long s = 0; s < m; ++s) {
    all.push_back(s);
    (draws[static_cast<size_t>(s)].zeta == 0 ? g0 : g1).push_back(s);
  }
  const auto values_of = [&](const std::vector<long>& group,
                             auto&& fn) {
    Eigen::VectorXd v(static_cast<long>(group.size()));
    for (size_t i = 0; i < group.size(); ++i)
      v[static_cast<long>(i)] = fn(draws[static_cast<size_t>(group[i])]);
    return v;
  };
  struct Quantity {
    const char* name;
    std::function<double(const lincode::ReconstructionDraw&)> fn;
  };
  const std::vector<Quantity> quantities = {
      {"theta", [](const auto& d) { return d.theta[0]; }},
      {"lambda", [](const auto& d) { return 1.0 / std::sqrt(d.tau); }},
      {"lambda_sq", [](const auto& d) { return 1.0 / d.tau; }},
  };
  ordered_json recon = ordered_json::object();
  std::vector<std::pair<std::string, std::vector<HistBin>>> recon_hists;
  std::vector<std::string> warnings = rep.warnings;
  for (const auto& qty : quantities) {
    ordered_json qj = ordered_json::object();
    const auto add_group = [&](const char* gname,
                               const std::vector<long>& group) {
      if (group.empty()) {
        warnings.push_back(std::string("no reconstruction draws for group ") +
                           gname + " (" + qty.name + " summary omitted)");
        return;
      }
      const Eigen::VectorXd v = values_of(group, qty.fn);
      const WeightedSummary ws = weighted_summary(
          v, Eigen::VectorXd::Ones(v.size()), cfg.hist_bins);
      qj[gname] = summary_json(ws);
      recon_hists.emplace_back(
          std::string("hist_") + qty.name + "_" + gname + ".csv", ws.hist);
    };
    add_group("bma", all);
    add_group("m0", g0);
    add_group("m1", g1);
    recon[qty.name] = qj;
  }

  const Eigen::VectorXd& x = sim.data.x();
  Eigen::VectorXd grid(cfg.prediction_points);
  const double xlo = x.minCoeff(), xhi = x.maxCoeff();
  for (int i = 0; i < cfg.prediction_points; ++i)
    grid[i] = xlo + (xhi - xlo) * i / (cfg.prediction_points - 1);
  const lincode::TendencyPrediction pred =
      predict_tendency(draws, collapsed, grid);
  for (const auto& w : pred.warnings) warnings.push_back(w);

  ordered_json j = report_json(rep, chain);
  j["suite"] = "lincode";
  j["prob_m0"] = rep.prob[0];
  j["zeta_mean"] = zeta_mean;
  j["reconstruction_seed"] = *cfg.reconstruction_seed;
  j["reconstruction"] = recon;
  j["evidence_grid"] = {{"enabled", cfg.grid_enabled},
                        {"size", cfg.grid_enabled ? cfg.grid_size : 0}};
  j["warnings"] = warnings;
  j["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_chain_csv(dir / "chain.csv", chain, ensemble);
  write_json(dir / "report.json", j);
  write_hists(dir, rep);
  for (const auto& [name, hist] : recon_hists)
    write_hist_csv(dir / name, hist);
  write_prediction_csv(dir / "prediction.csv", pred);
  log_info("outputs written to " + dir.string());
  return 0;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleRow {
  ordered_json j;
  bool pass = true;
};

OracleRow marginal_row(const std::string& name, double log_closed,
                       double log_quad, double tol) {
  OracleRow row;
  const double rel = std::abs(std::expm1(log_quad - log_closed));
  row.pass = rel < tol;
  row.j = ordered_json{{"quantity", name},
                       {"closed_form", std::exp(log_closed)},
                       {"quadrature", std::exp(log_quad)},
                       {"rel_err", rel},
                       {"tolerance", tol},
                       {"pass", row.pass}};
  return row;
}

OracleRow mc_row(const std::string& name, double exact, double estimate,
                 double se, double multiplier) {
  OracleRow row;
  const double diff = std::abs(estimate - exact);
  row.pass = diff < multiplier * se;
  row.j = ordered_json{{"quantity", name},  {"exact", exact},
                       {"mc_estimate", estimate}, {"mc_se", se},
                       {"abs_diff", diff}, {"tolerance", multiplier * se},
                       {"pass", row.pass}};
  return row;
}

// Probability estimate and its Monte-Carlo standard error for model 0.
std::pair<double, double> prob_and_se(const Chain& chain,
                                      const MixtureEnsemble& ensemble) {
  const ResponsibilityMatrix resp = responsibilities(chain, ensemble);
  const double p = resp.w.col(0).mean();
  const double var = (resp.w.col(0).array() - p).square().mean();
  return {p, std::sqrt(var / static_cast<double>(resp.rows()))};
}

int finish_oracle(const Config& cfg, ordered_json& doc,
                  const std::vector<OracleRow>& rows) {
  bool all_pass = true;
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back(r.j);
    all_pass = all_pass && r.pass;
  }
  doc["rows"] = arr;
  doc["pass"] = all_pass;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_json(dir / "oracle.json", doc);
  if (!all_pass) {
    log_info("oracle tolerances violated; see oracle.json");
    return 3;
  }
  log_info("oracle agreement confirmed");
  return 0;
}

int oracle_poisgeo(const Config& cfg) {
  const poisgeo::CountData data = load_poisgeo_data(cfg);
  if (data.total() == 0)
    throw std::runtime_error("posterior improper: S_n = 0");
  std::vector<OracleRow> rows;
  const auto q0 = oracle::quad_marginal_poisgeo(data, oracle::PoisGeoModel::pois);
  const auto q1 = oracle::quad_marginal_poisgeo(data, oracle::PoisGeoModel::geo);
  rows.push_back(marginal_row("m0", poisgeo::log_m0(data), q0.log_value,
                              cfg.oracle_marginal_tol));
  rows.push_back(marginal_row("m1", poisgeo::log_m1(data), q1.log_value,
                              cfg.oracle_marginal_tol));
  rows.push_back(marginal_row("bf01", poisgeo::log_bf01(data),
                              q0.log_value - q1.log_value,
                              cfg.oracle_marginal_tol));

  const MixtureEnsemble ensemble = poisgeo::make_ensemble(data, cfg.p0, cfg.p1);
  Eigen::VectorXd init(1);
  init[0] = std::log(poisgeo::initializers(data).first);
  const Chain chain =
      run_chain(ensemble, init, poisgeo::default_proposal(), cfg.chain);
  const auto [p_hat, se] = prob_and_se(chain, ensemble);
  const double p_quad =
      oracle::quad_posterior_prob_m0(data, cfg.p0, cfg.p1);
  rows.push_back(
      mc_row("prob_m0", p_quad, p_hat, se, cfg.oracle_se_multiplier));

  ordered_json doc;
  doc["suite"] = "poisgeo";
  doc["s_n"] = data.total();
  return finish_oracle(cfg, doc, rows);
}

int oracle_gaussian(const Config& cfg) {
  const double y = *cfg.gauss_y;
  const MixtureEnsemble ensemble =
      oracle::make_conjugate_gaussian_ensemble(y, cfg.p0, cfg.p1);
  Eigen::VectorXd init(1);
  init[0] = 0.5 * y;
  const Chain chain = run_chain(ensemble, init,
                                oracle::conjugate_gaussian_proposal(),
                                cfg.chain);
  const auto [p_hat, se] = prob_and_se(chain, ensemble);
  const oracle::ConjugateGaussian exact = oracle::conjugate_gaussian_case(y);
  std::vector<OracleRow> rows;
  rows.push_back(
      mc_row("prob_m0", exact.prob_m0, p_hat, se, cfg.oracle_se_multiplier));
  ordered_json doc;
  doc["suite"] = "gaussian_check";
  doc["y"] = y;
  return finish_oracle(cfg, doc, rows);
}

int oracle_lincode(const Config& cfg) {
  const lincode::SimulatedLinCode sim = load_lincode_data(cfg);
  const lincode::LinCodeCollapsed collapsed(sim.data, cfg.kernel, cfg.p0,
                                            cfg.p1, cfg.grid_size,
                                            cfg.grid_enabled);
  const oracle::KappaMarginal quad = oracle::quad_kappa_marginal_lincode(collapsed);
  const MixtureEnsemble ensemble = collapsed.make_ensemble();
  const Chain chain = run_kappa_imh(collapsed, cfg.chain);
  const auto [p_hat, se] = prob_and_se(chain, ensemble);
  std::vector<OracleRow> rows;
  rows.push_back(
      mc_row("prob_m0", quad.prob_m0, p_hat, se, cfg.oracle_se_multiplier));
  ordered_json doc;
  doc["suite"] = "lincode";
  doc["log_m0"] = collapsed.m0().log_m0;
  doc["log_m1_quadrature"] = quad.log_m1;
  doc["quadrature_rel_error"] = quad.rel_error;
  return finish_oracle(cfg, doc, rows);
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const Config& cfg) {
  if (!cfg.simulate)
    throw ConfigError("simulate command needs data.simulate");
  const fs::path dir(cfg.output_dir);
  if (cfg.suite == "poisgeo") {
    ordered_json truth;
    const poisgeo::CountData data = load_poisgeo_data(cfg, &truth);
    truth["s_n"] = data.total();
    fs::create_directories(dir);
    data.write_file((dir / "counts.txt").string());
    write_json(dir / "truth.json", truth);
    return 0;
  }
  if (cfg.suite == "lincode") {
    ordered_json truth;
    const lincode::SimulatedLinCode sim = load_lincode_data(cfg, &truth);
    ordered_json delta = ordered_json::array();
    for (Eigen::Index i = 0; i < sim.delta_true.size(); ++i)
      delta.push_back(sim.delta_true[i]);
    truth["delta_true"] = delta;
    fs::create_directories(dir);
    sim.data.write_file((dir / "data.csv").string());
    write_json(dir / "truth.json", truth);
    return 0;
  }
  throw ConfigError("gaussian_check has no dataset to simulate");
}

int dispatch(const std::string& command, const std::string& config_path,
             const std::string& output_dir_flag) {
  Config cfg = load_config(config_path);
  if (!output_dir_flag.empty()) cfg.output_dir = output_dir_flag;
  if (cfg.output_dir.empty())
    throw ConfigError("output_dir missing (config key or --output-dir)");

  if (command == "run") {
    if (cfg.suite == "poisgeo") return run_poisgeo(cfg);
    if (cfg.suite == "lincode") return run_lincode(cfg);
    return run_gaussian(cfg);
  }
  if (command == "oracle") {
    if (cfg.suite == "poisgeo") return oracle_poisgeo(cfg);
    if (cfg.suite == "lincode") return oracle_lincode(cfg);
    return oracle_gaussian(cfg);
  }
  return cmd_simulate(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian model averaging via the mixture-posterior estimator"};
  app.require_subcommand(1);
  std::string config_path, output_dir_flag;
  for (const char* name : {"run", "oracle", "simulate"}) {
    auto* sub = app.add_subcommand(
        name, std::string(name) == "run"
                  ? "Run a suite experiment and write chain/report outputs"
                  : (std::string(name) == "oracle"
                         ? "Compare estimators against brute-force truth"
                         : "Write a simulated dataset and its truth file"));
    sub->add_option("config", config_path, "JSON configuration file")
        ->required();
    sub->add_option("--output-dir", output_dir_flag,
                    "Override the config's output_dir");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    return dispatch(command, config_path, output_dir_flag);
  } catch (const ConfigError& e) {
    std::cerr << "mixbma: config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mixbma: error: " << e.what() << "\n";
    return 2;
  }
}
