#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "patchdrift/asymptotics.hpp"
#include "patchdrift/csv.hpp"
#include "patchdrift/dispersal.hpp"
#include "patchdrift/errors.hpp"
#include "patchdrift/ideal_free.hpp"
#include "patchdrift/landscape.hpp"
#include "patchdrift/multiscale.hpp"
#include "patchdrift/sde.hpp"
#include "patchdrift/twopatch.hpp"
#include "patchdrift/version.hpp"

namespace patchdrift {

using json = nlohmann::json;

namespace cfgdetail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, path + ": " + msg);
}

inline const json& require(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) fail(path, std::string("missing required field '") + key + "'");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

inline std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline Vec vector_field(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Mat matrix_field(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected an array of rows");
  const std::size_t n = j.size();
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const json& row = j[i];
    if (!row.is_array() || row.size() != n) fail(path, "expected a square matrix");
    for (std::size_t k = 0; k < n; ++k)
      m(i, k) = number(row[k], path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
  }
  return m;
}

inline json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json mat_to_json(const Mat& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j2 = 0; j2 < m.cols(); ++j2) row.push_back(m(i, j2));
    a.push_back(row);
  }
  return a;
}

}  // namespace cfgdetail

// A scenario: one model, one task, and the grids the task runs over.
struct ScenarioConfig {
  std::string name;
  std::string task;
  json model;  // normalized model block
  std::vector<double> deltas;
  std::vector<double> density_deltas;
  std::vector<double> rhos;
  std::vector<std::string> methods;
  SimConfig sim;

  json normalized() const {
    json j;
    j["name"] = name;
    j["task"] = task;
    j["model"] = model;
    if (!deltas.empty()) j["deltas"] = deltas;
    if (!density_deltas.empty()) j["density_deltas"] = density_deltas;
    if (!rhos.empty()) j["rhos"] = rhos;
    if (!methods.empty()) j["methods"] = methods;
    j["sim"] = {
        {"dt", sim.dt},
        {"horizon", sim.horizon},
        {"burn_in", sim.burn_in},
        {"replicates", sim.replicates},
        {"segments", sim.segments},
        {"seed", sim.seed},
        {"scheme", sim.scheme == Scheme::Fraction ? "fraction" : "log_abundance"},
        {"path_stride", sim.path_stride},
    };
    return j;
  }
};

// Everything the tasks need, constructed once from the model block.
struct BuiltModel {
  explicit BuiltModel(Landscape l) : landscape(std::move(l)) {}

  Landscape landscape;
  std::optional<DispersalMatrix> dispersal;  // unit-rate generator
  bool quadrature_ok = false;
  bool exchangeable = false;
  double sigma2 = 0.0;
  double rho = 0.0;
  bool levins = false;
  std::optional<MultiScaleSpec> multiscale;
  std::optional<int> circle_mode;
  double circle_c = 0.0;
  double circle_sigma2 = 0.0;

  TwoPatchParams two_patch(double delta) const {
    const Mat& q = dispersal->q();
    TwoPatchParams p;
    p.mu1 = landscape.mu()[0];
    p.mu2 = landscape.mu()[1];
    p.s1sq = landscape.sigma()(0, 0);
    p.s2sq = landscape.sigma()(1, 1);
    p.d12 = delta * q(0, 1);
    p.d21 = delta * q(1, 0);
    return p;
  }
};

namespace cfgdetail {

struct SigmaResult {
  Mat matrix;
  json normalized;
  bool exchangeable = false;
  double sigma2 = 0.0, rho = 0.0;
};

inline SigmaResult parse_sigma(const json& j, int n, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  std::string kind = text(require(j, "kind", path), path + ".kind");
  SigmaResult out;
  if (kind == "exchangeable") {
    double sigma2 = number(require(j, "sigma2", path), path + ".sigma2");
    double rho = j.contains("rho") ? number(j["rho"], path + ".rho") : 0.0;
    out.matrix = build_exchangeable_sigma(n, sigma2, rho);
    out.normalized = {{"kind", "exchangeable"}, {"sigma2", sigma2}, {"rho", rho}};
    out.exchangeable = true;
    out.sigma2 = sigma2;
    out.rho = rho;
  } else if (kind == "diagonal") {
    Vec v = vector_field(require(j, "variances", path), path + ".variances");
    if (v.size() != n) fail(path + ".variances", "length must equal the patch count");
    out.matrix = v.asDiagonal();
    out.normalized = {{"kind", "diagonal"}, {"variances", vec_to_json(v)}};
  } else if (kind == "explicit") {
    Mat m = matrix_field(require(j, "matrix", path), path + ".matrix");
    if (m.rows() != n) fail(path + ".matrix", "dimension must equal the patch count");
    out.matrix = m;
    out.normalized = {{"kind", "explicit"}, {"matrix", mat_to_json(m)}};
  } else {
    fail(path + ".kind", "unknown covariance kind '" + kind + "'");
  }
  return out;
}

inline Vec parse_mu(const json& j, int n, const std::string& path) {
  if (j.is_number()) return Vec::Constant(n, j.get<double>());
  Vec v = vector_field(j, path);
  if (v.size() != n) fail(path, "length must equal the patch count");
  return v;
}

}  // namespace cfgdetail

inline BuiltModel build_model(const json& model, json& normalized) {
  using namespace cfgdetail;
  const std::string path = "model";
  if (!model.is_object()) fail(path, "expected an object");
  std::string kind = text(require(model, "kind", path), path + ".kind");

  if (kind == "levins" || kind == "two_rate" || kind == "resampler" || kind == "explicit") {
    Mat q;
    json norm{{"kind", kind}};
    int n = 0;
    if (kind == "levins") {
      n = integer(require(model, "n", path), path + ".n");
      q = build_levins(n).q();
      norm["n"] = n;
    } else if (kind == "two_rate") {
      n = integer(require(model, "n", path), path + ".n");
      const json& fp = require(model, "fast_patches", path);
      std::vector<int> fast;
      for (std::size_t i = 0; i < fp.size(); ++i)
        fast.push_back(integer(fp[i], path + ".fast_patches[" + std::to_string(i) + "]"));
      double slow = number(require(model, "slow_rate", path), path + ".slow_rate");
      double fastr = number(require(model, "fast_rate", path), path + ".fast_rate");
      q = build_two_rate_dispersal(n, fast, slow, fastr).q();
      norm["n"] = n;
      norm["fast_patches"] = fast;
      norm["slow_rate"] = slow;
      norm["fast_rate"] = fastr;
    } else if (kind == "resampler") {
      Vec pi = vector_field(require(model, "pi", path), path + ".pi");
      n = static_cast<int>(pi.size());
      q = build_resampling_dispersal(pi).q();
      norm["pi"] = vec_to_json(pi);
    } else {
      q = matrix_field(require(model, "q", path), path + ".q");
      n = static_cast<int>(q.rows());
      norm["q"] = mat_to_json(q);
    }

    Vec mu = parse_mu(require(model, "mu", path), n, path + ".mu");
    SigmaResult sig = parse_sigma(require(model, "sigma", path), n, path + ".sigma");
    norm["mu"] = vec_to_json(mu);
    norm["sigma"] = sig.normalized;
    normalized = norm;

    BuiltModel built(Landscape(mu, sig.matrix));
    built.dispersal = validate_dispersal(q);
    built.exchangeable = sig.exchangeable;
    built.sigma2 = sig.sigma2;
    built.rho = sig.rho;
    built.levins = kind == "levins";
    bool diagonal = true;
    for (int i = 0; i < n && diagonal; ++i)
      for (int j2 = 0; j2 < n; ++j2)
        if (i != j2 && sig.matrix(i, j2) != 0.0) {
          diagonal = false;
          break;
        }
    built.quadrature_ok = n == 2 && diagonal && q(0, 1) > 0.0 && q(1, 0) > 0.0;
    return built;
  }

  if (kind == "circle") {
    int n = integer(require(model, "n", path), path + ".n");
    double rate = model.contains("rate") ? number(model["rate"], path + ".rate") : 0.5;
    double sigma2 = number(require(model, "sigma2", path), path + ".sigma2");
    double mu_mean = number(require(model, "mu_mean", path), path + ".mu_mean");
    double amp = number(require(model, "mu_amplitude", path), path + ".mu_amplitude");
    int mode = integer(require(model, "mode", path), path + ".mode");
    if (mode < 1 || 2 * mode >= n) fail(path + ".mode", "must satisfy 1 <= mode < n/2");

    CyclicProductGroup group({n});
    Mat q = class_function_matrix<Mat>(group, ring_rate_function(n, rate));
    Vec mu = cosine_mu(n, mu_mean, amp, mode);
    Mat sigma = build_exchangeable_sigma(n, sigma2, 0.0);

    normalized = {{"kind", "circle"},      {"n", n},       {"rate", rate},
                  {"sigma2", sigma2},      {"mu_mean", mu_mean},
                  {"mu_amplitude", amp},   {"mode", mode}};

    BuiltModel built(Landscape(mu, sigma));
    built.dispersal = validate_dispersal(q);
    built.circle_mode = mode;
    built.circle_c = amp;
    built.circle_sigma2 = sigma2;
    return built;
  }

  if (kind == "multiscale") {
    const json& fj = require(model, "factors", path);
    std::vector<int> factors;
    for (std::size_t i = 0; i < fj.size(); ++i)
      factors.push_back(integer(fj[i], path + ".factors[" + std::to_string(i) + "]"));
    CyclicProductGroup group(factors);
    const json& qj = require(model, "q", path);
    const json& sj = require(model, "s", path);
    std::vector<double> qv, sv;
    for (std::size_t i = 0; i < qj.size(); ++i)
      qv.push_back(number(qj[i], path + ".q[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < sj.size(); ++i)
      sv.push_back(number(sj[i], path + ".s[" + std::to_string(i) + "]"));
    Vec mu = parse_mu(require(model, "mu", path), group.order(), path + ".mu");

    MultiScaleSpec spec = MultiScaleSpec::create(group, qv, sv, mu);
    auto [dispersal, sigma] = expand_multiscale(spec);

    normalized = {{"kind", "multiscale"}, {"factors", factors}, {"q", qv}, {"s", sv},
                  {"mu", cfgdetail::vec_to_json(mu)}};

    BuiltModel built(Landscape(mu, sigma));
    built.dispersal = std::move(dispersal);
    built.multiscale = std::move(spec);
    return built;
  }

  fail(path + ".kind", "unknown model kind '" + kind + "'");
}

inline ScenarioConfig parse_scenario(const json& j) {
  using namespace cfgdetail;
  if (!j.is_object()) fail("config", "expected a JSON object");
  ScenarioConfig cfg;
  cfg.name = text(require(j, "name", "config"), "name");
  cfg.task = text(require(j, "task", "config"), "task");
  const std::vector<std::string> tasks{"simulate", "sweep", "density",
                                       "ideal_free", "asymptote", "compare"};
  if (std::find(tasks.begin(), tasks.end(), cfg.task) == tasks.end())
    fail("task", "unknown task '" + cfg.task + "'");

  json model_norm;
  build_model(require(j, "model", "config"), model_norm);  // validation pass
  cfg.model = model_norm;

  auto parse_grid = [&](const json& g, const std::string& path) {
    std::vector<double> out;
    if (g.is_array()) {
      for (std::size_t i = 0; i < g.size(); ++i)
        out.push_back(number(g[i], path + "[" + std::to_string(i) + "]"));
    } else if (g.is_object()) {
      double lo = number(require(g, "min", path), path + ".min");
      double hi = number(require(g, "max", path), path + ".max");
      int points = integer(require(g, "points", path), path + ".points");
      std::string spacing =
          g.contains("spacing") ? text(g["spacing"], path + ".spacing") : "log";
      if (points < 2) fail(path + ".points", "need at least two points");
      if (spacing != "log" && spacing != "linear") fail(path + ".spacing", "log or linear");
      for (int i = 0; i < points; ++i) {
        double t = static_cast<double>(i) / (points - 1);
        out.push_back(spacing == "log" ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo));
      }
    } else {
      fail(path, "expected an array or a {min,max,points} object");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!(out[i] > 0.0)) fail(path, "grid values must be strictly positive");
      if (i > 0 && !(out[i] > out[i - 1])) fail(path, "grid must be strictly increasing");
    }
    return out;
  };

  if (j.contains("deltas")) cfg.deltas = parse_grid(j["deltas"], "deltas");
  if (j.contains("density_deltas"))
    cfg.density_deltas = parse_grid(j["density_deltas"], "density_deltas");
  if (j.contains("rhos")) {
    for (std::size_t i = 0; i < j["rhos"].size(); ++i)
      cfg.rhos.push_back(number(j["rhos"][i], "rhos[" + std::to_string(i) + "]"));
  }
  if (j.contains("methods")) {
    for (std::size_t i = 0; i < j["methods"].size(); ++i)
      cfg.methods.push_back(text(j["methods"][i], "methods[" + std::to_string(i) + "]"));
  }

  if (j.contains("sim")) {
    const json& s = j["sim"];
    if (s.contains("dt")) cfg.sim.dt = number(s["dt"], "sim.dt");
    if (s.contains("horizon")) cfg.sim.horizon = number(s["horizon"], "sim.horizon");
    if (s.contains("burn_in")) cfg.sim.burn_in = number(s["burn_in"], "sim.burn_in");
    if (s.contains("replicates")) cfg.sim.replicates = integer(s["replicates"], "sim.replicates");
    if (s.contains("segments")) cfg.sim.segments = integer(s["segments"], "sim.segments");
    if (s.contains("seed")) cfg.sim.seed = s["seed"].get<std::uint64_t>();
    if (s.contains("path_stride")) cfg.sim.path_stride = integer(s["path_stride"], "sim.path_stride");
    if (s.contains("scheme")) {
      std::string sch = text(s["scheme"], "sim.scheme");
      if (sch == "log_abundance") cfg.sim.scheme = Scheme::LogAbundance;
      else if (sch == "fraction") cfg.sim.scheme = Scheme::Fraction;
      else fail("sim.scheme", "log_abundance or fraction");
    }
    try {
      cfg.sim.validate();
    } catch (const Error& e) {
      fail("sim", e.what());
    }
  }

  bool needs_deltas = cfg.task == "sweep" || cfg.task == "compare" ||
                      cfg.task == "asymptote" || cfg.task == "simulate";
  if (needs_deltas && cfg.deltas.empty()) fail("deltas", "task '" + cfg.task + "' needs a grid");
  if (cfg.task == "density" && cfg.density_deltas.empty())
    fail("density_deltas", "density task needs at least one value");
  return cfg;
}

struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

struct RunOutcome {
  std::vector<std::string> files;
  json verdicts;  // compare task only
  bool all_pass = true;
};

namespace rundetail {

struct NamedEstimate {
  std::string name;
  GrowthEstimate est;
  bool identity_family = false;  // analytic expansions that must agree to round-off
};

inline json estimate_json(const GrowthEstimate& e) {
  return {{"chi", e.chi}, {"std_error", e.std_error}, {"method", method_name(e.method)},
          {"segments", e.segments}};
}

// Estimates applicable to one model at one delta.
inline std::vector<NamedEstimate> gather_estimates(const BuiltModel& m,
                                                   const ScenarioConfig& cfg, double delta,
                                                   int threads,
                                                   const std::optional<HighDispersalExpansion>& exp) {
  auto wanted = [&](const std::string& name) {
    return cfg.methods.empty() ||
           std::find(cfg.methods.begin(), cfg.methods.end(), name) != cfg.methods.end();
  };
  std::vector<NamedEstimate> out;
  const Mat d = delta * m.dispersal->q();

  if (m.landscape.n() == 1) {
    if (wanted("analytic")) {
      double chi = m.landscape.mu()[0] - 0.5 * m.landscape.sigma()(0, 0);
      out.push_back({"analytic", GrowthEstimate{chi, 0.0, Method::limit, 0}, false});
    }
    if (wanted("mc")) {
      GrowthEstimate mc = estimate_chi_mc(m.landscape, d, cfg.sim, threads);
      out.push_back({"mc_logS", mc, false});
    }
    return out;
  }

  if (wanted("mc") || wanted("moments")) {
    McBundle bundle = mc_bundle(m.landscape, d, cfg.sim, threads);
    if (wanted("mc")) out.push_back({"mc_logS", bundle.chi, false});
    if (wanted("moments"))
      out.push_back({"mc_moments", chi_from_moments(m.landscape, bundle.moments), false});
  }
  if (m.quadrature_ok && wanted("quadrature"))
    out.push_back({"quadrature", chi_quadrature(m.two_patch(delta)), false});
  if (exp && wanted("asymptote"))
    out.push_back(
        {"asymptote", GrowthEstimate{exp->a + exp->b / delta, 0.0, Method::asymptote, 0}, true});
  if (m.multiscale) {
    if (wanted("multiscale"))
      out.push_back({"multiscale", chi_multiscale(*m.multiscale, delta), true});
    if (wanted("character"))
      out.push_back({"character", chi_character(*m.multiscale, delta), true});
    if (wanted("diagonalized"))
      out.push_back(
          {"diagonalized", chi_diagonalized(m.dispersal->q(), m.landscape, delta), true});
  }
  if (m.circle_mode && wanted("circle"))
    out.push_back({"circle",
                   chi_circle(m.landscape.n(), m.circle_sigma2, m.landscape.mu().mean(),
                              m.circle_c, *m.circle_mode, delta),
                   true});
  return out;
}

inline double pair_tolerance(const NamedEstimate& a, const NamedEstimate& b, double delta,
                             const std::optional<HighDispersalExpansion>& exp) {
  if (a.identity_family && b.identity_family) return 1e-9;
  double se = 3.0 * std::sqrt(a.est.std_error * a.est.std_error +
                              b.est.std_error * b.est.std_error);
  double truncation = 0.0;
  if (a.identity_family || b.identity_family) {
    double scale = exp ? std::abs(exp->b) : std::max(std::abs(a.est.chi), std::abs(b.est.chi));
    truncation = 4.0 * std::max(scale, 0.25) / (delta * delta);
  }
  return std::max(se + truncation, 1e-12);
}

}  // namespace rundetail

inline RunOutcome run_scenario(const json& raw, const RunOptions& opt) {
  ScenarioConfig cfg = parse_scenario(raw);
  if (opt.seed) cfg.sim.seed = *opt.seed;
  json model_norm;
  BuiltModel model = build_model(cfg.model, model_norm);
  const int threads = opt.threads;

  std::filesystem::create_directories(opt.out_dir);
  auto out_path = [&](const std::string& file) {
    return (std::filesystem::path(opt.out_dir) / file).string();
  };

  RunOutcome outcome;
  auto emit = [&](const std::string& file) { outcome.files.push_back(file); };

  std::optional<HighDispersalExpansion> expansion;
  if (model.dispersal && model.dispersal->reversible() && model.landscape.n() > 1)
    expansion = high_dispersal_expansion(*model.dispersal, model.landscape);

  const std::string base = cfg.name;

  if (cfg.task == "sweep" || cfg.task == "simulate") {
    std::vector<std::string> header{"delta"};
    bool with_mc = cfg.methods.empty() ||
                   std::find(cfg.methods.begin(), cfg.methods.end(), "mc") != cfg.methods.end();
    bool with_moments =
        model.landscape.n() > 1 &&
        (cfg.methods.empty() ||
         std::find(cfg.methods.begin(), cfg.methods.end(), "moments") != cfg.methods.end());
    bool with_quad = model.quadrature_ok &&
                     (cfg.methods.empty() || std::find(cfg.methods.begin(), cfg.methods.end(),
                                                       "quadrature") != cfg.methods.end());
    bool with_asym = expansion.has_value() &&
                     (cfg.methods.empty() || std::find(cfg.methods.begin(), cfg.methods.end(),
                                                       "asymptote") != cfg.methods.end());
    if (with_mc) {
      header.push_back("chi_mc");
      header.push_back("se_mc");
    }
    if (with_moments) {
      header.push_back("chi_moments");
      header.push_back("se_moments");
    }
    if (with_quad) header.push_back("chi_quadrature");
    if (with_asym) header.push_back("chi_asymptote");
    header.push_back("chi_limit");
    bool with_predicates = model.levins && model.exchangeable;
    if (with_predicates) {
      header.push_back("decreasing_at_high_delta");
      header.push_back("high_beats_zero");
      header.push_back("intermediate_optimal");
    }

    SelectionPredicates preds;
    if (with_predicates)
      preds = dispersal_selection_predicates(model.landscape.mu(), model.sigma2, model.rho);
    auto predicate_cells = [&](std::vector<std::string>& row) {
      if (!with_predicates) return;
      row.push_back(preds.decreasing_at_high_delta ? "1" : "0");
      row.push_back(preds.high_beats_zero ? "1" : "0");
      row.push_back(preds.intermediate_optimal_hint ? "1" : "0");
    };

    const std::size_t limit_col =
        std::find(header.begin(), header.end(), "chi_limit") - header.begin();
    auto reference_row = [&](const std::string& delta_label, double chi) {
      std::vector<std::string> row(limit_col + 1);
      row[0] = delta_label;
      row[limit_col] = format_double(chi);
      predicate_cells(row);
      return row;
    };

    CsvWriter csv(out_path(base + ".csv"));
    csv.row(header);
    csv.row(reference_row("0", chi_zero(model.landscape).chi));

    std::vector<double> grid = cfg.deltas;
    if (cfg.task == "simulate" && grid.size() > 1) grid.resize(1);
    for (double delta : grid) {
      const Mat d = delta * model.dispersal->q();
      std::vector<std::string> row{format_double(delta)};
      if (with_mc || with_moments) {
        McBundle bundle = mc_bundle(model.landscape, d, cfg.sim, threads);
        if (with_mc) {
          row.push_back(format_double(bundle.chi.chi));
          row.push_back(format_double(bundle.chi.std_error));
        }
        if (with_moments) {
          GrowthEstimate mm = chi_from_moments(model.landscape, bundle.moments);
          row.push_back(format_double(mm.chi));
          row.push_back(format_double(mm.std_error));
        }
      }
      if (with_quad)
        row.push_back(format_double(chi_quadrature(model.two_patch(delta)).chi));
      if (with_asym) row.push_back(format_double(expansion->a + expansion->b / delta));
      row.push_back("");  // chi_limit
      predicate_cells(row);
      csv.row(row);
    }

    if (model.landscape.n() > 1) {
      GrowthEstimate inf_est =
          chi_infinity(model.landscape, stationary_distribution(*model.dispersal));
      csv.row(reference_row("inf", inf_est.chi));
    }
    emit(base + ".csv");

    if (cfg.task == "simulate") {
      SimConfig path_cfg = cfg.sim;
      if (path_cfg.path_stride <= 0) {
        long total = std::lround(path_cfg.horizon / path_cfg.dt);
        path_cfg.path_stride = std::max(1l, total / 2000);
      }
      SimPath path =
          simulate_log_abundances(model.landscape, cfg.deltas.front() * model.dispersal->q(),
                                  path_cfg);
      CsvWriter pcsv(out_path(base + "_path.csv"));
      std::vector<std::string> ph{"t", "logS"};
      for (int i = 0; i < model.landscape.n(); ++i) ph.push_back("y" + std::to_string(i + 1));
      pcsv.row(ph);
      for (const auto& pt : path.points) {
        std::vector<std::string> row{format_double(pt.t), format_double(pt.log_total)};
        for (int i = 0; i < pt.y.size(); ++i) row.push_back(format_double(pt.y[i]));
        pcsv.row(row);
      }
      emit(base + "_path.csv");
    }
  }

  if ((cfg.task == "sweep" || cfg.task == "density") && !cfg.density_deltas.empty()) {
    if (!model.quadrature_ok)
      throw Error(ErrorCode::ConfigError,
                  "density grids need a two-patch model with independent noise");
    for (double delta : cfg.density_deltas) {
      StationaryDensity rho(model.two_patch(delta));
      std::string file = base + "_density_" + format_double(delta) + ".csv";
      CsvWriter dcsv(out_path(file));
      dcsv.row({"y", "rho"});
      const int grid_n = 512;
      for (int i = 1; i < grid_n; ++i) {
        double y = static_cast<double>(i) / grid_n;
        dcsv.row({format_double(y), format_double(rho(y))});
      }
      emit(file);
    }
  }

  if (cfg.task == "ideal_free") {
    std::vector<double> rhos = cfg.rhos;
    bool per_rho = !rhos.empty();
    if (per_rho && !model.exchangeable)
      throw Error(ErrorCode::ConfigError,
                  "a rho sweep needs an exchangeable covariance model");
    std::vector<std::string> header{"patch", "mu"};
    std::vector<IdealFreeSolution> sols;
    if (per_rho) {
      for (double r : rhos) {
        Mat sigma = build_exchangeable_sigma(model.landscape.n(), model.sigma2, r);
        sols.push_back(optimize(model.landscape.mu(), sigma));
        header.push_back("ystar_rho_" + format_double(r));
      }
    } else {
      sols.push_back(optimize(model.landscape.mu(), model.landscape.sigma()));
      header.push_back("ystar");
    }
    CsvWriter csv(out_path(base + ".csv"));
    csv.row(header);
    for (int i = 0; i < model.landscape.n(); ++i) {
      std::vector<std::string> row{std::to_string(i + 1),
                                   format_double(model.landscape.mu()[i])};
      for (const auto& s : sols) row.push_back(format_double(s.y_star.y[i]));
      csv.row(row);
    }
    emit(base + ".csv");

    json sol_json = json::array();
    for (std::size_t k = 0; k < sols.size(); ++k) {
      json s;
      if (per_rho) s["rho"] = rhos[k];
      s["lambda"] = sols[k].lambda;
      s["g_value"] = sols[k].g_value;
      s["kkt_residual"] = sols[k].kkt_residual;
      s["support"] = sols[k].support;
      sol_json.push_back(s);
    }
    std::ofstream sf(out_path(base + "_solutions.json"), std::ios::binary);
    sf << sol_json.dump(2) << "\n";
    emit(base + "_solutions.json");
  }

  if (cfg.task == "asymptote") {
    if (!expansion)
      throw Error(ErrorCode::ConfigError,
                  "asymptote task needs a reversible multi-patch dispersal model");
    CsvWriter csv(out_path(base + ".csv"));
    csv.row({"delta", "chi_asymptote"});
    for (double delta : cfg.deltas)
      csv.row({format_double(delta), format_double(expansion->a + expansion->b / delta)});
    emit(base + ".csv");

    json e;
    e["a"] = expansion->a;
    e["b"] = expansion->b;
    e["nu"] = cfgdetail::vec_to_json(expansion->nu);
    e["gramian_trace"] = expansion->gramian_trace;
    e["method"] = "general_reversible";
    std::ofstream ef(out_path(base + "_expansion.json"), std::ios::binary);
    ef << e.dump(2) << "\n";
    emit(base + "_expansion.json");
  }

  if (cfg.task == "compare") {
    json rows = json::array();
    bool all_pass = true;
    for (double delta : cfg.deltas) {
      auto ests = rundetail::gather_estimates(model, cfg, delta, threads, expansion);
      if (ests.size() < 2)
        throw Error(ErrorCode::ConfigError,
                    "compare task needs at least two applicable methods");
      json row;
      row["delta"] = delta;
      json methods;
      for (const auto& e : ests) methods[e.name] = rundetail::estimate_json(e.est);
      row["methods"] = methods;
      json pairs = json::array();
      for (std::size_t a = 0; a < ests.size(); ++a) {
        for (std::size_t b = a + 1; b < ests.size(); ++b) {
          double tol = rundetail::pair_tolerance(ests[a], ests[b], delta, expansion);
          double diff = std::abs(ests[a].est.chi - ests[b].est.chi);
          bool pass = diff <= tol;
          all_pass = all_pass && pass;
          pairs.push_back({{"a", ests[a].name},
                           {"b", ests[b].name},
                           {"abs_diff", diff},
                           {"tolerance", tol},
                           {"pass", pass}});
        }
      }
      row["pairs"] = pairs;
      rows.push_back(row);
    }
    json verdicts;
    verdicts["scenario"] = cfg.name;
    verdicts["results"] = rows;
    verdicts["all_pass"] = all_pass;
    outcome.verdicts = verdicts;
    outcome.all_pass = all_pass;
    std::ofstream vf(out_path(base + "_compare.json"), std::ios::binary);
    vf << verdicts.dump(2) << "\n";
    emit(base + "_compare.json");
  }

  // Manifest: provenance of every emitted file.
  json manifest;
  json normalized = cfg.normalized();
  manifest["artifact_version"] = kVersion;
  manifest["config_hash"] = fnv1a_hash(normalized.dump());
  manifest["seed"] = cfg.sim.seed;
  manifest["threads"] = resolve_threads(threads);
  manifest["normalized_config"] = normalized;
  manifest["outputs"] = outcome.files;
  std::ofstream mf(out_path(base + ".manifest.json"), std::ios::binary);
  mf << manifest.dump(2) << "\n";
  outcome.files.push_back(base + ".manifest.json");
  return outcome;
}

inline json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  return j;
}

}  // namespace patchdrift
