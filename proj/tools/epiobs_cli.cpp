// Command-line front end: simulate, rank, observe, fit, fim, case-study.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "epiobs/data/datasets.hpp"
#include "epiobs/data/io.hpp"
#include "epiobs/error.hpp"
#include "epiobs/estimation/estimation.hpp"
#include "epiobs/observability/rank.hpp"
#include "epiobs/observers/observers.hpp"
#include "epiobs/zoo/zoo.hpp"

namespace fs = std::filesystem;
using namespace epiobs;
using nlohmann::json;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitError = 3;

struct Globals {
  std::uint64_t seed{1};
  double tol_rel{1e-10};
  double tol_abs{1e-12};
  std::string out;

  [[nodiscard]] IntegratorOptions integrator() const { return {tol_rel, tol_abs}; }

  /// --out when given, else <EPIOBS_OUT_DIR or .>/<fallback>.
  [[nodiscard]] std::string output_path(const std::string& fallback) const {
    if (!out.empty()) return out;
    const char* dir = std::getenv("EPIOBS_OUT_DIR");
    const fs::path base = dir && *dir ? fs::path(dir) : fs::path(".");
    fs::create_directories(base);
    return (base / fallback).string();
  }
};

std::size_t index_of(const std::vector<std::string>& names, const std::string& name, const std::string& what) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  std::string known;
  for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
  throw UsageError("unknown " + what + " '" + name + "' (known: " + known + ")");
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

/// name=value overrides applied to the default parameter vector.
Vector apply_param_overrides(const ZooEntry& e, const std::vector<std::string>& overrides) {
  Vector theta = e.default_params;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw UsageError("--param expects name=value, got '" + o + "'");
    const auto k = index_of(e.spec.param_names, o.substr(0, eq), "parameter");
    try {
      theta[static_cast<Eigen::Index>(k)] = std::stod(o.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--param " + o + ": value is not a number");
    }
  }
  return theta;
}

/**
 * Guess file:
 *   {"params": {"beta": 2.0, "gamma": 0.5}, "fixed": {"N": 763}, "x0": {"S": 762, "I": 1},
 *    "estimate_x0": ["S", "I"], "lower": {"beta": 0}, "upper": {"gamma": 10}}
 * Keys of "params" are estimated; everything else is held at the given or default value.
 */
FitProblem problem_from_guess(const ZooEntry& e, const json& g) {
  FitProblem p{e.spec, e.default_params, e.default_x0, {}, {}, {}};
  const auto& pn = e.spec.param_names;
  const auto& sn = e.spec.state_names;
  try {
    if (!g.contains("params") || !g["params"].is_object() || g["params"].empty())
      throw UsageError("guess: 'params' must be a non-empty object of estimated parameters");
    for (auto it = g["params"].begin(); it != g["params"].end(); ++it) {
      const auto k = index_of(pn, it.key(), "parameter");
      p.theta[static_cast<Eigen::Index>(k)] = it.value().get<double>();
      p.free.params.push_back(k);
    }
    if (g.contains("fixed"))
      for (auto it = g["fixed"].begin(); it != g["fixed"].end(); ++it)
        p.theta[static_cast<Eigen::Index>(index_of(pn, it.key(), "parameter"))] = it.value().get<double>();
    if (g.contains("x0"))
      for (auto it = g["x0"].begin(); it != g["x0"].end(); ++it)
        p.x0[static_cast<Eigen::Index>(index_of(sn, it.key(), "state"))] = it.value().get<double>();
    if (g.contains("estimate_x0"))
      for (const auto& s : g["estimate_x0"]) p.free.states.push_back(index_of(sn, s.get<std::string>(), "state"));
    const auto q = static_cast<Eigen::Index>(p.free.size());
    const auto bound = [&](const char* key, double def) {
      Vector b = Vector::Constant(q, def);
      if (!g.contains(key)) return b;
      for (auto it = g[key].begin(); it != g[key].end(); ++it) {
        bool found = false;
        for (std::size_t j = 0; j < p.free.params.size(); ++j)
          if (pn[p.free.params[j]] == it.key()) {
            b[static_cast<Eigen::Index>(j)] = it.value().get<double>();
            found = true;
          }
        for (std::size_t j = 0; j < p.free.states.size(); ++j)
          if (sn[p.free.states[j]] == it.key()) {
            b[static_cast<Eigen::Index>(p.free.params.size() + j)] = it.value().get<double>();
            found = true;
          }
        if (!found) throw UsageError(std::string("guess: '") + key + "' names a quantity that is not estimated: " +
                                     it.key());
      }
      return b;
    };
    p.lower = bound("lower", 0.0);
    p.upper = bound("upper", std::numeric_limits<double>::infinity());
  } catch (const json::exception& ex) {
    throw UsageError(std::string("guess: ") + ex.what());
  }
  return p;
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

int run_simulate(const Globals& g, const std::string& model, const std::vector<std::string>& params,
                 const std::vector<double>& x0, double t_end, double step, const std::string& noise,
                 double amplitude) {
  auto e = zoo_by_id(model, g.seed);
  e = with_params(e, apply_param_overrides(e, params), g.seed);
  Vector x = e.default_x0;
  if (!x0.empty()) {
    if (x0.size() != e.spec.n_states) throw UsageError("--x0 needs " + std::to_string(e.spec.n_states) + " values");
    x = to_vector(x0);
  }
  const double T = t_end > 0.0 ? t_end : (e.horizon > 0.0 ? e.horizon : 10.0);
  if (!(step > 0.0)) throw UsageError("--step must be positive");
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(T / step)));
  auto traj = integrate(e.spec, x, e.default_params, uniform_grid(0.0, T, n), g.integrator());
  const NoiseSpec spec{parse_noise_kind(noise), amplitude, step, false};
  if (!spec.exact()) apply_noise(traj.y, spec, g.seed);
  const auto path = g.output_path("simulate-" + model + ".csv");
  emit_plot_data(traj, e.spec, path);
  print_json({{"model", model},
              {"file", path},
              {"samples", traj.size()},
              {"params", to_json(e.default_params)},
              {"param_names", e.spec.param_names},
              {"x0", to_json(x)},
              {"noise", noise},
              {"amplitude", amplitude},
              {"seed", g.seed}});
  return 0;
}

int run_rank(const Globals& g, const std::string& model, bool augment, const std::vector<std::string>& unknown,
             std::size_t points, std::optional<std::size_t> order) {
  const auto e = zoo_by_id(model, g.seed);
  OrcOptions o;
  o.augment = augment || !unknown.empty();
  for (const auto& u : unknown) o.unknown_params.push_back(index_of(e.spec.param_names, u, "parameter"));
  o.order = order;
  const auto s = sampled_orc(e, {{e.default_x0, e.default_params}}, o, points, g.seed);
  json j = to_json(s);
  j["model"] = model;
  j["augmented"] = o.augment;
  j["seed"] = g.seed;
  if (e.linear_form) {
    const auto lin = linear_observability(e.linear_form->A, e.linear_form->C);
    j["linear"] = {{"observable", lin.full_rank}, {"rank", lin.numerical_rank}};
    if (!lin.full_rank) j["linear"]["detectability"] = to_string(detectability_linear(e.linear_form->A, e.linear_form->C).verdict);
  }
  if (!g.out.empty()) write_json(j, g.out);
  print_json(j);
  return 0;
}

int run_observe(const Globals& g, const std::string& family, const std::string& noise, double amplitude, bool round,
                double sample_step, double horizon) {
  const auto fam = parse_family(family);
  auto cfg = default_observer_config(fam, g.seed);
  cfg.integrator = g.integrator();
  if (horizon > 0.0) cfg.horizon = horizon;
  const NoiseSpec spec{parse_noise_kind(noise), amplitude, sample_step, round};
  const auto run = simulate_with_noise(cfg, spec, g.seed);
  const auto path = g.output_path("observe-" + to_string(fam) + ".csv");
  emit_plot_data(run, path);
  json j = to_json(run);
  j["file"] = path;
  j["model"] = cfg.entry.id;
  j["spectrum"] = to_json(cfg.spectrum);
  j["seed"] = g.seed;
  print_json(j);
  return 0;
}

json fit_report(const FitProblem& p, const Dataset& d, const FitResult& fit) {
  json j{{"dataset", d.id}, {"samples", d.size()}, {"dof_convention", to_string(d.dof_convention)},
         {"fit", to_json(fit)}};
  if (fit.dof >= 1.0 && fit.sigma2_hat > 0.0) {
    j["fim"] = to_json(fim_at_fit(p, d, fit));
  } else {
    j["fim"] = nullptr;
    j["fim_note"] = "no residual variance (zero residuals or no residual degrees of freedom); FIM undefined";
  }
  return j;
}

int run_fit(const Globals& g, const std::string& model, const std::string& data, const std::string& guess,
            const std::string& dof, std::size_t max_iter) {
  const auto e = zoo_by_id(model, g.seed);
  const auto p = problem_from_guess(e, read_json(guess));
  const auto d = read_dataset_csv(data, parse_dof_convention(dof));
  FitOptions o;
  o.max_iterations = max_iter;
  o.integrator = g.integrator();
  const auto fit = ols_fit(p, d, o);
  json j = fit_report(p, d, fit);
  j["model"] = model;
  if (!g.out.empty()) write_json(j, g.out);
  print_json(j);
  return fit.converged ? 0 : kExitFail;
}

int run_fim(const Globals& g, const std::string& model, const std::string& data, const std::string& point,
            const std::string& dof) {
  const auto e = zoo_by_id(model, g.seed);
  const auto p = problem_from_guess(e, read_json(point));
  const auto d = read_dataset_csv(data, parse_dof_convention(dof));
  FitResult at;
  at.theta_hat = p.theta;
  at.x0_hat = p.x0;
  at.estimate.resize(static_cast<Eigen::Index>(p.free.size()));
  Eigen::Index c = 0;
  for (auto k : p.free.params) {
    at.estimate[c++] = p.theta[static_cast<Eigen::Index>(k)];
    at.names.push_back(e.spec.param_names[k]);
  }
  for (auto k : p.free.states) {
    at.estimate[c++] = p.x0[static_cast<Eigen::Index>(k)];
    at.names.push_back(e.spec.state_names[k] + "0");
  }
  at.residuals = fit_residuals(e.spec, p.theta, p.x0, d, g.integrator());
  at.sse = at.residuals.squaredNorm();
  at.dof = residual_dof(d, e.spec.n_states, p.free.size());
  at.sigma2_hat = at.sse / at.dof;
  at.converged = true;
  at.stop_reason = "evaluated at the given point";
  json j = fit_report(p, d, at);
  j["model"] = model;
  if (!g.out.empty()) write_json(j, g.out);
  print_json(j);
  return 0;
}

int run_case(const Globals& g, const std::string& id) {
  const auto cs = case_study(id);
  const auto report = run_case_study(id);
  const fs::path dir = !g.out.empty() ? fs::path(g.out) : fs::path(g.output_path(""));
  fs::create_directories(dir);
  const auto json_path = (dir / ("case-study-" + id + ".json")).string();
  const auto csv_path = (dir / ("case-study-" + id + "-curve.csv")).string();
  write_json(report.to_json(), json_path);
  emit_case_study_curve(cs, report.fit, csv_path);
  for (const auto& c : report.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << " (expected " << c.expected << ", "
              << c.rule << ")\n";
  std::cout << (report.pass ? "PASS" : "FAIL") << " case-study " << id << "\nreport: " << json_path
            << "\ncurve: " << csv_path << '\n';
  return report.pass ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Observers and identifiability for epidemic ODE models"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->default_val(1);
  app.add_option("--tol-rel", g.tol_rel, "Integrator relative tolerance")->default_val(1e-10);
  app.add_option("--tol-abs", g.tol_abs, "Integrator absolute tolerance")->default_val(1e-12);
  app.add_option("--out", g.out, "Output file (directory for case-study); default: $EPIOBS_OUT_DIR or .");

  std::string model, data, guess, noise = "none", dof = "known-x0", family, case_id;
  std::vector<std::string> params, unknown;
  std::vector<double> x0;
  double t_end = 0.0, step = 0.1, amplitude = 0.0, sample_step = 1.0, horizon = 0.0;
  bool augment = false, round = false;
  std::size_t points = 20, max_iter = 400;
  std::optional<std::size_t> order;

  auto* sim = app.add_subcommand("simulate", "Integrate a zoo model and write t, states, outputs as CSV");
  sim->add_option("--model", model, "Model id")->required();
  sim->add_option("--param", params, "Parameter override name=value (repeatable)");
  sim->add_option("--x0", x0, "Initial state")->delimiter(',');
  sim->add_option("--t-end", t_end, "Final time (default: model horizon)");
  sim->add_option("--step", step, "Output spacing")->default_val(0.1);
  sim->add_option("--noise", noise, "none|uniform|gaussian|counting")->default_val("none");
  sim->add_option("--amplitude", amplitude, "Noise amplitude")->default_val(0.0);

  auto* rank = app.add_subcommand("rank", "Observability rank condition at sampled admissible points");
  rank->add_option("--model", model, "Model id")->required();
  rank->add_flag("--augment", augment, "Treat parameters as constant states");
  rank->add_option("--unknown", unknown, "Unknown parameter names (implies --augment)");
  rank->add_option("--points", points, "Random admissible points")->default_val(20);
  rank->add_option("--order", order, "Highest Lie derivative order");

  auto* obs = app.add_subcommand("observe", "Run an observer family on its reference scenario");
  obs->add_option("--family", family, "luenberger|malaria|reduced-order|high-gain")->required();
  obs->add_option("--noise", noise, "none|uniform|gaussian|counting")->default_val("none");
  obs->add_option("--amplitude", amplitude, "Noise amplitude")->default_val(0.0);
  obs->add_flag("--round", round, "Round measurements to integers");
  obs->add_option("--sample-step", sample_step, "Measurement spacing")->default_val(1.0);
  obs->add_option("--horizon", horizon, "Override the scenario horizon");

  auto* fit = app.add_subcommand("fit", "Ordinary least-squares fit with FIM and confidence intervals");
  fit->add_option("--model", model, "Model id")->required();
  fit->add_option("--data", data, "CSV with t and y (or y1, y2, ...)")->required();
  fit->add_option("--guess", guess, "JSON initial guess")->required();
  fit->add_option("--dof-convention", dof, "known-x0|estimated-x0")->default_val("known-x0");
  fit->add_option("--max-iter", max_iter, "Iteration budget")->default_val(400);

  auto* fimc = app.add_subcommand("fim", "Fisher information and intervals at a given point");
  fimc->add_option("--model", model, "Model id")->required();
  fimc->add_option("--data", data, "CSV with t and y (or y1, y2, ...)")->required();
  fimc->add_option("--guess", guess, "JSON point (same schema as fit --guess)")->required();
  fimc->add_option("--dof-convention", dof, "known-x0|estimated-x0")->default_val("known-x0");

  auto* cs = app.add_subcommand("case-study", "Reproduce a published fit and self-check it");
  cs->add_option("id", case_id, "boarding-school|bombay")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) return run_simulate(g, model, params, x0, t_end, step, noise, amplitude);
    if (*rank) return run_rank(g, model, augment, unknown, points, order);
    if (*obs) return run_observe(g, family, noise, amplitude, round, sample_step, horizon);
    if (*fit) return run_fit(g, model, data, guess, dof, max_iter);
    if (*fimc) return run_fim(g, model, data, guess, dof);
    if (*cs) return run_case(g, case_id);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}
