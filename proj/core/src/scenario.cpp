#include "sfstab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "json.hpp"
#include "sfstab/control.hpp"
#include "sfstab/errors.hpp"
#include "sfstab/parallel.hpp"

namespace sfstab {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// schema helpers

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

const json& require(const json& obj, std::string_view key, std::string_view where) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ConfigError(fmt::format("missing key '{}' in {}", key, where));
  return *it;
}

double as_number(const json& v, std::string_view what) {
  if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", what));
  return v.get<double>();
}

int as_int(const json& v, std::string_view what) {
  if (!v.is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", what));
  return v.get<int>();
}

Vector as_vector(const json& v, std::string_view what) {
  if (!v.is_array()) throw ConfigError(fmt::format("{}: expected an array of numbers", what));
  Vector out;
  for (const auto& e : v) out.push_back(as_number(e, what));
  return out;
}

AxisRange as_axis(const json& v, std::string_view what) {
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(fmt::format("{}: expected [lo, hi, n_points]", what));
  }
  const int n = as_int(v[2], what);
  if (n < 1) throw ConfigError(fmt::format("{}: n_points must be positive", what));
  return {as_number(v[0], what), as_number(v[1], what), static_cast<std::size_t>(n)};
}

json axis_json(const AxisRange& r) { return json::array({r.lo, r.hi, r.n}); }

// ---------------------------------------------------------------------------
// sections

SystemSpec parse_system(const json& j) {
  const std::string where = "system";
  if (!j.is_object()) throw ConfigError("system: expected an object");
  const std::string builtin = require(j, "builtin", where).get<std::string>();
  SystemSpec s;
  if (builtin == "planar") {
    check_keys(j, {"builtin"}, where);
    s.builtin = SystemSpec::Builtin::Planar;
  } else if (builtin == "tunnel_diode") {
    check_keys(j, {"builtin", "L", "C"}, where);
    s.builtin = SystemSpec::Builtin::TunnelDiode;
    if (j.contains("L")) s.L = as_number(j["L"], "system.L");
    if (j.contains("C")) s.C = as_number(j["C"], "system.C");
  } else if (builtin == "custom") {
    check_keys(j, {"builtin", "k", "f"}, where);
    s.builtin = SystemSpec::Builtin::Custom;
    s.k = as_int(require(j, "k", where), "system.k");
    if (s.k < 2) throw ConfigError("system.k must be >= 2");
    const json& f = require(j, "f", where);
    if (!f.is_array() || f.size() != static_cast<std::size_t>(s.k - 1)) {
      throw ConfigError(fmt::format("system.f: expected {} components", s.k - 1));
    }
    for (std::size_t c = 0; c < f.size(); ++c) {
      const std::string cw = fmt::format("system.f[{}]", c);
      if (!f[c].is_array()) throw ConfigError(cw + ": expected a list of terms");
      std::vector<PolynomialTerm> terms;
      for (const json& t : f[c]) {
        check_keys(t, {"coef", "x", "z", "eps"}, cw);
        PolynomialTerm term;
        term.coef = as_number(require(t, "coef", cw), cw + ".coef");
        term.x_powers.assign(static_cast<std::size_t>(s.k - 1), 0);
        if (t.contains("x")) {
          const json& xp = t["x"];
          if (!xp.is_array() || xp.size() > term.x_powers.size()) {
            throw ConfigError(cw + ".x: expected at most k-1 exponents");
          }
          for (std::size_t i = 0; i < xp.size(); ++i) term.x_powers[i] = as_int(xp[i], cw + ".x");
        }
        if (t.contains("z")) term.z_power = as_int(t["z"], cw + ".z");
        if (t.contains("eps")) term.eps_power = as_int(t["eps"], cw + ".eps");
        const bool negative = term.z_power < 0 || term.eps_power < 0 ||
                              std::any_of(term.x_powers.begin(), term.x_powers.end(),
                                          [](int p) { return p < 0; });
        if (negative) throw ConfigError(cw + ": exponents must be non-negative");
        terms.push_back(std::move(term));
      }
      s.f.push_back(std::move(terms));
    }
  } else {
    throw ConfigError(fmt::format("system.builtin: unknown system '{}'", builtin));
  }
  return s;
}

json system_json(const SystemSpec& s) {
  switch (s.builtin) {
    case SystemSpec::Builtin::Planar: return {{"builtin", "planar"}};
    case SystemSpec::Builtin::TunnelDiode: return {{"builtin", "tunnel_diode"}, {"L", s.L}, {"C", s.C}};
    case SystemSpec::Builtin::Custom: {
      json f = json::array();
      for (const auto& comp : s.f) {
        json terms = json::array();
        for (const auto& t : comp) {
          terms.push_back({{"coef", t.coef}, {"x", t.x_powers}, {"z", t.z_power}, {"eps", t.eps_power}});
        }
        f.push_back(std::move(terms));
      }
      return {{"builtin", "custom"}, {"k", s.k}, {"f", std::move(f)}};
    }
  }
  return {};
}

ControllerConfig parse_controller(const json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
  const std::string type = require(j, "type", where).get<std::string>();
  const std::string w(where);
  ControllerConfig c;
  if (type == "none") {
    check_keys(j, {"type"}, where);
    c.kind = ControllerConfig::Kind::None;
  } else if (type == "thm2" || type == "thm2plus3") {
    const bool plus3 = type == "thm2plus3";
    if (plus3) {
      check_keys(j, {"type", "a", "b", "c", "K", "chi_star"}, where);
    } else {
      check_keys(j, {"type", "a", "b", "c"}, where);
    }
    c.kind = plus3 ? ControllerConfig::Kind::Thm2Plus3 : ControllerConfig::Kind::Thm2;
    c.a = as_vector(require(j, "a", where), w + ".a");
    c.b = as_number(require(j, "b", where), w + ".b");
    if (j.contains("c")) c.c = as_vector(j["c"], w + ".c");
    if (plus3) {
      c.K = as_vector(require(j, "K", where), w + ".K");
      c.chi_star = as_vector(require(j, "chi_star", where), w + ".chi_star");
    }
  } else if (type == "highgain") {
    check_keys(j, {"type", "A", "B", "cancel_constants"}, where);
    c.kind = ControllerConfig::Kind::HighGain;
    c.A = as_vector(require(j, "A", where), w + ".A");
    c.B = as_number(require(j, "B", where), w + ".B");
    if (j.contains("cancel_constants")) {
      if (!j["cancel_constants"].is_boolean()) throw ConfigError(w + ".cancel_constants: expected a boolean");
      c.cancel_constants = j["cancel_constants"].get<bool>();
    }
  } else {
    throw ConfigError(fmt::format("{}.type: unknown controller '{}'", where, type));
  }
  return c;
}

json controller_json(const ControllerConfig& c) {
  switch (c.kind) {
    case ControllerConfig::Kind::None: return {{"type", "none"}};
    case ControllerConfig::Kind::Thm2:
    case ControllerConfig::Kind::Thm2Plus3: {
      json j = {{"type", c.kind == ControllerConfig::Kind::Thm2 ? "thm2" : "thm2plus3"},
                {"a", c.a},
                {"b", c.b}};
      if (c.c) j["c"] = *c.c;
      if (c.kind == ControllerConfig::Kind::Thm2Plus3) {
        j["K"] = c.K;
        j["chi_star"] = c.chi_star;
      }
      return j;
    }
    case ControllerConfig::Kind::HighGain:
      return {{"type", "highgain"}, {"A", c.A}, {"B", c.B}, {"cancel_constants", c.cancel_constants}};
  }
  return {};
}

std::size_t slow_dim_of(const SystemSpec& s) {
  switch (s.builtin) {
    case SystemSpec::Builtin::Planar: return 1;
    case SystemSpec::Builtin::TunnelDiode: return 2;
    case SystemSpec::Builtin::Custom: return static_cast<std::size_t>(s.k - 1);
  }
  return 0;
}

void validate_controller(const ControllerConfig& c, const SystemSpec& s, std::string_view where) {
  const std::size_t n = slow_dim_of(s);
  auto dims = [&](const Vector& v, std::string_view name) {
    if (v.size() != n) {
      throw ConfigError(fmt::format("{}.{}: expected {} components, got {}", where, name, n, v.size()));
    }
  };
  auto positive = [&](const Vector& v, std::string_view name) {
    for (double e : v) {
      if (!(e > 0.0)) throw ConfigError(fmt::format("{}.{}: entries must be > 0", where, name));
    }
  };
  switch (c.kind) {
    case ControllerConfig::Kind::None: return;
    case ControllerConfig::Kind::Thm2Plus3:
      if (s.builtin == SystemSpec::Builtin::TunnelDiode) {
        throw ConfigError(fmt::format("{}: thm2plus3 is not available for tunnel_diode", where));
      }
      dims(c.K, "K");
      dims(c.chi_star, "chi_star");
      try {
        check_params(static_cast<int>(n) + 1, Theorem3Params{c.K, c.chi_star});
      } catch (const std::exception& e) {
        throw ConfigError(fmt::format("{}: {}", where, e.what()));
      }
      [[fallthrough]];
    case ControllerConfig::Kind::Thm2:
      dims(c.a, "a");
      positive(c.a, "a");
      if (!(c.b > 0.0)) throw ConfigError(fmt::format("{}.b: must be > 0", where));
      if (c.c) dims(*c.c, "c");
      return;
    case ControllerConfig::Kind::HighGain:
      dims(c.A, "A");
      positive(c.A, "A");
      if (!(c.B > 0.0)) throw ConfigError(fmt::format("{}.B: must be > 0", where));
      return;
  }
}

void validate_config(const ScenarioConfig& cfg) {
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) throw ConfigError("epsilon must be > 0");
  if (!(cfg.t_final > 0.0)) throw ConfigError("t_final must be > 0");
  if (cfg.switch_on_time < 0.0) throw ConfigError("switch_on_time must be >= 0");
  if (cfg.system.builtin == SystemSpec::Builtin::TunnelDiode && (!(cfg.system.L > 0.0) || !(cfg.system.C > 0.0))) {
    throw ConfigError("system: L and C must be > 0");
  }
  if (!(cfg.classify.ball > 0.0) || cfg.classify.dwell < 0.0) {
    throw ConfigError("classify: ball must be > 0 and dwell >= 0");
  }
  const std::size_t dim = cfg.state_dim();
  for (std::size_t i = 0; i < cfg.ics.size(); ++i) {
    if (cfg.ics[i].size() != dim) {
      throw ConfigError(fmt::format("ics[{}]: expected {} components, got {}", i, dim, cfg.ics[i].size()));
    }
  }
  validate_controller(cfg.controller, cfg.system, "controller");
  if (cfg.compare_controller) validate_controller(*cfg.compare_controller, cfg.system, "compare_controller");
  if (cfg.grid) {
    try {
      check_grid(*cfg.grid, dim - 1);
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("grid: {}", e.what()));
    }
  }
  try {
    check_config(cfg.integrator_config());
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("integrator: {}", e.what()));
  }
}

std::filesystem::path output_dir(const ScenarioConfig& cfg, const RunOptions& opts) {
  std::filesystem::path dir = opts.out_dir ? *opts.out_dir : cfg.outputs;
  std::filesystem::create_directories(dir);
  return dir;
}

double eval_polynomial(const std::vector<PolynomialTerm>& terms, std::span<const double> x, double z,
                       double eps) {
  double sum = 0.0;
  for (const auto& t : terms) {
    double m = t.coef;
    for (std::size_t i = 0; i < t.x_powers.size(); ++i) m *= std::pow(x[i], t.x_powers[i]);
    m *= std::pow(z, t.z_power) * std::pow(eps, t.eps_power);
    sum += m;
  }
  return sum;
}

}  // namespace

std::size_t ScenarioConfig::state_dim() const { return slow_dim_of(system) + 1; }

IntegratorConfig ScenarioConfig::integrator_config() const {
  IntegratorConfig c = IntegratorConfig::for_epsilon(epsilon, t_final);
  if (integrator.rtol) c.rtol = *integrator.rtol;
  if (integrator.atol) c.atol = *integrator.atol;
  if (integrator.max_step) c.max_step = *integrator.max_step;
  if (integrator.divergence_norm) c.divergence_norm = *integrator.divergence_norm;
  if (integrator.min_step) c.min_step = *integrator.min_step;
  if (integrator.record_stride) c.record_stride = *integrator.record_stride;
  return c;
}

ScenarioConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  ScenarioConfig cfg;
  try {
    check_keys(root, {"system", "epsilon", "controller", "ics", "t_final", "switch_on_time", "integrator",
                      "classify", "outputs", "grid", "compare_controller"},
               "config");
    cfg.system = parse_system(require(root, "system", "config"));
    cfg.epsilon = as_number(require(root, "epsilon", "config"), "epsilon");
    cfg.controller = root.contains("controller") ? parse_controller(root["controller"], "controller")
                                                 : ControllerConfig{};
    if (root.contains("ics")) {
      if (!root["ics"].is_array()) throw ConfigError("ics: expected a list of initial conditions");
      for (std::size_t i = 0; i < root["ics"].size(); ++i) {
        cfg.ics.push_back(as_vector(root["ics"][i], fmt::format("ics[{}]", i)));
      }
    }
    if (root.contains("t_final")) cfg.t_final = as_number(root["t_final"], "t_final");
    if (root.contains("switch_on_time")) cfg.switch_on_time = as_number(root["switch_on_time"], "switch_on_time");
    if (root.contains("integrator")) {
      const json& ij = root["integrator"];
      check_keys(ij, {"rtol", "atol", "max_step", "divergence_norm", "min_step", "record_stride"}, "integrator");
      auto opt = [&](const char* key, std::optional<double>& out) {
        if (ij.contains(key)) out = as_number(ij[key], fmt::format("integrator.{}", key));
      };
      opt("rtol", cfg.integrator.rtol);
      opt("atol", cfg.integrator.atol);
      opt("max_step", cfg.integrator.max_step);
      opt("divergence_norm", cfg.integrator.divergence_norm);
      opt("min_step", cfg.integrator.min_step);
      opt("record_stride", cfg.integrator.record_stride);
    }
    if (root.contains("classify")) {
      const json& cj = root["classify"];
      check_keys(cj, {"ball", "dwell"}, "classify");
      if (cj.contains("ball")) cfg.classify.ball = as_number(cj["ball"], "classify.ball");
      if (cj.contains("dwell")) cfg.classify.dwell = as_number(cj["dwell"], "classify.dwell");
    }
    if (root.contains("outputs")) {
      if (!root["outputs"].is_string()) throw ConfigError("outputs: expected a directory path");
      cfg.outputs = root["outputs"].get<std::string>();
    }
    if (root.contains("grid")) {
      const json& gj = root["grid"];
      check_keys(gj, {"x", "z"}, "grid");
      GridSpec g;
      const json& xs = require(gj, "x", "grid");
      if (!xs.is_array()) throw ConfigError("grid.x: expected a list of [lo, hi, n_points]");
      for (std::size_t i = 0; i < xs.size(); ++i) g.x_ranges.push_back(as_axis(xs[i], fmt::format("grid.x[{}]", i)));
      g.z_range = as_axis(require(gj, "z", "grid"), "grid.z");
      cfg.grid = std::move(g);
    }
    if (root.contains("compare_controller")) {
      cfg.compare_controller = parse_controller(root["compare_controller"], "compare_controller");
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  validate_config(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  json j;
  j["system"] = system_json(cfg.system);
  j["epsilon"] = cfg.epsilon;
  j["controller"] = controller_json(cfg.controller);
  j["ics"] = cfg.ics;
  j["t_final"] = cfg.t_final;
  j["switch_on_time"] = cfg.switch_on_time;
  json ij = json::object();
  if (cfg.integrator.rtol) ij["rtol"] = *cfg.integrator.rtol;
  if (cfg.integrator.atol) ij["atol"] = *cfg.integrator.atol;
  if (cfg.integrator.max_step) ij["max_step"] = *cfg.integrator.max_step;
  if (cfg.integrator.divergence_norm) ij["divergence_norm"] = *cfg.integrator.divergence_norm;
  if (cfg.integrator.min_step) ij["min_step"] = *cfg.integrator.min_step;
  if (cfg.integrator.record_stride) ij["record_stride"] = *cfg.integrator.record_stride;
  j["integrator"] = std::move(ij);
  j["classify"] = {{"ball", cfg.classify.ball}, {"dwell", cfg.classify.dwell}};
  j["outputs"] = cfg.outputs;
  if (cfg.grid) {
    json xs = json::array();
    for (const auto& r : cfg.grid->x_ranges) xs.push_back(axis_json(r));
    j["grid"] = {{"x", std::move(xs)}, {"z", axis_json(cfg.grid->z_range)}};
  }
  if (cfg.compare_controller) j["compare_controller"] = controller_json(*cfg.compare_controller);
  return j.dump(2);
}

NormalFormSystem build_normal_form(const SystemSpec& spec, double epsilon) {
  switch (spec.builtin) {
    case SystemSpec::Builtin::Planar: return examples::build_planar_example(epsilon);
    case SystemSpec::Builtin::Custom: {
      NormalFormSystem sys;
      sys.k = spec.k;
      sys.epsilon = epsilon;
      sys.slow_f = [f = spec.f](std::span<const double> x, double z, double eps) {
        Vector out(f.size());
        for (std::size_t c = 0; c < f.size(); ++c) out[c] = eval_polynomial(f[c], x, z, eps);
        return out;
      };
      return sys;
    }
    case SystemSpec::Builtin::TunnelDiode: break;
  }
  throw ConfigError("tunnel_diode is not a normal-form system");
}

ScenarioSystems build_scenario(const ScenarioConfig& cfg, const ControllerConfig& controller) {
  ScenarioSystems out;
  if (cfg.system.builtin == SystemSpec::Builtin::TunnelDiode) {
    const examples::TunnelDiode td({cfg.system.L, cfg.system.C, cfg.epsilon});
    out.open_loop = td.closed_loop({});
    examples::CircuitController law;
    switch (controller.kind) {
      case ControllerConfig::Kind::None: out.variant = "open-loop"; break;
      case ControllerConfig::Kind::Thm2: {
        examples::Example1Gains g;
        g.epsilon = cfg.epsilon;
        g.a1 = controller.a[0];
        g.a2 = controller.a[1];
        g.b = controller.b;
        law = examples::example1_controllers(g).first;
        out.variant = fmt::format("u(a=[{}], b={})", fmt::join(controller.a, ","), controller.b);
        break;
      }
      case ControllerConfig::Kind::HighGain: {
        examples::Example1Gains g;
        g.epsilon = cfg.epsilon;
        g.A1 = controller.A[0];
        g.A2 = controller.A[1];
        g.B = controller.B;
        g.cancel_highgain_constants = controller.cancel_constants;
        law = examples::example1_controllers(g).second;
        out.variant = fmt::format("v(A=[{}], B={}{})", fmt::join(controller.A, ","), controller.B,
                                  controller.cancel_constants ? ", cancel" : "");
        break;
      }
      case ControllerConfig::Kind::Thm2Plus3:
        throw ConfigError("thm2plus3 is not available for tunnel_diode");
    }
    out.closed_loop = td.closed_loop(std::move(law));
    return out;
  }

  const NormalFormSystem sys = build_normal_form(cfg.system, cfg.epsilon);
  ControllerSpec spec;
  const Vector f0 = sys.f_at_origin();
  switch (controller.kind) {
    case ControllerConfig::Kind::None: spec.kind = ControllerSpec::Kind::None; break;
    case ControllerConfig::Kind::Thm2Plus3:
      spec.thm3 = {controller.K, controller.chi_star};
      [[fallthrough]];
    case ControllerConfig::Kind::Thm2:
      spec.kind = controller.kind == ControllerConfig::Kind::Thm2 ? ControllerSpec::Kind::Thm2
                                                                  : ControllerSpec::Kind::Thm2Plus3;
      spec.thm2 = {controller.c.value_or(f0), controller.a, controller.b};
      break;
    case ControllerConfig::Kind::HighGain:
      spec.kind = ControllerSpec::Kind::HighGain;
      spec.highgain = {controller.A, controller.B, cfg.epsilon, controller.cancel_constants ? f0 : Vector{}};
      break;
  }
  out.open_loop = closed_loop_slow(sys, {});
  out.closed_loop = closed_loop_slow(sys, build_controller(spec, sys));
  out.variant = spec.describe();
  return out;
}

int run_simulate(const ScenarioConfig& cfg, const RunOptions& opts, std::ostream& log) {
  ScenarioSystems systems;
  try {
    systems = build_scenario(cfg, cfg.controller);
  } catch (const std::exception& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (cfg.ics.empty()) {
    log << "config error: no initial conditions given\n";
    return kExitConfig;
  }
  const std::filesystem::path dir = output_dir(cfg, opts);
  const IntegratorConfig icfg = cfg.integrator_config();

  struct Result {
    std::optional<Trajectory> traj;
    Outcome outcome;
    std::string error;
  };
  std::vector<Result> results(cfg.ics.size());
  parallel_for(cfg.ics.size(), opts.jobs, [&](std::size_t i) {
    try {
      Trajectory t = integrate_switched(systems.open_loop, systems.closed_loop, cfg.ics[i], cfg.switch_on_time, icfg);
      results[i].outcome = classify(t, cfg.classify.ball, cfg.classify.dwell);
      results[i].traj = std::move(t);
    } catch (const NumericalError& e) {
      results[i].error = e.what();
    }
  });

  std::ofstream summary(dir / "summary.txt");
  std::size_t failures = 0;
  log << fmt::format("controller: {}\n", systems.variant);
  summary << fmt::format("controller: {}\n", systems.variant);
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::string line;
    if (results[i].traj) {
      std::ofstream csv(dir / fmt::format("traj_{}.csv", i));
      write_trajectory_csv(csv, *results[i].traj);
      const Outcome& o = results[i].outcome;
      line = fmt::format("ic[{}]=[{}] outcome={} t={:.6g} final_norm={:.6g}", i, fmt::join(cfg.ics[i], ","),
                         outcome_name(o.kind), o.time, euclidean_norm(results[i].traj->final_state()));
    } else {
      ++failures;
      line = fmt::format("ic[{}]=[{}] outcome=error message=\"{}\"", i, fmt::join(cfg.ics[i], ","), results[i].error);
    }
    log << line << '\n';
    summary << line << '\n';
  }
  return failures == results.size() ? kExitContract : kExitOk;
}

int run_roa(const ScenarioConfig& cfg, const RunOptions& opts, std::ostream& log) {
  if (!cfg.grid) {
    log << "config error: roa requires a 'grid' section\n";
    return kExitConfig;
  }
  ScenarioSystems a, b;
  try {
    a = build_scenario(cfg, cfg.controller);
    if (cfg.compare_controller) b = build_scenario(cfg, *cfg.compare_controller);
  } catch (const std::exception& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const IntegratorConfig icfg = cfg.integrator_config();
  auto cell_for = [&](const ScenarioSystems& s) {
    return [&](const Vector& ic) {
      try {
        const Trajectory t = integrate_switched(s.open_loop, s.closed_loop, ic, cfg.switch_on_time, icfg);
        return classify(t, cfg.classify.ball, cfg.classify.dwell);
      } catch (const NumericalError&) {
        return Outcome::diverged(0.0);
      }
    };
  };
  const std::filesystem::path dir = output_dir(cfg, opts);
  std::ofstream summary(dir / "summary.txt");

  const RoAReport ra = sweep(cell_for(a), *cfg.grid, a.variant, opts.jobs);
  {
    std::ofstream csv(dir / "roa.csv");
    write_roa_csv(csv, ra);
  }
  log << summary_line(ra) << '\n';
  summary << summary_line(ra) << '\n';
  if (cfg.compare_controller) {
    const RoAReport rb = sweep(cell_for(b), *cfg.grid, b.variant, opts.jobs);
    std::ofstream csv(dir / "roa_compare.csv");
    write_roa_csv(csv, rb);
    const RoAComparison cmp = compare(ra, rb);
    const std::string line = fmt::format("comparison: converged_a={} converged_b={} changed_cells={} a_larger={}",
                                         cmp.converged_a, cmp.converged_b, cmp.changed_cells.size(), cmp.a_larger);
    log << summary_line(rb) << '\n' << line << '\n';
    summary << summary_line(rb) << '\n' << line << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

Ex1Report run_example1(const Ex1Options& opts, std::size_t jobs) {
  const examples::TunnelDiode td(opts.circuit);
  examples::Example1Gains gains = opts.gains;
  gains.epsilon = opts.circuit.epsilon;
  const auto [u_law, v_law] = examples::example1_controllers(gains);
  gains.cancel_highgain_constants = !gains.cancel_highgain_constants;
  const auto v_alt = examples::example1_controllers(gains).second;

  const OdeSystem open = td.closed_loop({});
  const std::vector<std::pair<std::string, OdeSystem>> loops{
      {"u", td.closed_loop(u_law)}, {"v", td.closed_loop(v_law)}, {"v-alt", td.closed_loop(v_alt)}};
  const IntegratorConfig cfg = IntegratorConfig::for_epsilon(opts.circuit.epsilon, opts.t_final);

  Ex1Report report;
  report.v_cancels_constants = opts.gains.cancel_highgain_constants;
  report.runs.resize(loops.size() * opts.ics.size());
  parallel_for(report.runs.size(), jobs, [&](std::size_t r) {
    const std::size_t li = r / opts.ics.size();
    const std::size_t ic = r % opts.ics.size();
    Ex1Run& run = report.runs[r];
    run.controller = loops[li].first;
    run.ic = ic;
    run.traj = integrate_switched(open, loops[li].second, opts.ics[ic], opts.switch_on_time, cfg);
    run.final_norm = run.traj.outcome.is_diverged() ? INFINITY : euclidean_norm(run.traj.final_state());
    run.control_sup = run.traj.outcome.is_diverged() ? INFINITY
                                                     : control_sup_norm(run.traj, opts.switch_on_time, opts.t_final);
  });

  const std::size_t n = opts.ics.size();
  for (std::size_t ic = 0; ic < n; ++ic) {
    const Ex1Run& u = report.runs[ic];
    const Ex1Run& v = report.runs[n + ic];
    const Ex1Run& va = report.runs[2 * n + ic];
    report.sup_u = std::max(report.sup_u, u.control_sup);
    report.sup_v = std::max(report.sup_v, v.control_sup);
    report.sup_v_alt = std::max(report.sup_v_alt, va.control_sup);
    report.ratio = std::max(report.ratio, u.control_sup / v.control_sup);
    report.ratio_alt = std::max(report.ratio_alt, u.control_sup / va.control_sup);
    report.u_final = std::max(report.u_final, u.final_norm);
    report.v_final = std::max(report.v_final, v.final_norm);
    report.v_alt_final = std::max(report.v_alt_final, va.final_norm);
  }
  report.u_converged = report.u_final < opts.u_tolerance;
  report.v_converged = report.v_final < opts.v_tolerance;
  report.ratio_ok = report.ratio < opts.gain_ratio_bound;
  return report;
}

bool Ex2Report::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Ex2Check& c) { return c.passed; });
}

Outcome simulate_planar(double epsilon, double K, const Vector& ic, const Ex2Options& opts, bool open_loop) {
  const NormalFormSystem sys = examples::build_planar_example(epsilon);
  Controller law;
  if (!open_loop) {
    law = make_full_controller(2, Theorem2Params{sys.f_at_origin(), {opts.a}, opts.b},
                               Theorem3Params{{K}, {opts.chi_star}});
  }
  const OdeSystem ode = closed_loop_slow(sys, law);
  return evaluate_cell(ode, ic, IntegratorConfig::for_epsilon(epsilon, opts.t_final), opts.classify);
}

Ex2Report run_example2(const Ex2Options& opts, std::size_t jobs) {
  Ex2Report report;
  const std::size_t nic = opts.ics.size();

  // open loop and K = 0 across all epsilons
  struct Job {
    double eps;
    std::string variant;
    double K;
    bool open;
    std::size_t ic;
  };
  std::vector<Job> work;
  for (double eps : opts.epsilons) {
    for (std::size_t i = 0; i < nic; ++i) work.push_back({eps, "open-loop", 0.0, true, i});
    for (std::size_t i = 0; i < nic; ++i) work.push_back({eps, "K=0", 0.0, false, i});
  }
  // gain candidates at the ROA epsilon
  std::vector<Job> gain_work;
  for (double K : opts.K_candidates) {
    for (std::size_t i = 0; i < nic; ++i) gain_work.push_back({opts.roa_epsilon, fmt::format("K={:g}", K), K, false, i});
  }
  auto run_jobs = [&](const std::vector<Job>& jobs_in) {
    std::vector<Ex2Run> out(jobs_in.size());
    parallel_for(jobs_in.size(), jobs, [&](std::size_t j) {
      const Job& w = jobs_in[j];
      out[j] = {w.eps, w.variant, w.ic, simulate_planar(w.eps, w.K, opts.ics[w.ic], opts, w.open)};
    });
    return out;
  };
  report.runs = run_jobs(work);
  const std::vector<Ex2Run> gain_runs = run_jobs(gain_work);
  for (std::size_t c = 0; c < opts.K_candidates.size() && !report.K_star; ++c) {
    bool all = true;
    for (std::size_t i = 0; i < nic; ++i) all = all && gain_runs[c * nic + i].outcome.is_converged();
    if (all) report.K_star = opts.K_candidates[c];
  }
  if (report.K_star) {
    std::vector<Job> kstar;
    for (double eps : opts.epsilons) {
      for (std::size_t i = 0; i < nic; ++i) kstar.push_back({eps, fmt::format("K={:g}", *report.K_star), *report.K_star, false, i});
    }
    const auto extra = run_jobs(kstar);
    report.runs.insert(report.runs.end(), extra.begin(), extra.end());
  }

  auto select = [&](double eps, const std::string& variant) {
    std::vector<Outcome> o;
    for (const auto& r : report.runs) {
      if (r.epsilon == eps && r.variant == variant) o.push_back(r.outcome);
    }
    return o;
  };
  auto count = [](const std::vector<Outcome>& o, Outcome::Kind k) {
    return static_cast<std::size_t>(std::count_if(o.begin(), o.end(), [k](const Outcome& x) { return x.kind == k; }));
  };

  {
    bool all = true;
    for (double eps : opts.epsilons) {
      const auto o = select(eps, "open-loop");
      all = all && count(o, Outcome::Kind::Diverged) == o.size();
    }
    report.checks.push_back({"open-loop: every IC diverges at every epsilon", all, ""});
  }
  if (!opts.epsilons.empty()) {
    const double eps_large = opts.epsilons.front();
    const auto o = select(eps_large, "K=0");
    report.checks.push_back({fmt::format("K=0, eps={:g}: every IC converges", eps_large),
                             count(o, Outcome::Kind::Converged) == o.size(), ""});
  }
  {
    const auto o = select(opts.roa_epsilon, "K=0");
    std::string which;
    for (const auto& r : report.runs) {
      if (r.epsilon == opts.roa_epsilon && r.variant == "K=0" && r.outcome.is_diverged()) {
        which += fmt::format("ic[{}]=[{}] ", r.ic, fmt::join(opts.ics[r.ic], ","));
      }
    }
    report.checks.push_back({fmt::format("K=0, eps={:g}: exactly one IC diverges", opts.roa_epsilon),
                             count(o, Outcome::Kind::Diverged) == 1, which.empty() ? "none" : "diverged: " + which});
  }
  report.checks.push_back({"K* selected from the gain sweep", report.K_star.has_value(),
                           report.K_star ? fmt::format("K*={:g}", *report.K_star) : "no candidate works"});
  if (report.K_star) {
    const auto o = select(opts.roa_epsilon, fmt::format("K={:g}", *report.K_star));
    report.checks.push_back({fmt::format("K*, eps={:g}: every IC converges", opts.roa_epsilon),
                             count(o, Outcome::Kind::Converged) == o.size(), ""});
  }

  if (opts.run_roa && report.K_star) {
    const NormalFormSystem sys = examples::build_planar_example(opts.roa_epsilon);
    const IntegratorConfig cfg = IntegratorConfig::for_epsilon(opts.roa_epsilon, opts.t_final);
    ControllerSpec k0;
    k0.kind = ControllerSpec::Kind::Thm2Plus3;
    k0.thm2 = {sys.f_at_origin(), {opts.a}, opts.b};
    k0.thm3 = {{0.0}, {opts.chi_star}};
    ControllerSpec ks = k0;
    ks.thm3.K = {*report.K_star};
    report.roa_k0 = sweep(sys, k0, opts.grid, cfg, opts.classify, jobs);
    report.roa_kstar = sweep(sys, ks, opts.grid, cfg, opts.classify, jobs);
    report.comparison = compare(*report.roa_kstar, *report.roa_k0);
    report.checks.push_back({"ROA enlarged: converged(K*) > converged(K=0)", report.comparison->a_larger,
                             fmt::format("converged(K*)={} converged(K=0)={}", report.comparison->converged_a,
                                         report.comparison->converged_b)});
  }
  return report;
}

namespace {

json parse_root(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
}

std::vector<Vector> as_ics(const json& v, std::size_t dim) {
  if (!v.is_array()) throw ConfigError("ics: expected a list of initial conditions");
  std::vector<Vector> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_vector(v[i], fmt::format("ics[{}]", i)));
    if (out.back().size() != dim) {
      throw ConfigError(fmt::format("ics[{}]: expected {} components, got {}", i, dim, out.back().size()));
    }
  }
  return out;
}

}  // namespace

Ex1Options parse_ex1_options(const std::string& json_text) {
  const json root = parse_root(json_text);
  Ex1Options o;
  try {
    check_keys(root, {"epsilon", "L", "C", "a1", "a2", "b", "A1", "A2", "B", "cancel_highgain_constants", "ics",
                      "switch_on_time", "t_final", "u_tolerance", "v_tolerance", "gain_ratio_bound"},
               "ex1 config");
    auto num = [&](const char* key, double& out, bool positive) {
      if (!root.contains(key)) return;
      out = as_number(root[key], key);
      if (positive && !(out > 0.0)) throw ConfigError(fmt::format("{} must be > 0", key));
    };
    num("epsilon", o.circuit.epsilon, true);
    num("L", o.circuit.L, true);
    num("C", o.circuit.Cap, true);
    num("a1", o.gains.a1, true);
    num("a2", o.gains.a2, true);
    num("b", o.gains.b, true);
    num("A1", o.gains.A1, true);
    num("A2", o.gains.A2, true);
    num("B", o.gains.B, true);
    num("switch_on_time", o.switch_on_time, false);
    num("t_final", o.t_final, true);
    num("u_tolerance", o.u_tolerance, true);
    num("v_tolerance", o.v_tolerance, true);
    num("gain_ratio_bound", o.gain_ratio_bound, true);
    if (root.contains("cancel_highgain_constants")) {
      if (!root["cancel_highgain_constants"].is_boolean()) {
        throw ConfigError("cancel_highgain_constants: expected a boolean");
      }
      o.gains.cancel_highgain_constants = root["cancel_highgain_constants"].get<bool>();
    }
    if (root.contains("ics")) o.ics = as_ics(root["ics"], 3);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("ex1 config: {}", e.what()));
  }
  if (o.switch_on_time < 0.0 || o.switch_on_time >= o.t_final) {
    throw ConfigError("switch_on_time must lie in [0, t_final)");
  }
  if (o.ics.empty()) throw ConfigError("ics: at least one initial condition is required");
  o.gains.epsilon = o.circuit.epsilon;
  return o;
}

Ex2Options parse_ex2_options(const std::string& json_text) {
  const json root = parse_root(json_text);
  Ex2Options o;
  try {
    check_keys(root, {"epsilons", "a", "b", "chi_star", "K_candidates", "ics", "t_final", "roa_epsilon", "grid",
                      "classify", "run_roa"},
               "ex2 config");
    if (root.contains("epsilons")) o.epsilons = as_vector(root["epsilons"], "epsilons");
    if (root.contains("a")) o.a = as_number(root["a"], "a");
    if (root.contains("b")) o.b = as_number(root["b"], "b");
    if (root.contains("chi_star")) o.chi_star = as_number(root["chi_star"], "chi_star");
    if (root.contains("K_candidates")) o.K_candidates = as_vector(root["K_candidates"], "K_candidates");
    if (root.contains("ics")) o.ics = as_ics(root["ics"], 2);
    if (root.contains("t_final")) o.t_final = as_number(root["t_final"], "t_final");
    if (root.contains("roa_epsilon")) o.roa_epsilon = as_number(root["roa_epsilon"], "roa_epsilon");
    if (root.contains("grid")) {
      const json& gj = root["grid"];
      check_keys(gj, {"x", "z"}, "grid");
      GridSpec g;
      g.x_ranges.push_back(as_axis(require(gj, "x", "grid"), "grid.x"));
      g.z_range = as_axis(require(gj, "z", "grid"), "grid.z");
      o.grid = g;
    }
    if (root.contains("classify")) {
      const json& cj = root["classify"];
      check_keys(cj, {"ball", "dwell"}, "classify");
      if (cj.contains("ball")) o.classify.ball = as_number(cj["ball"], "classify.ball");
      if (cj.contains("dwell")) o.classify.dwell = as_number(cj["dwell"], "classify.dwell");
    }
    if (root.contains("run_roa")) {
      if (!root["run_roa"].is_boolean()) throw ConfigError("run_roa: expected a boolean");
      o.run_roa = root["run_roa"].get<bool>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("ex2 config: {}", e.what()));
  }
  if (!(o.a > 0.0) || !(o.b > 0.0)) throw ConfigError("a and b must be > 0");
  if (!(o.chi_star < -1.0)) throw ConfigError("chi_star must be < -1");
  if (!(o.t_final > 0.0)) throw ConfigError("t_final must be > 0");
  if (o.epsilons.empty() || o.ics.empty() || o.K_candidates.empty()) {
    throw ConfigError("epsilons, ics and K_candidates must be non-empty");
  }
  for (double e : o.epsilons) {
    if (!(e > 0.0)) throw ConfigError("epsilons must be > 0");
  }
  if (!(o.roa_epsilon > 0.0)) throw ConfigError("roa_epsilon must be > 0");
  for (double K : o.K_candidates) {
    if (!(K >= 0.0)) throw ConfigError("K_candidates must be >= 0");
  }
  try {
    check_grid(o.grid, 1);
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("grid: {}", e.what()));
  }
  return o;
}

}  // namespace sfstab
