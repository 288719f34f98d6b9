// sfstab: simulate, reproduce and verify fold-point stabilization.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "CLI11.hpp"
#include "sfstab/errors.hpp"
#include "sfstab/parallel.hpp"
#include "sfstab/scenario.hpp"
#include "sfstab/verify.hpp"

namespace {

using namespace sfstab;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Common {
  std::string config;
  std::string positional;
  std::string out;
  std::size_t jobs = 0;
  std::uint64_t seed = 1;

  std::string config_path() const { return config.empty() ? positional : config; }
  std::size_t job_count() const { return jobs == 0 ? default_jobs() : jobs; }
};

void add_common(CLI::App* cmd, Common& c, bool takes_config) {
  if (takes_config) {
    cmd->add_option("--config", c.config, "JSON config file");
    cmd->add_option("config_file", c.positional, "JSON config file (alternative to --config)");
  }
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--jobs", c.jobs, "worker threads (0 = hardware concurrency)");
  cmd->add_option("--seed", c.seed, "seed for property-suite sampling");
}

std::filesystem::path make_out(const Common& c, const char* fallback) {
  std::filesystem::path dir = c.out.empty() ? fallback : c.out;
  std::filesystem::create_directories(dir);
  return dir;
}

int cmd_simulate(const Common& c, bool roa) {
  if (c.config_path().empty()) {
    std::cerr << "config error: a config file is required\n";
    return kExitConfig;
  }
  ScenarioConfig cfg;
  try {
    cfg = load_config(c.config_path());
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  RunOptions opts;
  if (!c.out.empty()) opts.out_dir = c.out;
  opts.jobs = c.job_count();
  return roa ? run_roa(cfg, opts, std::cout) : run_simulate(cfg, opts, std::cout);
}

int cmd_ex1(const Common& c) {
  Ex1Options opts;
  try {
    if (!c.config_path().empty()) opts = parse_ex1_options(read_file(c.config_path()));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto dir = make_out(c, "out/ex1");
  const Ex1Report rep = run_example1(opts, c.job_count());
  std::ofstream summary(dir / "summary.txt");
  auto emit = [&](const std::string& line) {
    std::cout << line << '\n';
    summary << line << '\n';
  };
  for (const Ex1Run& r : rep.runs) {
    std::ofstream csv(dir / fmt::format("traj_{}_ic{}.csv", r.controller, r.ic));
    write_trajectory_csv(csv, r.traj);
    emit(fmt::format("controller={} ic=[{}] final_norm={:.6g} sup_control={:.6g} diverged={}", r.controller,
                     fmt::join(opts.ics[r.ic], ","), r.final_norm, r.control_sup, r.traj.outcome.is_diverged()));
  }
  emit(fmt::format("v constants cancelled: {}", rep.v_cancels_constants));
  emit(fmt::format("sup_u={:.6g} sup_v={:.6g} ratio={:.6g} bound={:g}", rep.sup_u, rep.sup_v, rep.ratio,
                   opts.gain_ratio_bound));
  emit(fmt::format("final_norm u={:.6g} (tol {:g})  v={:.6g} (tol {:g})", rep.u_final, opts.u_tolerance, rep.v_final,
                   opts.v_tolerance));
  emit(fmt::format("v-alt (constants cancelled: {}): sup={:.6g} ratio={:.6g} final_norm={:.6g}",
                   !rep.v_cancels_constants, rep.sup_v_alt, rep.ratio_alt, rep.v_alt_final));
  emit(fmt::format("u_converged={} v_converged={} ratio_ok={}", rep.u_converged, rep.v_converged, rep.ratio_ok));
  emit(rep.ok() ? "ex1: ok" : "ex1: contract violated");
  return rep.ok() ? kExitOk : kExitContract;
}

int cmd_ex2(const Common& c) {
  Ex2Options opts;
  try {
    if (!c.config_path().empty()) opts = parse_ex2_options(read_file(c.config_path()));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto dir = make_out(c, "out/ex2");
  const Ex2Report rep = run_example2(opts, c.job_count());
  std::ofstream summary(dir / "summary.txt");
  auto emit = [&](const std::string& line) {
    std::cout << line << '\n';
    summary << line << '\n';
  };
  for (const Ex2Run& r : rep.runs) {
    emit(fmt::format("eps={:g} variant={} ic=[{}] outcome={} t={:.4g}", r.epsilon, r.variant,
                     fmt::join(opts.ics[r.ic], ","), outcome_name(r.outcome.kind), r.outcome.time));
  }
  if (rep.K_star) emit(fmt::format("K*={:g} (smallest of [{}] converging every IC at eps={:g})", *rep.K_star,
                                   fmt::join(opts.K_candidates, ","), opts.roa_epsilon));
  if (rep.roa_k0 && rep.roa_kstar) {
    std::ofstream a(dir / "roa_K0.csv");
    write_roa_csv(a, *rep.roa_k0);
    std::ofstream b(dir / "roa_Kstar.csv");
    write_roa_csv(b, *rep.roa_kstar);
    emit(summary_line(*rep.roa_k0));
    emit(summary_line(*rep.roa_kstar));
  }
  for (const Ex2Check& ch : rep.checks) {
    emit(fmt::format("check {}: {}{}", ch.passed ? "pass" : "FAIL", ch.name, ch.detail.empty() ? "" : " (" + ch.detail + ")"));
  }
  emit(rep.ok() ? "ex2: ok" : "ex2: contract violated");
  return rep.ok() ? kExitOk : kExitContract;
}

int cmd_verify(const Common& c, const std::string& suite) {
  std::vector<SuiteResult> results;
  if (suite.empty()) {
    results = run_all_suites(c.seed, c.job_count());
  } else {
    try {
      results.push_back(run_suite(suite, c.seed));
    } catch (const PreconditionError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    }
  }
  bool ok = true;
  for (const auto& r : results) {
    std::cout << format_result(r) << '\n';
    ok = ok && r.passed;
  }
  std::cout << (ok ? "verify: all suites pass" : "verify: failures") << '\n';
  return ok ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fold-point stabilization of slow-fast systems"};
  app.require_subcommand(1);
  Common common;
  std::string suite;

  add_common(app.add_subcommand("simulate", "integrate a scenario config"), common, true);
  add_common(app.add_subcommand("roa", "region-of-attraction sweep of a scenario config"), common, true);
  add_common(app.add_subcommand("ex1", "tunnel-diode reproduction"), common, true);
  add_common(app.add_subcommand("ex2", "planar fold reproduction and ROA comparison"), common, true);
  auto* verify = app.add_subcommand("verify", "run the property suites");
  add_common(verify, common, false);
  verify->add_option("--suite", suite, "run a single suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "simulate") return cmd_simulate(common, false);
    if (name == "roa") return cmd_simulate(common, true);
    if (name == "ex1") return cmd_ex1(common);
    if (name == "ex2") return cmd_ex2(common);
    return cmd_verify(common, suite);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitContract;
  }
}
