#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gimdp/io.hpp"
#include "gimdp/model.hpp"
#include "gimdp/oracle.hpp"
#include "gimdp/random_model.hpp"
#include "gimdp/simulator.hpp"
#include "gimdp/solver.hpp"
#include "gimdp/tilde.hpp"

namespace gimdp::cli {

/// Process exit codes.
enum ExitCode : int {
  kSuccess = 0,
  kDomainViolation = 1,
  kUsageError = 2,
  kDivergedStates = 3,
};

namespace detail {

struct SolverFlags {
  SolverOptions opt;
  double residual_tol = 1e-8;

  void add_to(CLI::App& app) {
    app.add_option("--tol", opt.abs_tol, "absolute sup-norm stopping tolerance")
        ->envname("GIMDP_TOL")
        ->capture_default_str();
    app.add_option("--max-iter", opt.max_iter, "iteration limit")->envname("GIMDP_MAX_ITER")->capture_default_str();
    app.add_option("--divergence-cap", opt.divergence_cap, "values above this are flagged +inf")
        ->envname("GIMDP_DIVERGENCE_CAP")
        ->capture_default_str();
    app.add_option("--tie-tol", opt.tie_tol, "selector tie tolerance")->envname("GIMDP_TIE_TOL")->capture_default_str();
    app.add_option("--residual-tol", residual_tol, "tolerance for the optimality residual check")
        ->envname("GIMDP_RESIDUAL_TOL")
        ->capture_default_str();
  }
};

struct Solved {
  TildeModel tilde;
  ValueSolution sol;
  StationaryPolicy policy;
  ResidualReport residuals;
};

inline Solved solve(const CtmdpModel& m, const SolverFlags& f) {
  Solved s;
  s.tilde = build_tilde(m);
  s.sol = value_iterate(s.tilde, f.opt);
  s.policy = extract_policy(s.tilde, s.sol.values, f.opt.tie_tol);
  s.residuals = verify_optimality(m, s.sol.values, f.residual_tol);
  return s;
}

inline int solve_exit_code(const ValueSolution& sol) {
  switch (sol.status) {
    case SolveStatus::converged: return kSuccess;
    case SolveStatus::diverged_states: return kDivergedStates;
    case SolveStatus::max_iterations: return kDomainViolation;
  }
  return kDomainViolation;
}

/// Loads and validates; on failure prints diagnostics and returns the exit code.
inline std::optional<CtmdpModel> load_valid(const std::string& path, std::ostream& err, int& code) {
  CtmdpModel m;
  try {
    m = load_model(path);
  } catch (const ParseError& e) {
    err << path << ": parse error: " << e.what() << "\n";
    code = kUsageError;
    return std::nullopt;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    code = kUsageError;
    return std::nullopt;
  }
  const auto report = validate_model(m);
  if (!report.ok()) {
    for (const auto& v : report.violations) err << path << ": " << v.message << "\n";
    code = report.structural() ? kUsageError : kDomainViolation;
    return std::nullopt;
  }
  return m;
}

inline void print_simulation(std::ostream& out, const SimulationReport& r, std::size_t x0) {
  out << "state " << x0 << "  estimate " << std::setprecision(10) << r.estimate << "  std_error "
      << std::setprecision(4) << r.std_error << "  paths " << r.n_paths << "  truncated_fraction "
      << r.truncation_bias_bound << "\n";
  for (std::size_t k = 0; k < kTerminationKinds; ++k)
    out << "  " << std::left << std::setw(20) << to_string(static_cast<Termination>(k)) << r.terminations[k] << "\n";
}

}  // namespace detail

/**
 * Entry point shared by the `gimdp` binary and the tests.
 *
 * Exit codes: 0 success, 1 domain violation (invalid model, failed
 * consistency check, no convergence), 2 usage or I/O error, 3 solved with
 * diverged states.
 */
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Risk-sensitive gradual-impulse CTMDP solver and simulator", "gimdp"};
  app.require_subcommand(1);
  std::string format = "table";
  app.add_option("--format", format, "table or json")->check(CLI::IsMember({"table", "json"}));

  // validate
  auto* validate = app.add_subcommand("validate", "check a model file");
  std::string model_path;
  validate->add_option("model", model_path, "model file")->required();

  // solve
  auto* solve = app.add_subcommand("solve", "value iteration, policy extraction and residual check");
  solve->add_option("model", model_path, "model file")->required();
  detail::SolverFlags solver_flags;
  solver_flags.add_to(*solve);
  std::string out_path;
  solve->add_option("--out", out_path, "write the structured report here");
  std::string tilde_path;
  solve->add_option("--dump-tilde", tilde_path, "write the reduced model document here");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of E[exp(total cost)]");
  simulate->add_option("model", model_path, "model file")->required();
  std::string policy_path;
  bool from_solve = false;
  auto* policy_opt = simulate->add_option("--policy", policy_path, "policy file (list or solve output)");
  simulate->add_flag("--from-solve", from_solve, "solve the model and simulate its optimal policy")
      ->excludes(policy_opt);
  solver_flags.add_to(*simulate);
  std::size_t n_paths = 100'000;
  std::uint64_t seed = 7;
  double horizon = 0.0;
  std::size_t impulse_cap = SimulationOptions{}.impulse_cap;
  std::size_t jump_cap = SimulationOptions{}.jump_cap;
  unsigned threads = 1;
  std::size_t x0 = 0;
  std::string trace_path;
  simulate->add_option("--paths", n_paths, "number of paths")->capture_default_str();
  simulate->add_option("--seed", seed, "master seed")->capture_default_str();
  simulate->add_option("--horizon", horizon, "time horizon (default: chosen from the policy's rates)");
  simulate->add_option("--impulse-cap", impulse_cap, "max impulses in one block")->capture_default_str();
  simulate->add_option("--jump-cap", jump_cap, "max events per path")->capture_default_str();
  simulate->add_option("--threads", threads, "worker threads")->capture_default_str();
  simulate->add_option("--x0", x0, "initial state")->capture_default_str();
  simulate->add_option("--trace", trace_path, "dump the first path's events here");

  // compare
  auto* compare = app.add_subcommand("compare", "value iteration vs brute force vs Monte Carlo");
  compare->add_option("model", model_path, "model file")->required();
  solver_flags.add_to(*compare);
  double oracle_tol = 1e-7;
  double enumeration_cap = kDefaultEnumerationCap;
  compare->add_option("--oracle-tol", oracle_tol, "allowed |VI - brute force|")->capture_default_str();
  compare->add_option("--enumeration-cap", enumeration_cap, "max policies to enumerate")->capture_default_str();
  compare->add_option("--paths", n_paths, "paths per state")->capture_default_str();
  compare->add_option("--seed", seed, "master seed")->capture_default_str();
  compare->add_option("--horizon", horizon, "time horizon (default: chosen from the policy's rates)");
  compare->add_option("--impulse-cap", impulse_cap, "max impulses in one block")->capture_default_str();
  compare->add_option("--jump-cap", jump_cap, "max events per path")->capture_default_str();
  compare->add_option("--threads", threads, "worker threads")->capture_default_str();

  // example
  auto* example = app.add_subcommand("example", "write a built-in model");
  std::string example_name;
  example->add_option("name", example_name, "rat or random")->required();
  RatParams rat;
  example->add_option("--mu", rat.mu, "rat departure rate")->capture_default_str();
  example->add_option("--l", rat.l, "cost rate while the rat is present")->capture_default_str();
  example->add_option("--p", rat.p, "hit probability")->capture_default_str();
  example->add_option("--C", rat.C, "cost per shot")->capture_default_str();
  std::uint64_t model_seed = 42;
  example->add_option("--seed", model_seed, "seed for the random model")->capture_default_str();
  example->add_option("--out", out_path, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }
  const bool json = format == "json";

  try {
    if (*example) {
      CtmdpModel m;
      if (example_name == "rat") {
        try {
          m = rat_example(rat);
        } catch (const std::invalid_argument& e) {
          err << "parameter error: " << e.what() << "\n";
          return kUsageError;
        }
      } else if (example_name == "random") {
        m = random_model(model_seed);
      } else {
        err << "unknown example '" << example_name << "' (expected rat or random)\n";
        return kUsageError;
      }
      const std::string text = serialize_model(m);
      if (out_path.empty())
        out << text;
      else
        write_file(out_path, text);
      return kSuccess;
    }

    int code = kSuccess;
    if (*validate) {
      CtmdpModel m;
      try {
        m = load_model(model_path);
      } catch (const ParseError& e) {
        err << model_path << ": parse error: " << e.what() << "\n";
        return kUsageError;
      }
      const auto report = validate_model(m);
      if (json) {
        Json doc;
        doc["valid"] = report.ok();
        Json list = Json::array();
        for (const auto& v : report.violations)
          list.push_back({{"kind", to_string(v.kind)}, {"index", v.index}, {"magnitude", v.magnitude}, {"message", v.message}});
        doc["violations"] = std::move(list);
        out << doc.dump(2) << "\n";
      } else if (report.ok()) {
        out << model_path << ": valid (" << m.n_states() << " states, " << m.n_gradual() << " gradual, "
            << m.n_impulse() << " impulse actions)\n";
      } else {
        for (const auto& v : report.violations) out << model_path << ": " << v.message << "\n";
      }
      if (report.ok()) return kSuccess;
      return report.structural() ? kUsageError : kDomainViolation;
    }

    const auto model = detail::load_valid(model_path, err, code);
    if (!model) return code;
    const CtmdpModel& m = *model;

    if (*solve) {
      const auto s = detail::solve(m, solver_flags);
      const Json doc = solve_report_json(m, s.sol, s.policy, s.residuals);
      if (json)
        out << doc.dump(2) << "\n";
      else
        write_solve_table(out, m, s.sol, s.policy, s.residuals);
      if (!out_path.empty()) write_file(out_path, doc.dump(2) + "\n");
      if (!tilde_path.empty()) write_file(tilde_path, tilde_to_json(s.tilde).dump(2) + "\n");
      return detail::solve_exit_code(s.sol);
    }

    if (*simulate) {
      if (x0 >= m.n_states()) {
        err << "--x0 out of range\n";
        return kUsageError;
      }
      StationaryPolicy policy;
      if (from_solve) {
        policy = detail::solve(m, solver_flags).policy;
      } else if (!policy_path.empty()) {
        try {
          policy = policy_from_json(m, gimdp::detail::parse_text(read_file(policy_path)));
        } catch (const std::exception& e) {
          err << policy_path << ": " << e.what() << "\n";
          return kUsageError;
        }
      } else {
        err << "simulate needs --policy FILE or --from-solve\n";
        return kUsageError;
      }
      if (n_paths < 2) {
        err << "--paths must be at least 2\n";
        return kUsageError;
      }
      SimulationOptions so{horizon > 0.0 ? horizon : default_horizon(m, policy), impulse_cap, jump_cap};
      const auto rep = estimate_utility(m, policy, x0, n_paths, seed, so, threads);
      if (!trace_path.empty()) {
        std::ostringstream tr;
        write_trace(tr, m, simulate_path(m, policy, x0, path_seed(seed, 0), so));
        write_file(trace_path, tr.str());
      }
      if (json) {
        Json doc = simulation_report_json(rep);
        doc["x0"] = x0;
        doc["horizon"] = so.horizon;
        doc["seed"] = seed;
        doc["policy"] = policy_to_json(m, policy);
        out << doc.dump(2) << "\n";
      } else {
        out << "horizon " << so.horizon << "  seed " << seed << "\n";
        detail::print_simulation(out, rep, x0);
      }
      return kSuccess;
    }

    if (*compare) {
      const auto s = detail::solve(m, solver_flags);
      std::optional<OracleResult> oracle;
      std::string oracle_note;
      try {
        oracle = brute_force_value(s.tilde, solver_flags.opt, enumeration_cap);
      } catch (const EnumerationCapExceeded& e) {
        oracle_note = e.what();
      }
      SimulationOptions so{horizon > 0.0 ? horizon : default_horizon(m, s.policy), impulse_cap, jump_cap};

      bool agree = s.sol.status != SolveStatus::max_iterations;
      Json rows = Json::array();
      if (!json) {
        out << std::left << std::setw(16) << "state" << std::setw(18) << "VI" << std::setw(18) << "oracle"
            << std::setw(18) << "MC" << std::setw(12) << "MC_se" << std::setw(14) << "|VI-oracle|"
            << std::setw(14) << "|VI-MC|" << "ok\n";
      }
      for (std::size_t x = 0; x < m.n_states(); ++x) {
        const double vi = s.sol.values[x];
        bool row_ok = true;
        Json row;
        row["state"] = x;
        row["vi"] = number_or_null(vi);
        row["vi_diverged"] = std::isinf(vi);
        std::string oracle_col = "skipped", d_oracle = "-";
        if (oracle) {
          const double ov = oracle->values[x];
          row["oracle"] = number_or_null(ov);
          row["oracle_diverged"] = std::isinf(ov);
          oracle_col = gimdp::detail::fmt_value(ov);
          if (std::isinf(ov) != std::isinf(vi)) {
            row_ok = false;
            d_oracle = "diverged-set";
          } else if (std::isfinite(vi)) {
            const double d = std::abs(vi - ov);
            row["delta_vi_oracle"] = d;
            d_oracle = gimdp::detail::fmt_value(d, 3);
            if (d > oracle_tol) row_ok = false;
          }
        } else {
          row["oracle"] = "skipped";
        }
        std::string mc_col = "skipped", se_col = "-", d_mc = "-";
        if (std::isfinite(vi)) {
          const auto rep = estimate_utility(m, s.policy, x, n_paths, seed, so, threads);
          row["mc"] = simulation_report_json(rep);
          const double d = std::abs(rep.estimate - vi);
          row["delta_vi_mc"] = number_or_null(d);
          mc_col = gimdp::detail::fmt_value(rep.estimate);
          se_col = gimdp::detail::fmt_value(rep.std_error, 3);
          d_mc = gimdp::detail::fmt_value(d, 3);
          if (!(d <= 3.0 * rep.std_error + rep.truncation_bias_bound)) row_ok = false;
        }
        row["ok"] = row_ok;
        agree = agree && row_ok;
        rows.push_back(std::move(row));
        if (!json) {
          out << std::left << std::setw(16) << state_label(m, x) << std::setw(18) << gimdp::detail::fmt_value(vi)
              << std::setw(18) << oracle_col << std::setw(18) << mc_col << std::setw(12) << se_col << std::setw(14)
              << d_oracle << std::setw(14) << d_mc << (row_ok ? "yes" : "NO") << "\n";
        }
      }
      if (json) {
        Json doc;
        doc["status"] = to_string(s.sol.status);
        doc["oracle"] = oracle ? Json("computed") : Json(oracle_note);
        if (oracle) doc["n_policies"] = oracle->n_policies;
        doc["oracle_tol"] = oracle_tol;
        doc["horizon"] = so.horizon;
        doc["states"] = std::move(rows);
        doc["agree"] = agree;
        out << doc.dump(2) << "\n";
      } else {
        if (!oracle) out << "oracle skipped: " << oracle_note << "\n";
        out << (agree ? "all columns agree\n" : "DISAGREEMENT\n");
      }
      return agree ? kSuccess : kDomainViolation;
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ModelError& e) {
    err << e.what() << "\n";
    return kDomainViolation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace gimdp::cli
