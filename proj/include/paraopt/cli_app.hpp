#pragma once

#include "paraopt/config.hpp"
#include "paraopt/control_space.hpp"
#include "paraopt/homogenize.hpp"
#include "paraopt/optimal_control.hpp"
#include "paraopt/solution_io.hpp"
#include "paraopt/sweep.hpp"
#include "paraopt/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace paraopt {

namespace cli_detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
}

inline void echo_config(const RunConfig& cfg, std::ostream& out) {
    out << "config (effective):\n"
        << "  problem: mesh_n=" << cfg.mesh_n << " coefficient=" << cfg.coefficient.kind
        << " epsilon=" << num(cfg.epsilon) << " omega=[" << num(cfg.omega_left) << ","
        << num(cfg.omega_right) << "] psi=" << cfg.psi.kind << " radius=" << num(cfg.radius)
        << "\n"
        << "  solver:  tol_el=" << num(cfg.solver.tol_el) << " tol_gap="
        << num(cfg.solver.tol_gap_rel) << " tol_tau=" << num(cfg.solver.tol_tau)
        << " tol_target=" << num(cfg.solver.tol_target_rel) << " max_iters="
        << cfg.solver.max_iters << " time_nodes=" << cfg.time_nodes << "\n"
        << "  output:  dir=" << cfg.out_dir << "\n";
}

struct ResidualLine {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

inline void print_residual_table(const std::vector<ResidualLine>& lines, std::ostream& out) {
    out << "  residuals:\n";
    for (const auto& line : lines)
        out << "    " << (line.pass ? "[pass] " : "[FAIL] ") << line.name << " = "
            << num(line.value) << " (tol " << num(line.tolerance) << ")\n";
}

inline std::filesystem::path ensure_out_dir(const RunConfig& cfg) {
    std::string dir = cfg.out_dir;
    if (const char* env = std::getenv("PARAOPT_OUT"); env && *env) dir = env;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
    return dir;
}

/// Residual checks recomputed from a loaded solution file; nothing stored in
/// the file is trusted beyond the trajectory and the minimizer themselves.
inline std::vector<ResidualLine> verify_loaded(const ControlProblem& problem,
                                               const SolverSettings& settings,
                                               const LoadedSolution& sol) {
    std::vector<ResidualLine> lines;
    if (sol.degenerate) return lines;
    if (!sol.has_trajectory)
        throw std::runtime_error("solution file carries no trajectory to verify");

    const ControlTrajectory& u = sol.trajectory;
    const double bound = sol.kind == "time_optimal" ? sol.M : sol.N_star;
    const StateVec eta(sol.eta_hat, problem.psi.h);
    const double eta_norm = eta.norm();
    if (eta_norm == 0.0) throw std::runtime_error("solution file carries a zero minimizer");

    double bb = 0.0, mp = 0.0;
    double S = 0.0;
    const Eigen::VectorXd w = u.grid.weights();
    for (int i = 0; i < u.grid.n_t; ++i) {
        const StateVec phi = observe(problem.op, problem.mask, u.grid.tau - u.grid.node(i), eta);
        const double phi_norm = phi.norm();
        S += w[i] * phi_norm;
        if (phi_norm < 1e-13) continue;
        bb = std::max(bb, std::abs(u.sample_norm(i) - bound));
        const double lhs = problem.psi.h * u.samples.col(i).dot(phi.values);
        mp = std::max(mp, std::abs(lhs - bound * phi_norm) / (bound * phi_norm));
    }
    lines.push_back({"bang_bang_dev", bb / bound, 1e-6, false});
    lines.push_back({"max_principle_res", mp, 1e-8, false});

    StateVec reached = problem.op.semigroup_apply(u.grid.tau, problem.psi);
    reached.values += input_map(problem.op, problem.mask, u, u.grid).values;
    const StateVec tv(reached.values + (problem.r / eta_norm) * eta.values, reached.h);
    lines.push_back({"transversality_res", tv.norm() / problem.r, 1e-5, false});

    if (sol.kind == "norm_optimal")
        lines.push_back({"target_residual", std::abs(reached.norm() - problem.r),
                         settings.tol_target_rel * problem.r, false});

    const double V = eval_J(problem, u.grid.tau, eta, u.grid);
    lines.push_back(
        {"duality_gap", std::abs(V + 0.5 * S * S) / std::max(1.0, S * S), 1e-8, false});

    if (sol.kind == "time_optimal") {
        MinimizeResult fresh = minimize_J(problem, u.grid.tau, settings);
        lines.push_back(
            {"inverse_relation_res", std::abs(fresh.S_value - sol.M) / sol.M, 1e-4, false});
    }

    for (auto& line : lines) line.pass = line.value <= line.tolerance;
    return lines;
}

} // namespace cli_detail

/// CLI entry point, separated from main() so tests can drive it directly.
/// Exit codes: 0 success, 1 solver non-convergence or failed verification,
/// 2 configuration errors.
inline int run_command(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
    CLI::App app{"Time- and norm-optimal control of 1-D parabolic systems with an "
                 "epsilon-sweep harness for oscillating coefficients"};
    app.set_version_flag("--version", version_string);

    std::string config_path;
    app.add_option("-c,--config", config_path, "TOML configuration file")
        ->required()
        ->check(CLI::ExistingFile);

    double opt_tau = 0.0, opt_M = 0.0;
    std::vector<double> opt_tau_list;
    std::string solution_path;

    CLI::App* cmd_norm =
        app.add_subcommand("norm", "Solve the norm-optimal problem at a fixed horizon");
    CLI::Option* norm_tau_opt =
        cmd_norm->add_option("--tau", opt_tau, "Horizon tau (overrides [norm] tau)");

    CLI::App* cmd_time =
        app.add_subcommand("time", "Solve the time-optimal problem for a control bound");
    CLI::Option* time_M_opt =
        cmd_time->add_option("--M", opt_M, "Control bound M (overrides [time] M)");

    CLI::App* cmd_curve =
        app.add_subcommand("curve", "Tabulate the minimal-norm function N*(tau)");
    CLI::Option* curve_list_opt =
        cmd_curve->add_option("--tau-list", opt_tau_list, "Horizons (overrides [curve] tau_list)")
            ->delimiter(',');

    CLI::App* cmd_homog =
        app.add_subcommand("homog", "Print the homogenized coefficient of the periodic preset");

    CLI::App* cmd_sweep = app.add_subcommand("sweep", "Run the epsilon-family experiment");

    CLI::App* cmd_verify =
        app.add_subcommand("verify", "Re-check the residuals of a stored solution file");
    cmd_verify->add_option("solution", solution_path, "solution JSON file")
        ->required()
        ->check(CLI::ExistingFile);

    app.require_subcommand(1);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help / --version
            out << app.help();
            return 0;
        }
        err << "argument error: " << e.what() << "\n";
        return 2;
    }

    try {
        const RunConfig cfg = load_config(config_path);
        cli_detail::echo_config(cfg, out);
        const std::filesystem::path out_dir = cli_detail::ensure_out_dir(cfg);

        if (cmd_homog->parsed()) {
            if (!cfg.coefficient.is_periodic())
                throw ConfigError("homog requires a periodic coefficient preset");
            const double a0 = homogenized_coefficient_1d(cfg.coefficient.make_periodic());
            out << "homogenized coefficient a_0 = " << std::setprecision(10) << a0 << "\n";
            return 0;
        }

        if (cmd_sweep->parsed()) {
            SweepConfig sc = make_sweep_config(cfg);
            sc.out_dir = out_dir.string();
            const SweepResult result = run_sweep(sc);
            emit_report(result, sc, sc.out_dir);
            out << "sweep: tau*_0 = " << cli_detail::num(result.tau_star_0)
                << ", N*_0 = " << cli_detail::num(result.N_star_0) << "\n";
            out << "  epsilon      tau_err      ctrl_l2      ctrl_linf    semigroup    converged\n";
            bool all_ok = result.converged_0;
            for (const SweepRecord& rec : result.records) {
                out << "  " << std::left << std::setw(12) << cli_detail::num(rec.epsilon)
                    << " " << std::setw(12) << cli_detail::num(rec.tau_err) << " " << std::setw(12)
                    << cli_detail::num(rec.ctrl_l2) << " " << std::setw(12)
                    << cli_detail::num(rec.ctrl_linf_trunc) << " " << std::setw(12)
                    << cli_detail::num(rec.semigroup_dist) << " " << (rec.converged ? "yes" : "NO")
                    << "\n";
                all_ok = all_ok && rec.converged;
            }
            out << "report written to " << out_dir.string() << "\n";
            return all_ok ? 0 : 1;
        }

        if (cmd_verify->parsed()) {
            const ControlProblem problem = make_problem(cfg);
            const LoadedSolution sol = load_solution(solution_path, problem.psi.h);
            const auto lines = cli_detail::verify_loaded(problem, cfg.solver, sol);
            out << "verify " << solution_path << " (" << sol.kind << ")\n";
            cli_detail::print_residual_table(lines, out);
            std::string failing;
            for (const auto& line : lines)
                if (!line.pass) failing += (failing.empty() ? "" : ", ") + line.name;
            if (!failing.empty()) {
                err << "verification failed: " << failing << "\n";
                return 1;
            }
            out << "verification passed\n";
            return 0;
        }

        const ControlProblem problem = make_problem(cfg);

        if (cmd_norm->parsed()) {
            double tau = norm_tau_opt->count() ? opt_tau : cfg.norm_tau.value_or(0.0);
            if (!(tau > 0.0)) throw ConfigError("norm: missing tau (flag --tau or [norm] tau)");
            const NormOptimalSolution sol = norm_optimal(problem, tau, cfg.solver);
            out << "norm-optimal solve: tau = " << cli_detail::num(tau) << "\n"
                << "  N* = " << cli_detail::num(sol.N_star)
                << "  V* = " << cli_detail::num(sol.V_star)
                << "  converged = " << (sol.converged ? "yes" : "NO") << "\n";
            std::vector<cli_detail::ResidualLine> lines = {
                {"el_residual", sol.residuals.el_residual, cfg.solver.tol_el, false},
                {"target_residual", sol.residuals.target_residual,
                 cfg.solver.tol_target_rel * problem.r, false},
                {"duality_gap", sol.residuals.duality_gap_rel, cfg.solver.tol_gap_rel, false}};
            for (auto& line : lines) line.pass = line.value <= line.tolerance;
            cli_detail::print_residual_table(lines, out);
            std::ofstream file(out_dir / "norm_solution.json");
            file << solution_to_json(sol, problem.r).dump(2) << "\n";
            out << "solution written to " << (out_dir / "norm_solution.json").string() << "\n";
            bool ok = sol.converged;
            for (const auto& line : lines) ok = ok && line.pass;
            return ok ? 0 : 1;
        }

        if (cmd_time->parsed()) {
            double M = time_M_opt->count() ? opt_M : cfg.time_M.value_or(0.0);
            if (!(M > 0.0)) throw ConfigError("time: missing M (flag --M or [time] M)");
            const TimeOptimalSolution sol = time_optimal(problem, M, cfg.solver);
            out << "time-optimal solve: M = " << cli_detail::num(M) << "\n"
                << "  tau* = " << cli_detail::num(sol.tau_star)
                << "  N*(tau*) = " << cli_detail::num(sol.N_star)
                << "  converged = " << (sol.converged ? "yes" : "NO")
                << (sol.degenerate ? "  (degenerate: psi already in target)" : "") << "\n";
            std::vector<cli_detail::ResidualLine> lines;
            if (!sol.degenerate) {
                lines = {{"bang_bang_dev", sol.residuals.bang_bang_dev / M, 1e-6, false},
                         {"transversality_res", sol.residuals.transversality / problem.r, 1e-5,
                          false},
                         {"max_principle_res", sol.residuals.max_principle, 1e-8, false},
                         {"duality_gap", sol.residuals.duality_gap_rel, cfg.solver.tol_gap_rel,
                          false},
                         {"norm_mismatch_rel", sol.residuals.norm_mismatch / M, 1e-4, false}};
                for (auto& line : lines) line.pass = line.value <= line.tolerance;
                cli_detail::print_residual_table(lines, out);
            }
            std::ofstream file(out_dir / "time_solution.json");
            file << solution_to_json(sol, problem.r).dump(2) << "\n";
            out << "solution written to " << (out_dir / "time_solution.json").string() << "\n";
            bool ok = sol.converged;
            for (const auto& line : lines) ok = ok && line.pass;
            return ok ? 0 : 1;
        }

        if (cmd_curve->parsed()) {
            std::vector<double> taus =
                curve_list_opt->count() ? opt_tau_list : cfg.curve_tau_list;
            if (taus.empty())
                throw ConfigError("curve: missing tau list (flag --tau-list or [curve] tau_list)");
            const auto curve = minimal_norm_curve(problem, taus, cfg.solver);
            out << "minimal-norm curve (" << curve.size() << " points)\n";
            std::ofstream csv(out_dir / "curve.csv");
            csv << "tau,N_star\n";
            for (const auto& [tau, n_star] : curve) {
                out << "  tau = " << cli_detail::num(tau) << "  N* = " << cli_detail::num(n_star)
                    << "\n";
                csv << detail::format_g17(tau) << ',' << detail::format_g17(n_star) << "\n";
            }
            out << "curve written to " << (out_dir / "curve.csv").string() << "\n";
            return 0;
        }

        err << "no command executed\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace paraopt
