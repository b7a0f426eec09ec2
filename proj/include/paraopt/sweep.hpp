#pragma once

#include "paraopt/control_space.hpp"
#include "paraopt/homogenize.hpp"
#include "paraopt/optimal_control.hpp"
#include "paraopt/presets.hpp"
#include "paraopt/solution_io.hpp"
#include "paraopt/version.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace paraopt {

/// Epsilon-family experiment configuration.
struct SweepConfig {
    std::string family = "diffusion"; // diffusion | reaction
    CoefficientSpec coefficient;      // periodic base (diffusion) or reaction_sine limit
    std::vector<double> epsilons = {0.25, 0.125, 0.0625, 0.03125};
    int mesh_n = 255;
    double omega_left = 0.3, omega_right = 0.8;
    PsiSpec psi;
    double r = 1.0;
    double M = 2.0;
    double delta = 0.05; // truncation width of the sup-norm control distance
    int time_nodes = 129;
    SolverSettings solver;
    std::string out_dir = "out";
};

/// One row of the sweep: how far the eps-problem sits from the limit one.
struct SweepRecord {
    double epsilon = 0.0;
    double tau_star = 0.0;
    double tau_err = 0.0;
    double ctrl_l2 = 0.0;
    double ctrl_linf_trunc = 0.0;
    double semigroup_dist = 0.0;
    double resolvent_dist = 0.0;
    bool converged = false;
    TimeOptimalResiduals residuals;
    std::string config_hash;
};

struct SweepResult {
    std::vector<SweepRecord> records;
    double tau_star_0 = 0.0;
    double N_star_0 = 0.0;
    bool converged_0 = false;
    std::string config_hash;
};

/// L2 and truncated sup distances between two controls compared over
/// [0, horizon]; both are resampled onto a common Simpson grid with linear
/// interpolation in t and zero extension beyond their own horizons.
inline std::pair<double, double> control_distance(const ControlTrajectory& u_a,
                                                  const ControlTrajectory& u_b, double horizon,
                                                  double delta) {
    if (!(horizon > 0.0)) throw std::invalid_argument("control_distance: horizon must be positive");
    if (!(delta < horizon))
        throw std::invalid_argument("control_distance: delta must stay below the horizon");
    if (u_a.h != u_b.h || u_a.samples.rows() != u_b.samples.rows())
        throw std::invalid_argument("control_distance: trajectories live on different meshes");

    const int n_t = std::max(u_a.grid.n_t, u_b.grid.n_t);
    const TimeGrid grid(horizon, n_t);
    const Eigen::VectorXd w = grid.weights();
    const double h = u_a.h;

    double l2_sq = 0.0, linf = 0.0;
    for (int i = 0; i < n_t; ++i) {
        const double t = grid.node(i);
        const Eigen::VectorXd diff = u_a.interpolate(t) - u_b.interpolate(t);
        const double nrm2 = h * diff.squaredNorm();
        l2_sq += w[i] * nrm2;
        if (t <= horizon - delta + 1e-14) linf = std::max(linf, std::sqrt(nrm2));
    }
    return {std::sqrt(std::max(l2_sq, 0.0)), linf};
}

namespace detail {

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buf);
}

inline ordered_json sweep_config_to_json(const SweepConfig& config) {
    ordered_json j;
    j["family"] = config.family;
    ordered_json coeff;
    coeff["kind"] = config.coefficient.kind;
    coeff["base"] = config.coefficient.base;
    coeff["amplitude"] = config.coefficient.amplitude;
    coeff["a1"] = config.coefficient.a1;
    coeff["a2"] = config.coefficient.a2;
    coeff["fraction"] = config.coefficient.fraction;
    j["coefficient"] = std::move(coeff);
    j["epsilons"] = config.epsilons;
    j["mesh_n"] = config.mesh_n;
    j["omega"] = {config.omega_left, config.omega_right};
    ordered_json psi;
    psi["kind"] = config.psi.kind;
    psi["coeffs"] = config.psi.coeffs;
    psi["center"] = config.psi.center;
    psi["width"] = config.psi.width;
    psi["height"] = config.psi.height;
    j["psi"] = std::move(psi);
    j["r"] = config.r;
    j["M"] = config.M;
    j["delta"] = config.delta;
    j["time_nodes"] = config.time_nodes;
    ordered_json solver;
    solver["tol_el"] = config.solver.tol_el;
    solver["tol_gap_rel"] = config.solver.tol_gap_rel;
    solver["tol_tau"] = config.solver.tol_tau;
    solver["tol_target_rel"] = config.solver.tol_target_rel;
    solver["max_iters"] = config.solver.max_iters;
    j["solver"] = std::move(solver);
    return j;
}

inline std::string sweep_config_hash(const SweepConfig& config) {
    return fnv1a_hex(sweep_config_to_json(config).dump());
}

} // namespace detail

/// Solves the homogenized problem, then each eps-problem (warm-started from
/// the homogenized minimizer), and measures the distances the rows report.
/// Non-converged solves mark their record; the sweep itself never asserts.
inline SweepResult run_sweep(const SweepConfig& config) {
    const Mesh1D mesh(config.mesh_n);
    if (config.epsilons.empty()) throw std::invalid_argument("run_sweep: empty epsilon list");
    for (std::size_t i = 0; i < config.epsilons.size(); ++i) {
        if (!(config.epsilons[i] > 0.0))
            throw std::invalid_argument("run_sweep: epsilons must be positive");
        if (i > 0 && !(config.epsilons[i] < config.epsilons[i - 1]))
            throw std::invalid_argument("run_sweep: epsilons must be strictly decreasing");
        if (config.family == "diffusion" && !resolves_oscillation(config.epsilons[i], mesh))
            throw std::invalid_argument("run_sweep: eps = " + std::to_string(config.epsilons[i]) +
                                        " is below the 4h resolution guard (h = " +
                                        std::to_string(mesh.h) + ")");
    }

    const ControlMask mask = ControlMask::from_interval(mesh, config.omega_left, config.omega_right);
    const StateVec psi = make_psi(config.psi, mesh);

    // Limit operator first: harmonic-mean constant for diffusion, the plain
    // reaction limit otherwise.
    DiscreteOperator op_0 = [&] {
        if (config.family == "diffusion") {
            const double a0 = homogenized_coefficient_1d(config.coefficient.make_periodic());
            return assemble_operator(CoefficientField::constant_diffusion(mesh, a0), mesh);
        }
        if (config.family != "reaction")
            throw std::invalid_argument("run_sweep: unknown family '" + config.family + "'");
        ReactionFamilySpec spec{config.coefficient.base, true};
        return assemble_operator(reaction_family(spec, {}, mesh).limit, mesh);
    }();

    ControlProblem problem_0(op_0, mask, psi, config.r, config.time_nodes);
    if (problem_0.psi.norm() <= config.r)
        throw std::invalid_argument("run_sweep: psi already inside the target ball");
    TimeOptimalSolution sol_0 = time_optimal(problem_0, config.M, config.solver);
    if (!(config.delta > 0.0 && config.delta < sol_0.tau_star))
        throw std::invalid_argument("run_sweep: delta = " + std::to_string(config.delta) +
                                    " must lie in (0, tau*_0 = " + std::to_string(sol_0.tau_star) +
                                    ")");

    SweepResult result;
    result.tau_star_0 = sol_0.tau_star;
    result.N_star_0 = sol_0.N_star;
    result.converged_0 = sol_0.converged;
    result.config_hash = detail::sweep_config_hash(config);

    const StateVec inv_psi_0 = op_0.resolvent_apply(0.0, psi);

    for (double eps : config.epsilons) {
        DiscreteOperator op_eps = [&] {
            if (config.family == "diffusion")
                return assemble_operator(
                    oscillating_coefficient(config.coefficient.make_periodic(), eps, mesh), mesh);
            ReactionFamilySpec spec{config.coefficient.base, true};
            return assemble_operator(reaction_family(spec, {eps}, mesh).members.front(), mesh);
        }();

        ControlProblem problem_eps(op_eps, mask, psi, config.r, config.time_nodes);
        Eigen::VectorXd warm = op_eps.project(sol_0.eta_hat);

        SweepRecord rec;
        rec.epsilon = eps;
        rec.config_hash = result.config_hash;
        try {
            TimeOptimalSolution sol_eps = time_optimal(problem_eps, config.M, config.solver, &warm);
            rec.tau_star = sol_eps.tau_star;
            rec.tau_err = std::abs(sol_eps.tau_star - sol_0.tau_star);
            rec.converged = sol_eps.converged;
            rec.residuals = sol_eps.residuals;
            if (sol_eps.u_star && sol_0.u_star) {
                auto [l2, linf] = control_distance(*sol_eps.u_star, *sol_0.u_star,
                                                   sol_0.tau_star, config.delta);
                rec.ctrl_l2 = l2;
                rec.ctrl_linf_trunc = linf;
            }
        } catch (const std::exception&) {
            rec.converged = false; // partial data is still useful for diagnosis
        }

        // Semigroup distance sampled on the comparison grid over [0, tau*_0].
        const TimeGrid grid(sol_0.tau_star, config.time_nodes);
        double sg = 0.0;
        for (int i = 0; i < grid.n_t; ++i) {
            const double t = grid.node(i);
            const StateVec a = op_eps.semigroup_apply(t, psi);
            const StateVec b = op_0.semigroup_apply(t, psi);
            sg = std::max(sg, StateVec(a.values - b.values, a.h).norm());
        }
        rec.semigroup_dist = sg;

        const StateVec inv_eps = op_eps.resolvent_apply(0.0, psi);
        rec.resolvent_dist = StateVec(inv_eps.values - inv_psi_0.values, psi.h).norm();

        result.records.push_back(std::move(rec));
    }
    return result;
}

namespace detail {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline ordered_json record_to_json(const SweepRecord& rec) {
    ordered_json j;
    j["epsilon"] = rec.epsilon;
    j["tau_star"] = rec.tau_star;
    j["tau_err"] = rec.tau_err;
    j["ctrl_l2"] = rec.ctrl_l2;
    j["ctrl_linf_trunc"] = rec.ctrl_linf_trunc;
    j["semigroup_dist"] = rec.semigroup_dist;
    j["resolvent_dist"] = rec.resolvent_dist;
    j["converged"] = rec.converged;
    ordered_json res;
    res["bang_bang_dev"] = rec.residuals.bang_bang_dev;
    res["transversality"] = rec.residuals.transversality;
    res["max_principle"] = rec.residuals.max_principle;
    res["bracket_width"] = rec.residuals.bracket_width;
    res["el_residual"] = rec.residuals.el_residual;
    res["duality_gap_rel"] = rec.residuals.duality_gap_rel;
    res["norm_mismatch"] = rec.residuals.norm_mismatch;
    j["residuals"] = std::move(res);
    j["config_hash"] = rec.config_hash;
    return j;
}

inline SweepRecord record_from_json(const ordered_json& j) {
    SweepRecord rec;
    rec.epsilon = j.at("epsilon").get<double>();
    rec.tau_star = j.at("tau_star").get<double>();
    rec.tau_err = j.at("tau_err").get<double>();
    rec.ctrl_l2 = j.at("ctrl_l2").get<double>();
    rec.ctrl_linf_trunc = j.at("ctrl_linf_trunc").get<double>();
    rec.semigroup_dist = j.at("semigroup_dist").get<double>();
    rec.resolvent_dist = j.at("resolvent_dist").get<double>();
    rec.converged = j.at("converged").get<bool>();
    const auto& res = j.at("residuals");
    rec.residuals.bang_bang_dev = res.at("bang_bang_dev").get<double>();
    rec.residuals.transversality = res.at("transversality").get<double>();
    rec.residuals.max_principle = res.at("max_principle").get<double>();
    rec.residuals.bracket_width = res.at("bracket_width").get<double>();
    rec.residuals.el_residual = res.at("el_residual").get<double>();
    rec.residuals.duality_gap_rel = res.at("duality_gap_rel").get<double>();
    rec.residuals.norm_mismatch = res.at("norm_mismatch").get<double>();
    rec.config_hash = j.at("config_hash").get<std::string>();
    return rec;
}

} // namespace detail

inline constexpr const char* sweep_csv_header =
    "epsilon,tau_star,tau_err,ctrl_l2,ctrl_linf_trunc,semigroup_dist,resolvent_dist,converged";

/// Writes sweep.csv, sweep.json and the plotdata/ columnar files.
inline void emit_report(const SweepResult& result, const SweepConfig& config,
                        const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "plotdata", ec);
    if (ec)
        throw std::runtime_error("emit_report: cannot create output directory '" + out_dir +
                                 "': " + ec.message());

    auto open = [&](const fs::path& p) {
        std::ofstream out(p);
        if (!out) throw std::runtime_error("emit_report: cannot write '" + p.string() + "'");
        return out;
    };

    {
        std::ofstream csv = open(fs::path(out_dir) / "sweep.csv");
        csv << "# config_hash=" << result.config_hash << "\n" << sweep_csv_header << "\n";
        for (const SweepRecord& rec : result.records) {
            csv << detail::format_g17(rec.epsilon) << ',' << detail::format_g17(rec.tau_star)
                << ',' << detail::format_g17(rec.tau_err) << ',' << detail::format_g17(rec.ctrl_l2)
                << ',' << detail::format_g17(rec.ctrl_linf_trunc) << ','
                << detail::format_g17(rec.semigroup_dist) << ','
                << detail::format_g17(rec.resolvent_dist) << ',' << (rec.converged ? 1 : 0)
                << "\n";
        }
    }

    {
        ordered_json j;
        j["schema"] = 1;
        j["tool_version"] = version_string;
        j["config_hash"] = result.config_hash;
        j["config"] = detail::sweep_config_to_json(config);
        ordered_json hom;
        hom["tau_star"] = result.tau_star_0;
        hom["N_star"] = result.N_star_0;
        hom["converged"] = result.converged_0;
        j["homogenized"] = std::move(hom);
        ordered_json records = ordered_json::array();
        for (const SweepRecord& rec : result.records) records.push_back(detail::record_to_json(rec));
        j["records"] = std::move(records);
        std::ofstream out = open(fs::path(out_dir) / "sweep.json");
        out << j.dump(2) << "\n";
    }

    {
        std::ofstream tau_csv = open(fs::path(out_dir) / "plotdata" / "tau_vs_epsilon.csv");
        tau_csv << "# config_hash=" << result.config_hash << "\nepsilon,tau_star,tau_err\n";
        std::ofstream dist_csv = open(fs::path(out_dir) / "plotdata" / "distances_loglog.csv");
        dist_csv << "# config_hash=" << result.config_hash
                 << "\nlog10_epsilon,log10_tau_err,log10_ctrl_l2,log10_ctrl_linf_trunc,"
                    "log10_semigroup_dist,log10_resolvent_dist\n";
        auto log10_safe = [](double v) { return std::log10(std::max(v, 1e-300)); };
        for (const SweepRecord& rec : result.records) {
            tau_csv << detail::format_g17(rec.epsilon) << ',' << detail::format_g17(rec.tau_star)
                    << ',' << detail::format_g17(rec.tau_err) << "\n";
            dist_csv << detail::format_g17(log10_safe(rec.epsilon)) << ','
                     << detail::format_g17(log10_safe(rec.tau_err)) << ','
                     << detail::format_g17(log10_safe(rec.ctrl_l2)) << ','
                     << detail::format_g17(log10_safe(rec.ctrl_linf_trunc)) << ','
                     << detail::format_g17(log10_safe(rec.semigroup_dist)) << ','
                     << detail::format_g17(log10_safe(rec.resolvent_dist)) << "\n";
        }
    }
}

/// Reloads the records of a sweep.json (round-trip counterpart of
/// emit_report).
inline SweepResult load_sweep_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_sweep_json: cannot open '" + path + "'");
    ordered_json j = ordered_json::parse(in);
    if (j.at("schema").get<int>() != 1)
        throw std::runtime_error("load_sweep_json: unsupported schema");
    SweepResult result;
    result.config_hash = j.at("config_hash").get<std::string>();
    result.tau_star_0 = j.at("homogenized").at("tau_star").get<double>();
    result.N_star_0 = j.at("homogenized").at("N_star").get<double>();
    result.converged_0 = j.at("homogenized").at("converged").get<bool>();
    for (const auto& rec : j.at("records")) result.records.push_back(detail::record_from_json(rec));
    return result;
}

} // namespace paraopt
