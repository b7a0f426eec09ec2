#pragma once

#include "paraopt/control_space.hpp"
#include "paraopt/optimal_control.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace paraopt {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json vector_to_json(const Eigen::VectorXd& v) {
    ordered_json arr = ordered_json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

inline Eigen::VectorXd vector_from_json(const ordered_json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
    return v;
}

inline ordered_json trajectory_to_json(const ControlTrajectory& u) {
    ordered_json j;
    j["tau"] = u.grid.tau;
    j["nodes"] = vector_to_json(u.grid.nodes());
    ordered_json norms = ordered_json::array();
    ordered_json values = ordered_json::array();
    for (int i = 0; i < u.grid.n_t; ++i) {
        norms.push_back(u.sample_norm(i));
        values.push_back(vector_to_json(u.samples.col(i)));
    }
    j["norms"] = std::move(norms);
    j["values"] = std::move(values);
    return j;
}

inline ControlTrajectory trajectory_from_json(const ordered_json& j, double h) {
    const double tau = j.at("tau").get<double>();
    const auto& values = j.at("values");
    const int n_t = static_cast<int>(values.size());
    if (n_t < 3) throw std::invalid_argument("trajectory: too few nodes");
    const int n = static_cast<int>(values[0].size());
    Eigen::MatrixXd samples(n, n_t);
    for (int i = 0; i < n_t; ++i) samples.col(i) = vector_from_json(values[i]);
    return ControlTrajectory::from_samples(TimeGrid(tau, n_t), std::move(samples), h);
}

} // namespace detail

inline ordered_json solution_to_json(const TimeOptimalSolution& sol, double r) {
    ordered_json j;
    j["schema"] = 1;
    j["kind"] = "time_optimal";
    j["tau"] = sol.tau_star;
    j["N_star"] = sol.N_star;
    j["V_star"] = sol.V_star;
    j["M"] = sol.M;
    j["r"] = r;
    j["converged"] = sol.converged;
    j["degenerate"] = sol.degenerate;
    j["eta_hat"] = detail::vector_to_json(sol.eta_hat.values);
    ordered_json res;
    res["bang_bang_dev"] = sol.residuals.bang_bang_dev;
    res["transversality"] = sol.residuals.transversality;
    res["max_principle"] = sol.residuals.max_principle;
    res["bracket_width"] = sol.residuals.bracket_width;
    res["el_residual"] = sol.residuals.el_residual;
    res["duality_gap_rel"] = sol.residuals.duality_gap_rel;
    res["norm_mismatch"] = sol.residuals.norm_mismatch;
    j["residuals"] = std::move(res);
    j["trajectory"] =
        sol.u_star ? detail::trajectory_to_json(*sol.u_star) : ordered_json(nullptr);
    return j;
}

inline ordered_json solution_to_json(const NormOptimalSolution& sol, double r) {
    ordered_json j;
    j["schema"] = 1;
    j["kind"] = "norm_optimal";
    j["tau"] = sol.tau;
    j["N_star"] = sol.N_star;
    j["V_star"] = sol.V_star;
    j["r"] = r;
    j["converged"] = sol.converged;
    j["eta_hat"] = detail::vector_to_json(sol.eta_hat.values);
    ordered_json res;
    res["el_residual"] = sol.residuals.el_residual;
    res["target_residual"] = sol.residuals.target_residual;
    res["duality_gap_rel"] = sol.residuals.duality_gap_rel;
    j["residuals"] = std::move(res);
    j["trajectory"] = detail::trajectory_to_json(sol.f_hat);
    return j;
}

/// Solution file as loaded back for verification; carries whichever scalar
/// fields the kind defines.
struct LoadedSolution {
    std::string kind;
    double tau = 0.0;
    double N_star = 0.0;
    double V_star = 0.0;
    double M = 0.0;
    double r = 0.0;
    bool converged = false;
    bool degenerate = false;
    Eigen::VectorXd eta_hat;
    bool has_trajectory = false;
    ControlTrajectory trajectory;
};

inline LoadedSolution load_solution(const std::string& path, double h) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open solution file: " + path);
    ordered_json j = ordered_json::parse(in);
    if (j.at("schema").get<int>() != 1)
        throw std::runtime_error("unsupported solution schema in " + path);

    LoadedSolution s;
    s.kind = j.at("kind").get<std::string>();
    s.tau = j.at("tau").get<double>();
    s.N_star = j.at("N_star").get<double>();
    s.V_star = j.at("V_star").get<double>();
    s.r = j.at("r").get<double>();
    s.M = j.value("M", 0.0);
    s.converged = j.at("converged").get<bool>();
    s.degenerate = j.value("degenerate", false);
    s.eta_hat = detail::vector_from_json(j.at("eta_hat"));
    if (!j.at("trajectory").is_null()) {
        s.trajectory = detail::trajectory_from_json(j.at("trajectory"), h);
        s.has_trajectory = true;
    }
    return s;
}

} // namespace paraopt
