#pragma once

#include "paraopt/mesh.hpp"
#include "paraopt/spectral_operator.hpp"
#include "paraopt/time_grid.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace paraopt {

/// Indicator of the control region omega = (left, right) on the mesh.
/// Realizes both B (injection) and B* (observation) as the same pointwise
/// multiplication, since the indicator is self-adjoint.
struct ControlMask {
    Eigen::VectorXd indicator; // 0/1 per interior node
    double left = 0.0;
    double right = 1.0;

    static ControlMask from_interval(const Mesh1D& mesh, double left, double right) {
        if (!(left < right))
            throw std::invalid_argument("ControlMask: need left < right");
        Eigen::VectorXd ind = Eigen::VectorXd::Zero(mesh.n_interior);
        int count = 0;
        for (int i = 0; i < mesh.n_interior; ++i) {
            const double x = mesh.node(i);
            if (x >= left && x <= right) {
                ind[i] = 1.0;
                ++count;
            }
        }
        if (count == 0)
            throw std::invalid_argument("ControlMask: no mesh node inside omega");
        return ControlMask{std::move(ind), left, right};
    }

    static ControlMask full(const Mesh1D& mesh) {
        return ControlMask{Eigen::VectorXd::Ones(mesh.n_interior), 0.0, 1.0};
    }

    StateVec apply(const StateVec& v) const {
        return StateVec(indicator.cwiseProduct(v.values), v.h);
    }

    /// h-weighted norm of the indicator, ||chi_omega||.
    double norm(double h) const { return std::sqrt(h * indicator.squaredNorm()); }
};

/// Time-sampled control u(t_i) on a Simpson grid; samples live in the
/// control space (grid functions supported on omega).
struct ControlTrajectory {
    TimeGrid grid;
    Eigen::MatrixXd samples; // n_interior x n_t, one column per node
    double sup_norm = 0.0;   // max over nodes of the h-weighted sample norm
    double h = 0.0;

    static ControlTrajectory from_samples(const TimeGrid& grid, Eigen::MatrixXd samples,
                                          double h) {
        if (samples.cols() != grid.n_t)
            throw std::invalid_argument("ControlTrajectory: one column per grid node required");
        ControlTrajectory u{grid, std::move(samples), 0.0, h};
        u.sup_norm = u.max_sample_norm();
        return u;
    }

    static ControlTrajectory zero(const TimeGrid& grid, int n_interior, double h) {
        return from_samples(grid, Eigen::MatrixXd::Zero(n_interior, grid.n_t), h);
    }

    StateVec sample(int i) const { return StateVec(samples.col(i), h); }
    double sample_norm(int i) const { return std::sqrt(h * samples.col(i).squaredNorm()); }

    double max_sample_norm() const {
        double m = 0.0;
        for (int i = 0; i < grid.n_t; ++i) m = std::max(m, sample_norm(i));
        return m;
    }

    /// Linear interpolation in t; zero beyond the trajectory's horizon
    /// (the zero-extension device used when comparing across horizons).
    Eigen::VectorXd interpolate(double t) const {
        const int n = static_cast<int>(samples.rows());
        if (t < 0.0 || t > grid.tau + 1e-14) return Eigen::VectorXd::Zero(n);
        if (t >= grid.tau) return samples.col(grid.n_t - 1);
        const double s = t / grid.dt();
        const int i = std::min(static_cast<int>(s), grid.n_t - 2);
        const double w = s - i;
        return (1.0 - w) * samples.col(i) + w * samples.col(i + 1);
    }
};

/// Adjoint observation B* T_lag eta: propagate and restrict to omega.
inline StateVec observe(const DiscreteOperator& op, const ControlMask& mask, double lag,
                        const StateVec& eta) {
    if (lag < 0.0) throw std::invalid_argument("observe: lag must be >= 0");
    return mask.apply(op.semigroup_apply(lag, eta));
}

/// Input-to-state map: Simpson quadrature of int_0^tau T_{tau-s} B u(s) ds,
/// each integrand sample resolved mode-wise.
inline StateVec input_map(const DiscreteOperator& op, const ControlMask& mask,
                          const ControlTrajectory& u, const TimeGrid& grid) {
    if (!(u.grid == grid))
        throw std::invalid_argument("input_map: trajectory grid does not match quadrature grid");
    if (u.samples.rows() != op.mesh().n_interior)
        throw std::invalid_argument("input_map: sample size does not match mesh");

    const int K = op.k_modes();
    const Eigen::VectorXd w = grid.weights();
    // Project masked samples onto the modes in one pass, then sum the
    // exponentially weighted columns.
    Eigen::MatrixXd masked = u.samples.array().colwise() * mask.indicator.array();
    Eigen::MatrixXd coeffs = op.mesh().h * (op.modes().transpose() * masked); // K x n_t
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(K);
    for (int i = 0; i < grid.n_t; ++i) {
        const double lag = grid.tau - grid.node(i);
        for (int k = 0; k < K; ++k)
            acc[k] += w[i] * std::exp(-op.eigenvalues()[k] * lag) * coeffs(k, i);
    }
    return op.reconstruct(acc);
}

/// First time the free trajectory T_t psi enters the ball of radius r;
/// 0 if psi already lies inside. Finite because lambda_1 > 0.
inline double free_reach_time(const DiscreteOperator& op, const StateVec& psi, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("free_reach_time: radius must be positive");
    const double n0 = psi.norm();
    if (n0 <= r) return 0.0;

    Eigen::VectorXd c = op.project(psi);
    auto norm_at = [&](double t) {
        double acc = 0.0;
        for (int k = 0; k < c.size(); ++k) {
            const double d = std::exp(-op.eigenvalues()[k] * t) * c[k];
            acc += d * d;
        }
        return std::sqrt(acc);
    };

    // ||T_t psi|| <= e^{-lambda_1 t} ||psi||, so this bracket always closes.
    double lo = 0.0;
    double hi = std::log(n0 / r) / op.lambda1() + 1e-12;
    // t -> ||T_t psi|| is strictly decreasing; plain bisection.
    for (int it = 0; it < 200 && (hi - lo) > 1e-13 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (norm_at(mid) > r ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace paraopt
