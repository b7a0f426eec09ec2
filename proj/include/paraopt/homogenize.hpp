#pragma once

#include "paraopt/coefficient.hpp"
#include "paraopt/mesh.hpp"
#include "paraopt/periodic_coefficient.hpp"
#include "paraopt/spectral_operator.hpp"
#include "paraopt/time_grid.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace paraopt {

/// True when the mesh resolves oscillations at scale eps (at least four
/// samples per period). Below this the discrete operator silently drifts
/// toward the arithmetic-mean limit, which is the wrong one.
inline bool resolves_oscillation(double eps, const Mesh1D& mesh) {
    return eps >= 4.0 * mesh.h;
}

/// Samples a(x/eps) at the edge midpoints of the mesh.
inline CoefficientField oscillating_coefficient(const PeriodicCoefficient1D& base, double eps,
                                                const Mesh1D& mesh) {
    if (!(eps > 0.0))
        throw std::invalid_argument("oscillating_coefficient: eps must be positive");
    Eigen::VectorXd edges(mesh.n_interior + 1);
    for (int e = 0; e <= mesh.n_interior; ++e)
        edges[e] = base(mesh.edge_midpoint(e) / eps);
    return CoefficientField::diffusion(mesh, std::move(edges), base.m_low(), base.m_high());
}

/// 1-D homogenized coefficient: the cell problem collapses to the harmonic
/// mean a_0 = ( int_0^1 a(y)^{-1} dy )^{-1}.
inline double homogenized_coefficient_1d(const PeriodicCoefficient1D& base) {
    const double inv_mean = simpson(0.0, 1.0, 4097, [&](double y) { return 1.0 / base(y); });
    return 1.0 / inv_mean;
}

/// Decreasing positive epsilon sequence paired with a diffusion base.
struct EpsilonFamily {
    std::vector<double> epsilons;
    PeriodicCoefficient1D base;

    EpsilonFamily(std::vector<double> eps, PeriodicCoefficient1D base_)
        : epsilons(std::move(eps)), base(base_) {
        if (epsilons.empty())
            throw std::invalid_argument("EpsilonFamily: empty epsilon list");
        for (std::size_t i = 0; i < epsilons.size(); ++i) {
            if (!(epsilons[i] > 0.0))
                throw std::invalid_argument("EpsilonFamily: epsilons must be positive");
            if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
                throw std::invalid_argument("EpsilonFamily: epsilons must be strictly decreasing");
        }
    }
};

/// Reaction-perturbation preset a_eps(x) = a_0(x) + eps * sin(pi x) with a
/// constant limit a_0; the family converges uniformly to the limit.
struct ReactionFamilySpec {
    double a0 = 1.0;
    bool sine_perturbation = true;
};

struct ReactionFamily {
    std::vector<CoefficientField> members; // one per eps, same order
    CoefficientField limit;
    std::vector<double> sup_distances; // ||a_eps - a_0||_inf on the grid
};

inline ReactionFamily reaction_family(const ReactionFamilySpec& preset,
                                      const std::vector<double>& epsilons, const Mesh1D& mesh) {
    const double lambda1 = laplacian_lambda1(mesh);
    auto build = [&](double eps) {
        Eigen::VectorXd v(mesh.n_interior);
        for (int i = 0; i < mesh.n_interior; ++i) {
            const double pert = preset.sine_perturbation ? eps * std::sin(M_PI * mesh.node(i)) : 0.0;
            v[i] = preset.a0 + pert;
        }
        const double sup = v.cwiseAbs().maxCoeff();
        if (!(sup < lambda1))
            throw std::invalid_argument("reaction_family: sup-norm " + std::to_string(sup) +
                                        " at eps = " + std::to_string(eps) +
                                        " violates the lambda_1 bound " + std::to_string(lambda1));
        return CoefficientField::reaction(mesh, std::move(v));
    };

    ReactionFamily family{{}, build(0.0), {}};
    for (double eps : epsilons) {
        family.members.push_back(build(eps));
        family.sup_distances.push_back(
            (family.members.back().values - family.limit.values).cwiseAbs().maxCoeff());
    }
    return family;
}

/// Row of the resolvent-convergence table: worst inverse distance over the
/// probe set for a single family member.
struct ResolventDistanceRow {
    double epsilon = 0.0;
    double max_distance = 0.0;
};

inline std::vector<ResolventDistanceRow> resolvent_convergence_report(
    const std::vector<double>& epsilons, const std::vector<DiscreteOperator>& ops,
    const DiscreteOperator& op_0, const std::vector<StateVec>& probes) {
    if (ops.size() != epsilons.size())
        throw std::invalid_argument("resolvent_convergence_report: one operator per epsilon");
    for (const auto& op : ops)
        if (!(op.mesh() == op_0.mesh()))
            throw std::invalid_argument("resolvent_convergence_report: operators on different meshes");

    std::vector<ResolventDistanceRow> rows;
    rows.reserve(ops.size());
    for (std::size_t i = 0; i < ops.size(); ++i) {
        double worst = 0.0;
        for (const auto& psi : probes) {
            const StateVec a = ops[i].resolvent_apply(0.0, psi);
            const StateVec b = op_0.resolvent_apply(0.0, psi);
            worst = std::max(worst, StateVec(a.values - b.values, a.h).norm());
        }
        rows.push_back({epsilons[i], worst});
    }
    return rows;
}

} // namespace paraopt
