#pragma once

#include "paraopt/coefficient.hpp"
#include "paraopt/homogenize.hpp"
#include "paraopt/mesh.hpp"
#include "paraopt/periodic_coefficient.hpp"
#include "paraopt/spectral_operator.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace paraopt {

/// Named analytic coefficient presets addressable from configs. Keeping the
/// description separate from the built field makes runs reproducible from
/// the config alone.
struct CoefficientSpec {
    std::string kind = "constant"; // constant|sinusoidal|two_phase|reaction_sine|modal
    double base = 1.0;             // constant value, or sinusoidal offset
    double amplitude = 0.0;        // sinusoidal / reaction_sine amplitude
    double a1 = 1.0, a2 = 1.0;     // two_phase levels
    double fraction = 0.5;         // two_phase split point
    std::vector<double> eigenvalues; // modal operator spectrum

    bool is_periodic() const {
        return kind == "constant" || kind == "sinusoidal" || kind == "two_phase";
    }

    PeriodicCoefficient1D make_periodic() const {
        if (kind == "constant") return PeriodicCoefficient1D::constant(base);
        if (kind == "sinusoidal") return PeriodicCoefficient1D::sinusoidal(base, amplitude);
        if (kind == "two_phase") return PeriodicCoefficient1D::two_phase(a1, a2, fraction);
        throw std::invalid_argument("CoefficientSpec: preset '" + kind + "' is not periodic");
    }

    /// Builds the operator this spec describes on the given mesh. `eps > 0`
    /// samples a periodic preset as a(x/eps); `eps == 0` uses the
    /// homogenized constant.
    DiscreteOperator make_operator(const Mesh1D& mesh, double eps) const {
        if (kind == "modal") {
            Eigen::VectorXd lambda(eigenvalues.size());
            for (std::size_t i = 0; i < eigenvalues.size(); ++i) lambda[i] = eigenvalues[i];
            return DiscreteOperator::modal(mesh, lambda);
        }
        if (kind == "reaction_sine") {
            Eigen::VectorXd v(mesh.n_interior);
            for (int i = 0; i < mesh.n_interior; ++i)
                v[i] = base + amplitude * std::sin(M_PI * mesh.node(i));
            return assemble_operator(CoefficientField::reaction(mesh, std::move(v)), mesh);
        }
        if (is_periodic()) {
            const PeriodicCoefficient1D periodic = make_periodic();
            const CoefficientField field =
                eps > 0.0 ? oscillating_coefficient(periodic, eps, mesh)
                          : CoefficientField::constant_diffusion(
                                mesh, homogenized_coefficient_1d(periodic));
            return assemble_operator(field, mesh);
        }
        throw std::invalid_argument("CoefficientSpec: unknown preset '" + kind + "'");
    }
};

/// Named analytic initial states.
struct PsiSpec {
    std::string kind = "modes"; // modes | bump
    std::vector<double> coeffs = {2.0, 0.5}; // weights on sqrt(2) sin(k pi x)
    double center = 0.5, width = 0.2, height = 1.0; // bump parameters
};

inline StateVec make_psi(const PsiSpec& spec, const Mesh1D& mesh) {
    if (spec.kind == "modes") {
        if (spec.coeffs.empty()) throw std::invalid_argument("psi preset: empty mode list");
        Eigen::VectorXd v = Eigen::VectorXd::Zero(mesh.n_interior);
        for (std::size_t k = 0; k < spec.coeffs.size(); ++k)
            v += spec.coeffs[k] * sine_mode(mesh, static_cast<int>(k) + 1).values;
        return StateVec(std::move(v), mesh.h);
    }
    if (spec.kind == "bump") {
        if (!(spec.width > 0.0)) throw std::invalid_argument("psi preset: bump width must be positive");
        Eigen::VectorXd v = Eigen::VectorXd::Zero(mesh.n_interior);
        for (int i = 0; i < mesh.n_interior; ++i) {
            const double s = (mesh.node(i) - spec.center) / spec.width;
            if (std::abs(s) < 1.0) v[i] = spec.height * std::exp(1.0 - 1.0 / (1.0 - s * s));
        }
        return StateVec(std::move(v), mesh.h);
    }
    throw std::invalid_argument("psi preset: unknown kind '" + spec.kind + "'");
}

} // namespace paraopt
