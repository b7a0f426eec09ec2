#pragma once

#include "paraopt/mesh.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace paraopt {

enum class CoeffKind { diffusion, reaction };

/// First eigenvalue of the discrete Dirichlet Laplacian on the mesh,
/// (4/h^2) sin^2(pi h / 2); strictly below the continuum value pi^2.
inline double laplacian_lambda1(const Mesh1D& mesh) {
    const double h = mesh.h;
    const double s = std::sin(M_PI * h / 2.0);
    return 4.0 / (h * h) * s * s;
}

/// Mesh samples of the elliptic coefficient.
///
/// diffusion: per-edge values a(x_{i+1/2}), length n_interior + 1, all
/// inside the recorded ellipticity bounds [m_low, m_high] with m_low > 0.
/// reaction:  per-node values a(x_i), length n_interior, with sup-norm
/// strictly below the first eigenvalue of the unperturbed operator.
struct CoefficientField {
    CoeffKind kind = CoeffKind::diffusion;
    Eigen::VectorXd values;
    double m_low = 0.0;
    double m_high = 0.0;

    static CoefficientField diffusion(const Mesh1D& mesh, Eigen::VectorXd edge_values,
                                      double m_low, double m_high) {
        if (edge_values.size() != mesh.n_interior + 1)
            throw std::invalid_argument("CoefficientField: diffusion needs n_interior+1 edge values");
        if (!(m_low > 0.0))
            throw std::invalid_argument("CoefficientField: ellipticity bound m_low must be positive");
        for (int i = 0; i < edge_values.size(); ++i) {
            const double v = edge_values[i];
            if (v < m_low - 1e-12 || v > m_high + 1e-12)
                throw std::invalid_argument("CoefficientField: edge value " + std::to_string(v) +
                                            " outside [" + std::to_string(m_low) + ", " +
                                            std::to_string(m_high) + "]");
        }
        return CoefficientField{CoeffKind::diffusion, std::move(edge_values), m_low, m_high};
    }

    static CoefficientField constant_diffusion(const Mesh1D& mesh, double c) {
        return diffusion(mesh, Eigen::VectorXd::Constant(mesh.n_interior + 1, c), c, c);
    }

    static CoefficientField reaction(const Mesh1D& mesh, Eigen::VectorXd node_values) {
        if (node_values.size() != mesh.n_interior)
            throw std::invalid_argument("CoefficientField: reaction needs n_interior node values");
        const double sup = node_values.cwiseAbs().maxCoeff();
        const double lambda1 = laplacian_lambda1(mesh);
        if (!(sup < lambda1))
            throw std::invalid_argument(
                "CoefficientField: reaction sup-norm " + std::to_string(sup) +
                " must stay strictly below the first Laplacian eigenvalue " +
                std::to_string(lambda1));
        return CoefficientField{CoeffKind::reaction, std::move(node_values), -sup, sup};
    }
};

} // namespace paraopt
