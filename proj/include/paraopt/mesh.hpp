#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace paraopt {

/// Uniform grid of interior points on (0,1) with homogeneous Dirichlet ends.
/// Node i (0-based) sits at x = (i+1)*h, h = 1/(n_interior+1).
struct Mesh1D {
    int n_interior = 0;
    double h = 0.0;

    explicit Mesh1D(int n) : n_interior(n), h(1.0 / (n + 1)) {
        if (n < 2) throw std::invalid_argument("Mesh1D: need at least 2 interior points");
    }

    double node(int i) const { return (i + 1) * h; }
    double edge_midpoint(int e) const { return (e + 0.5) * h; } // e in [0, n_interior]
    bool operator==(const Mesh1D& other) const { return n_interior == other.n_interior; }
};

/// Grid function on the interior nodes; norms and inner products carry the
/// h weight so that values agree with the L2(0,1) quantities they sample.
struct StateVec {
    Eigen::VectorXd values;
    double h = 0.0;

    StateVec() = default;
    StateVec(Eigen::VectorXd v, double h_) : values(std::move(v)), h(h_) {}
    StateVec(const Mesh1D& mesh, Eigen::VectorXd v) : values(std::move(v)), h(mesh.h) {
        if (values.size() != mesh.n_interior)
            throw std::invalid_argument("StateVec: size does not match mesh");
    }

    int size() const { return static_cast<int>(values.size()); }
    double norm() const { return std::sqrt(h * values.squaredNorm()); }
};

inline double inner(const StateVec& a, const StateVec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("inner: size mismatch");
    return a.h * a.values.dot(b.values);
}

/// Samples of the k-th Dirichlet sine mode sqrt(2)*sin(k*pi*x); these are
/// exactly orthonormal in the h-weighted inner product for 1 <= k <= n.
inline StateVec sine_mode(const Mesh1D& mesh, int k) {
    if (k < 1 || k > mesh.n_interior)
        throw std::invalid_argument("sine_mode: k out of range");
    Eigen::VectorXd v(mesh.n_interior);
    const double s = std::sqrt(2.0);
    for (int i = 0; i < mesh.n_interior; ++i) v[i] = s * std::sin(k * M_PI * mesh.node(i));
    return StateVec(v, mesh.h);
}

} // namespace paraopt
