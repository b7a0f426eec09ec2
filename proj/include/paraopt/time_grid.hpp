#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace paraopt {

/// Composite-Simpson nodes on [0, tau]; n_t must be odd and >= 3.
struct TimeGrid {
    double tau = 0.0;
    int n_t = 0;

    TimeGrid() = default;
    TimeGrid(double tau_, int n_t_) : tau(tau_), n_t(n_t_) {
        if (!(tau > 0.0)) throw std::invalid_argument("TimeGrid: tau must be positive");
        if (n_t < 3 || n_t % 2 == 0)
            throw std::invalid_argument("TimeGrid: node count must be odd and >= 3");
    }

    double dt() const { return tau / (n_t - 1); }
    double node(int i) const { return i == n_t - 1 ? tau : i * dt(); }

    Eigen::VectorXd nodes() const {
        Eigen::VectorXd t(n_t);
        for (int i = 0; i < n_t; ++i) t[i] = node(i);
        return t;
    }

    /// Composite Simpson weights: dt/3 * {1,4,2,4,...,2,4,1}.
    Eigen::VectorXd weights() const {
        Eigen::VectorXd w(n_t);
        const double c = dt() / 3.0;
        w[0] = c;
        w[n_t - 1] = c;
        for (int i = 1; i < n_t - 1; ++i) w[i] = (i % 2 == 1) ? 4.0 * c : 2.0 * c;
        return w;
    }

    bool operator==(const TimeGrid& other) const {
        return tau == other.tau && n_t == other.n_t;
    }
};

/// Composite Simpson over a sampled integrand (odd count, uniform spacing).
template <typename F>
double simpson(double a, double b, int n_nodes, F&& f) {
    if (n_nodes < 3 || n_nodes % 2 == 0)
        throw std::invalid_argument("simpson: node count must be odd and >= 3");
    const double dx = (b - a) / (n_nodes - 1);
    double acc = f(a) + f(b);
    for (int i = 1; i < n_nodes - 1; ++i) acc += ((i % 2 == 1) ? 4.0 : 2.0) * f(a + i * dx);
    return acc * dx / 3.0;
}

} // namespace paraopt
