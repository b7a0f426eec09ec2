#pragma once

#include "paraopt/coefficient.hpp"
#include "paraopt/mesh.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace paraopt {

/// Spectral realization of a discretized self-adjoint elliptic generator.
///
/// Holds the k smallest eigenpairs of the flux-form finite-difference matrix
/// (orthonormal in the h-weighted inner product) and realizes the semigroup
/// e^{-tA}, the resolvent (sI+A)^{-1} and the stiffness action through them.
class DiscreteOperator {
public:
    /// Assembles the tridiagonal matrix for `coeff` and keeps its `k_modes`
    /// smallest eigenpairs. Rejects reaction fields that break positivity.
    static DiscreteOperator assemble(const CoefficientField& coeff, const Mesh1D& mesh,
                                     int k_modes) {
        const int n = mesh.n_interior;
        if (k_modes < 1 || k_modes > n)
            throw std::invalid_argument("assemble_operator: k_modes must be in [1, n_interior]");

        Eigen::VectorXd diag(n), sub(n - 1);
        const double inv_h2 = 1.0 / (mesh.h * mesh.h);
        if (coeff.kind == CoeffKind::diffusion) {
            // (Au)_i = -(a_{i+1/2}(u_{i+1}-u_i) - a_{i-1/2}(u_i-u_{i-1}))/h^2
            for (int i = 0; i < n; ++i)
                diag[i] = (coeff.values[i] + coeff.values[i + 1]) * inv_h2;
            for (int i = 0; i + 1 < n; ++i) sub[i] = -coeff.values[i + 1] * inv_h2;
        } else {
            // -Delta - a_eps
            for (int i = 0; i < n; ++i) diag[i] = 2.0 * inv_h2 - coeff.values[i];
            sub.setConstant(-inv_h2);
        }

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("assemble_operator: tridiagonal eigensolver failed");

        Eigen::VectorXd lambda = solver.eigenvalues().head(k_modes);
        if (lambda[0] <= 0.0) {
            if (coeff.kind == CoeffKind::reaction)
                throw std::invalid_argument(
                    "assemble_operator: reaction coefficient too large, smallest eigenvalue " +
                    std::to_string(lambda[0]) + " <= 0; sup-norm must stay below lambda_1 = " +
                    std::to_string(laplacian_lambda1(mesh)));
            throw std::runtime_error("assemble_operator: assembled matrix is not positive definite");
        }

        // Euclidean-orthonormal eigenvectors rescaled to h-weighted orthonormality.
        Eigen::MatrixXd modes =
            solver.eigenvectors().leftCols(k_modes) / std::sqrt(mesh.h);

        DiscreteOperator op(mesh, std::move(lambda), std::move(modes));
        op.diag_ = std::move(diag);
        op.sub_ = std::move(sub);
        return op;
    }

    /// Builds an operator directly from prescribed eigenpairs (h-orthonormal
    /// columns); used for synthetic modal instances.
    static DiscreteOperator from_modes(const Mesh1D& mesh, Eigen::VectorXd eigenvalues,
                                       Eigen::MatrixXd modes) {
        if (modes.rows() != mesh.n_interior || modes.cols() != eigenvalues.size())
            throw std::invalid_argument("from_modes: shape mismatch");
        for (int k = 0; k < eigenvalues.size(); ++k) {
            if (eigenvalues[k] <= 0.0)
                throw std::invalid_argument("from_modes: eigenvalues must be strictly positive");
            if (k > 0 && eigenvalues[k] < eigenvalues[k - 1])
                throw std::invalid_argument("from_modes: eigenvalues must be ascending");
        }
        Eigen::MatrixXd gram = mesh.h * modes.transpose() * modes;
        if ((gram - Eigen::MatrixXd::Identity(modes.cols(), modes.cols())).cwiseAbs().maxCoeff() >
            1e-10)
            throw std::invalid_argument("from_modes: columns are not h-orthonormal");
        return DiscreteOperator(mesh, std::move(eigenvalues), std::move(modes));
    }

    /// Modal operator with Dirichlet sine modes and prescribed eigenvalues.
    static DiscreteOperator modal(const Mesh1D& mesh, const Eigen::VectorXd& eigenvalues) {
        Eigen::MatrixXd modes(mesh.n_interior, eigenvalues.size());
        for (int k = 0; k < eigenvalues.size(); ++k)
            modes.col(k) = sine_mode(mesh, k + 1).values;
        return from_modes(mesh, eigenvalues, std::move(modes));
    }

    const Mesh1D& mesh() const { return mesh_; }
    const Eigen::VectorXd& eigenvalues() const { return lambda_; }
    const Eigen::MatrixXd& modes() const { return modes_; }
    int k_modes() const { return static_cast<int>(lambda_.size()); }
    double lambda1() const { return lambda_[0]; }

    StateVec mode(int k) const { return StateVec(modes_.col(k), mesh_.h); }

    /// h-weighted projection onto the retained modes.
    Eigen::VectorXd project(const StateVec& v) const {
        check(v);
        return mesh_.h * (modes_.transpose() * v.values);
    }

    StateVec reconstruct(const Eigen::VectorXd& coeffs) const {
        if (coeffs.size() != lambda_.size())
            throw std::invalid_argument("reconstruct: coefficient count mismatch");
        return StateVec(modes_ * coeffs, mesh_.h);
    }

    /// Fraction of ||v||^2 captured by the retained modes.
    double spectral_completeness(const StateVec& v) const {
        const double n2 = v.norm() * v.norm();
        if (n2 == 0.0) return 1.0;
        return project(v).squaredNorm() / n2;
    }

    /// Stiffness action A v. Uses the assembled tridiagonal matrix when the
    /// operator came from `assemble`, the spectral sum otherwise.
    StateVec apply(const StateVec& v) const {
        check(v);
        if (diag_) {
            const int n = mesh_.n_interior;
            Eigen::VectorXd out(n);
            for (int i = 0; i < n; ++i) {
                double acc = (*diag_)[i] * v.values[i];
                if (i > 0) acc += (*sub_)[i - 1] * v.values[i - 1];
                if (i + 1 < n) acc += (*sub_)[i] * v.values[i + 1];
                out[i] = acc;
            }
            return StateVec(std::move(out), mesh_.h);
        }
        return reconstruct(lambda_.cwiseProduct(project(v)));
    }

    /// Semigroup action e^{-tA} v = sum_k e^{-lambda_k t} <v, phi_k> phi_k.
    StateVec semigroup_apply(double t, const StateVec& v) const {
        if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be >= 0");
        check(v);
        if (t == 0.0) return v;
        Eigen::VectorXd c = project(v);
        for (int k = 0; k < c.size(); ++k) c[k] *= std::exp(-lambda_[k] * t);
        return reconstruct(c);
    }

    /// Resolvent (sI + A)^{-1} v; s = 0 gives A^{-1}.
    StateVec resolvent_apply(double s, const StateVec& v) const {
        if (s <= -lambda_[0])
            throw std::invalid_argument("resolvent_apply: s must exceed -lambda_1 = " +
                                        std::to_string(-lambda_[0]));
        check(v);
        Eigen::VectorXd c = project(v);
        for (int k = 0; k < c.size(); ++k) c[k] /= (s + lambda_[k]);
        return reconstruct(c);
    }

private:
    DiscreteOperator(const Mesh1D& mesh, Eigen::VectorXd lambda, Eigen::MatrixXd modes)
        : mesh_(mesh), lambda_(std::move(lambda)), modes_(std::move(modes)) {}

    void check(const StateVec& v) const {
        if (v.size() != mesh_.n_interior)
            throw std::invalid_argument("DiscreteOperator: state size does not match mesh");
    }

    Mesh1D mesh_;
    Eigen::VectorXd lambda_;
    Eigen::MatrixXd modes_; // n_interior x k_modes, h-orthonormal columns
    std::optional<Eigen::VectorXd> diag_, sub_;
};

inline DiscreteOperator assemble_operator(const CoefficientField& coeff, const Mesh1D& mesh,
                                          int k_modes) {
    return DiscreteOperator::assemble(coeff, mesh, k_modes);
}

inline DiscreteOperator assemble_operator(const CoefficientField& coeff, const Mesh1D& mesh) {
    return DiscreteOperator::assemble(coeff, mesh, mesh.n_interior);
}

} // namespace paraopt
