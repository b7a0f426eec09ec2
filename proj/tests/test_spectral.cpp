#include "paraopt/control_space.hpp"
#include "paraopt/presets.hpp"
#include "paraopt/spectral_operator.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace paraopt;
using Catch::Approx;

namespace {

StateVec random_state(const Mesh1D& mesh, std::mt19937& rng) {
    std::normal_distribution<double> dist;
    Eigen::VectorXd v(mesh.n_interior);
    for (int i = 0; i < mesh.n_interior; ++i) v[i] = dist(rng);
    return StateVec(std::move(v), mesh.h);
}

} // namespace

TEST_CASE("constant-coefficient Laplacian eigenvalues match the closed form") {
    const Mesh1D mesh(3); // h = 1/4
    const auto op = assemble_operator(CoefficientField::constant_diffusion(mesh, 1.0), mesh);

    // (4/h^2) sin^2(k pi h / 2) = 64 sin^2(k pi / 8)
    const double expected[3] = {32.0 - 16.0 * std::sqrt(2.0), 32.0, 32.0 + 16.0 * std::sqrt(2.0)};
    REQUIRE(op.k_modes() == 3);
    for (int k = 0; k < 3; ++k)
        REQUIRE(op.eigenvalues()[k] == Approx(expected[k]).epsilon(1e-12));
}

TEST_CASE("scaling the coefficient scales the spectrum") {
    const Mesh1D mesh(17);
    const double c = 2.5;
    const auto base = assemble_operator(CoefficientField::constant_diffusion(mesh, 1.0), mesh);
    const auto scaled = assemble_operator(CoefficientField::constant_diffusion(mesh, c), mesh);
    for (int k = 0; k < mesh.n_interior; ++k)
        REQUIRE(scaled.eigenvalues()[k] == Approx(c * base.eigenvalues()[k]).epsilon(1e-12));
}

TEST_CASE("oscillating coefficient keeps the spectrum inside the Rayleigh bracket") {
    const Mesh1D mesh(255);
    const double eps = 0.125;
    const auto periodic = PeriodicCoefficient1D::sinusoidal(2.0, 1.0);
    const auto op = assemble_operator(oscillating_coefficient(periodic, eps, mesh), mesh);
    const double lambda1_unit = laplacian_lambda1(mesh);
    REQUIRE(op.lambda1() >= periodic.m_low() * lambda1_unit);
    REQUIRE(op.lambda1() <= periodic.m_high() * lambda1_unit);

    // Direct Rayleigh evaluation on the first eigenvector.
    const StateVec phi1 = op.mode(0);
    const double rayleigh = inner(op.apply(phi1), phi1);
    REQUIRE(rayleigh == Approx(op.lambda1()).epsilon(1e-10));
}

TEST_CASE("eigenpairs satisfy the operator invariants") {
    const Mesh1D mesh(31);
    const auto periodic = PeriodicCoefficient1D::sinusoidal(2.0, 0.7);
    const auto op = assemble_operator(oscillating_coefficient(periodic, 0.5, mesh), mesh);

    for (int k = 1; k < op.k_modes(); ++k)
        REQUIRE(op.eigenvalues()[k] >= op.eigenvalues()[k - 1]);
    REQUIRE(op.lambda1() > 0.0);

    Eigen::MatrixXd gram = mesh.h * op.modes().transpose() * op.modes();
    gram -= Eigen::MatrixXd::Identity(op.k_modes(), op.k_modes());
    REQUIRE(gram.cwiseAbs().maxCoeff() < 1e-10);

    for (int k : {0, 7, 30}) {
        const StateVec phi = op.mode(k);
        const StateVec Aphi = op.apply(phi);
        const StateVec diff(Aphi.values - op.eigenvalues()[k] * phi.values, mesh.h);
        REQUIRE(diff.norm() <= 1e-8 * op.eigenvalues()[k]);
    }
}

TEST_CASE("oversized reaction coefficients are rejected with the bound named") {
    const Mesh1D mesh(15);
    Eigen::VectorXd big = Eigen::VectorXd::Constant(mesh.n_interior, laplacian_lambda1(mesh) + 0.1);
    REQUIRE_THROWS_WITH(CoefficientField::reaction(mesh, big),
                        Catch::Matchers::ContainsSubstring("first"));
    REQUIRE_THROWS(assemble_operator(CoefficientField::constant_diffusion(mesh, 1.0), mesh, 99));
}

TEST_CASE("semigroup identities") {
    const Mesh1D mesh(63);
    const auto op = assemble_operator(
        oscillating_coefficient(PeriodicCoefficient1D::sinusoidal(2.0, 0.8), 0.25, mesh), mesh);
    std::mt19937 rng(7);
    const StateVec v = random_state(mesh, rng);

    SECTION("t = 0 is the identity") {
        const StateVec w = op.semigroup_apply(0.0, v);
        REQUIRE((w.values - v.values).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("eigenvector invariance") {
        const StateVec phi = op.mode(0);
        const StateVec w = op.semigroup_apply(1.0, phi);
        const StateVec diff(w.values - std::exp(-op.lambda1()) * phi.values, mesh.h);
        REQUIRE(diff.norm() < 1e-13);
    }

    SECTION("semigroup law T_2 = T_1 T_1") {
        const StateVec once = op.semigroup_apply(2.0, v);
        const StateVec twice = op.semigroup_apply(1.0, op.semigroup_apply(1.0, v));
        REQUIRE(StateVec(once.values - twice.values, mesh.h).norm() < 1e-12 * v.norm());
    }

    SECTION("contraction with the spectral decay rate") {
        for (double t : {0.05, 0.3, 1.4}) {
            const double decayed = op.semigroup_apply(t, v).norm();
            REQUIRE(decayed <= v.norm());
            REQUIRE(decayed <= std::exp(-op.lambda1() * t) * v.norm() + 1e-12);
        }
    }

    SECTION("self-adjointness") {
        const StateVec u = random_state(mesh, rng);
        const double lhs = inner(op.semigroup_apply(0.7, u), v);
        const double rhs = inner(u, op.semigroup_apply(0.7, v));
        REQUIRE(lhs == Approx(rhs).margin(1e-12 * u.norm() * v.norm()));
    }

    SECTION("negative time rejected") {
        REQUIRE_THROWS_AS(op.semigroup_apply(-0.1, v), std::invalid_argument);
    }
}

TEST_CASE("resolvent identities") {
    const Mesh1D mesh(63);
    const auto op = assemble_operator(
        oscillating_coefficient(PeriodicCoefficient1D::sinusoidal(2.0, 0.5), 0.25, mesh), mesh);

    SECTION("eigenvector case") {
        const double s = 0.7;
        const StateVec phi = op.mode(2);
        const StateVec w = op.resolvent_apply(s, phi);
        const StateVec diff(w.values - phi.values / (s + op.eigenvalues()[2]), mesh.h);
        REQUIRE(diff.norm() < 1e-13);
    }

    SECTION("(sI + A) inverts the resolvent") {
        std::mt19937 rng(11);
        const StateVec v = random_state(mesh, rng);
        for (double s : {0.0, 1.3}) {
            const StateVec w = op.resolvent_apply(s, v);
            const StateVec back(s * w.values + op.apply(w).values, mesh.h);
            REQUIRE(StateVec(back.values - v.values, mesh.h).norm() <= 1e-8 * v.norm());
        }
    }

    SECTION("s below -lambda_1 rejected") {
        const StateVec v = op.mode(0);
        REQUIRE_THROWS_AS(op.resolvent_apply(-op.lambda1() - 1.0, v), std::invalid_argument);
    }
}

TEST_CASE("A^{-1} sin(pi x) approaches the continuum eigenpair under refinement") {
    double prev_err = 1e9;
    for (int n : {31, 63, 127}) {
        const Mesh1D mesh(n);
        const auto op = assemble_operator(CoefficientField::constant_diffusion(mesh, 1.0), mesh);
        const StateVec v = sine_mode(mesh, 1);
        const StateVec w = op.resolvent_apply(0.0, v);
        const StateVec diff(w.values - v.values / (M_PI * M_PI), mesh.h);
        const double err = diff.norm();
        REQUIRE(err < prev_err);
        prev_err = err;
    }
    REQUIRE(prev_err < 1e-4);
}

TEST_CASE("observation operator") {
    const Mesh1D mesh(63);
    const auto op = assemble_operator(CoefficientField::constant_diffusion(mesh, 1.5), mesh);
    std::mt19937 rng(3);
    const StateVec eta = random_state(mesh, rng);

    SECTION("full mask at zero lag is the identity") {
        const StateVec w = observe(op, ControlMask::full(mesh), 0.0, eta);
        REQUIRE((w.values - eta.values).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("zero state stays zero") {
        const StateVec zero(Eigen::VectorXd::Zero(mesh.n_interior), mesh.h);
        const auto mask = ControlMask::from_interval(mesh, 0.2, 0.6);
        for (double lag : {0.0, 0.4}) REQUIRE(observe(op, mask, lag, zero).norm() == 0.0);
    }

    SECTION("restriction only shrinks the decayed norm") {
        const auto mask = ControlMask::from_interval(mesh, 0.3, 0.8);
        const double lag = 0.35;
        REQUIRE(observe(op, mask, lag, eta).norm() <=
                std::exp(-op.lambda1() * lag) * eta.norm() + 1e-12);
    }
}

TEST_CASE("input map") {
    const Mesh1D mesh(31);
    Eigen::VectorXd lambda(1);
    lambda << 1.0;
    const auto op = DiscreteOperator::modal(mesh, lambda);
    const auto mask = ControlMask::full(mesh);
    const double tau = 0.8;
    const TimeGrid grid(tau, 65);

    SECTION("zero control maps to zero") {
        const auto u = ControlTrajectory::zero(grid, mesh.n_interior, mesh.h);
        REQUIRE(input_map(op, mask, u, grid).norm() == 0.0);
    }

    SECTION("constant control along an eigenmode integrates in closed form") {
        const double c = 1.7;
        Eigen::MatrixXd samples(mesh.n_interior, grid.n_t);
        for (int i = 0; i < grid.n_t; ++i) samples.col(i) = c * op.mode(0).values;
        const auto u = ControlTrajectory::from_samples(grid, samples, mesh.h);
        const StateVec z = input_map(op, mask, u, grid);
        const double expected = c * (1.0 - std::exp(-tau)); // lambda = 1
        const StateVec diff(z.values - expected * op.mode(0).values, mesh.h);
        REQUIRE(diff.norm() < 1e-10);
    }

    SECTION("grid mismatch is rejected") {
        const TimeGrid other(tau, 33);
        const auto u = ControlTrajectory::zero(other, mesh.n_interior, mesh.h);
        REQUIRE_THROWS_AS(input_map(op, mask, u, grid), std::invalid_argument);
    }
}

TEST_CASE("input map quadrature converges at fourth order") {
    const Mesh1D mesh(31);
    const auto op = assemble_operator(CoefficientField::constant_diffusion(mesh, 1.0), mesh, 8);
    const auto mask = ControlMask::from_interval(mesh, 0.25, 0.75);
    const double tau = 1.0;

    auto smooth_control = [&](const TimeGrid& grid) {
        Eigen::MatrixXd samples(mesh.n_interior, grid.n_t);
        for (int i = 0; i < grid.n_t; ++i) {
            const double t = grid.node(i);
            for (int j = 0; j < mesh.n_interior; ++j)
                samples(j, i) = std::sin(2.0 * t + 0.3) * std::exp(-mesh.node(j));
        }
        return ControlTrajectory::from_samples(grid, samples, mesh.h);
    };

    const TimeGrid ref_grid(tau, 1025);
    const StateVec ref = input_map(op, mask, smooth_control(ref_grid), ref_grid);

    double prev_err = 0.0;
    std::vector<double> errors;
    for (int n_t : {9, 17, 33}) {
        const TimeGrid grid(tau, n_t);
        const StateVec z = input_map(op, mask, smooth_control(grid), grid);
        errors.push_back(StateVec(z.values - ref.values, mesh.h).norm());
    }
    (void)prev_err;
    for (std::size_t i = 1; i < errors.size(); ++i) {
        const double ratio = errors[i - 1] / errors[i];
        REQUIRE(ratio > 10.0); // ~16 for a fourth-order rule
        REQUIRE(ratio < 30.0);
    }
}

TEST_CASE("free reach time") {
    const Mesh1D mesh(31);
    Eigen::VectorXd lambda(1);
    lambda << 1.0;
    const auto op = DiscreteOperator::modal(mesh, lambda);

    SECTION("states already inside the ball report zero") {
        const StateVec psi(0.5 * op.mode(0).values, mesh.h);
        REQUIRE(free_reach_time(op, psi, 1.0) == 0.0);
    }

    SECTION("single-mode closed form ||psi|| e^{-t} = r") {
        const StateVec psi(2.0 * op.mode(0).values, mesh.h);
        REQUIRE(free_reach_time(op, psi, 1.0) == Approx(std::log(2.0)).margin(1e-8));
    }

    SECTION("doubling the radius never increases the reach time") {
        const auto op2 = assemble_operator(CoefficientField::constant_diffusion(mesh, 1.0), mesh);
        std::mt19937 rng(5);
        const StateVec psi = random_state(mesh, rng);
        double r = 0.1 * psi.norm();
        double prev = free_reach_time(op2, psi, r);
        for (int i = 0; i < 4; ++i) {
            r *= 2.0;
            const double next = free_reach_time(op2, psi, r);
            REQUIRE(next <= prev + 1e-12);
            prev = next;
        }
    }
}

TEST_CASE("shipped psi presets are spectrally complete on full-mode operators") {
    const Mesh1D mesh(255);
    const auto op = assemble_operator(
        oscillating_coefficient(PeriodicCoefficient1D::sinusoidal(2.0, 1.0), 0.25, mesh), mesh);
    PsiSpec modes;
    modes.kind = "modes";
    modes.coeffs = {2.0, 0.5};
    PsiSpec bump;
    bump.kind = "bump";
    for (const PsiSpec& spec : {modes, bump}) {
        const StateVec psi = make_psi(spec, mesh);
        REQUIRE(op.spectral_completeness(psi) >= 1.0 - 1e-8);
    }
}

TEST_CASE("from_modes validates its inputs") {
    const Mesh1D mesh(15);
    Eigen::VectorXd lambda(2);
    lambda << 1.0, 4.0;
    Eigen::MatrixXd modes(mesh.n_interior, 2);
    modes.col(0) = sine_mode(mesh, 1).values;
    modes.col(1) = sine_mode(mesh, 2).values;
    REQUIRE_NOTHROW(DiscreteOperator::from_modes(mesh, lambda, modes));

    Eigen::VectorXd descending(2);
    descending << 4.0, 1.0;
    REQUIRE_THROWS_AS(DiscreteOperator::from_modes(mesh, descending, modes),
                      std::invalid_argument);

    Eigen::MatrixXd skewed = modes;
    skewed.col(1) += 0.5 * modes.col(0);
    REQUIRE_THROWS_AS(DiscreteOperator::from_modes(mesh, lambda, skewed), std::invalid_argument);
}
