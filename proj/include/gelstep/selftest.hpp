#pragma once

// Built-in oracle battery: finite-difference gradients of the incremental
// functional, the Neumann Poisson solver against a dense pseudoinverse, and
// sampled frame indifference of the potentials.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "gelstep/fields.hpp"
#include "gelstep/solver.hpp"
#include "gelstep/verification.hpp"

namespace gelstep {

namespace detail {

inline PotentialParams selftest_params() {
    PotentialParams p;
    p.gamma = 0.05;
    p.b_kw = 0.1;
    p.eta_visc = 0.7;
    return p;
}

/// Smooth admissible state with ψ inside the linear part of the swelling
/// ramp, so finite-difference stencils never straddle a kink.
inline std::pair<VectorField<2>, ScalarField> selftest_state(const Grid<2>& g, std::uint64_t seed) {
    VectorField<2> y = g.identity_field();
    const auto u = smooth_random_displacement(g, seed, 2, 0.05);
    for (std::size_t k = 0; k < g.size(); ++k) y[k] += u[k];
    ScalarField psi = smooth_random_field(g, seed + 500, 3, 0.5);
    std::mt19937_64 rng(seed);
    const double shift = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
    for (double& v : psi) v += shift;
    return {y, psi};
}

}  // namespace detail

/// Directional derivatives of the incremental functional against a
/// sixth-order central difference along random nodal directions tangent to
/// the constraints. Error is |an - fd| / max(|an|, 1e-8 ‖∇𝔽‖‖d‖).
inline Verdict gradient_oracle(int states = 10, int directions = 20, double tol = 1e-5, std::uint64_t seed = 11) {
    const Grid<2> g(9);
    const std::vector<DirichletFamily<2>> families = {
        DirichletFamily<2>::identity(),
        DirichletFamily<2>::affine(Mat<2>::identity(), Mat<2>{{0.3, 0.1, 0.0, -0.2}}, Vec<2>{}, Vec<2>{{0.05, 0.0}}, 0.2),
        DirichletFamily<2>::gentle_bend(0.2, 1.0, 0.2)};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int s = 0; s < states; ++s) {
        const Model<2> model(g, families[static_cast<std::size_t>(s) % families.size()], detail::selftest_params());
        const auto [y_prev, psi_prev] = detail::selftest_state(g, seed * 100 + static_cast<std::uint64_t>(s));
        auto [y, psi] = detail::selftest_state(g, seed * 100 + static_cast<std::uint64_t>(s) + 50);
        const double shift = g.mean(psi_prev) - g.mean(psi);
        for (double& v : psi) v += shift;
        const IncrementalFunctional<2> fn(model, 0.1, 0.02, y_prev, psi_prev);
        VectorField<2> gy;
        ScalarField gp;
        if (!fn.value_and_gradient(y, psi, gy, gp).finite()) throw InfiniteEnergy("selftest state is inadmissible");
        double gnorm = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) gnorm += dot(gy[k], gy[k]) + gp[k] * gp[k];
        gnorm = std::sqrt(gnorm);
        for (int d = 0; d < directions; ++d) {
            VectorField<2> dy(g.size());
            ScalarField dp(g.size());
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (!g.is_dirichlet(k))
                    for (int a = 0; a < 2; ++a) dy[k][a] = u(rng);
                dp[k] = u(rng);
            }
            dp = remove_mean(g, dp);
            double an = 0.0, dn = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) {
                an += dot(gy[k], dy[k]) + gp[k] * dp[k];
                dn += dot(dy[k], dy[k]) + dp[k] * dp[k];
            }
            const double h = 2e-5;
            auto at = [&](double e) {
                VectorField<2> ye = y;
                ScalarField pe = psi;
                for (std::size_t k = 0; k < g.size(); ++k) {
                    ye[k] += e * dy[k];
                    pe[k] += e * dp[k];
                }
                return fn.value(ye, pe).total;
            };
            const double fd = (-at(-3 * h) + 9 * at(-2 * h) - 45 * at(-h) + 45 * at(h) - 9 * at(2 * h) + at(3 * h)) /
                              (60 * h);
            const double scale = std::max(std::abs(an), 1e-8 * gnorm * std::sqrt(dn));
            worst = std::max(worst, std::abs(an - fd) / scale);
        }
    }
    return verdict_le("gradient_fd_relative_error", worst, tol);
}

/// Mean-free Poisson solve on a 9×9 grid against the eigendecomposition
/// pseudoinverse of the dense element-assembled operator.
inline Verdict poisson_oracle(double tol = 1e-8, std::uint64_t seed = 17) {
    const int n = 9;
    const Grid<2> g(n);
    const NeumannLaplacian<2> lap(g);
    const double h = g.h();
    Eigen::MatrixXd k1 = Eigen::MatrixXd::Zero(n, n), m1 = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < n - 1; ++e) {
        k1(e, e) += 1 / h;
        k1(e + 1, e + 1) += 1 / h;
        k1(e, e + 1) -= 1 / h;
        k1(e + 1, e) -= 1 / h;
        m1(e, e) += h / 2;
        m1(e + 1, e + 1) += h / 2;
    }
    const Eigen::Index nn = n * n;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(nn, nn);
    Eigen::VectorXd w(nn);
    // Node id = i0 + n i1: axis 0 is the inner factor.
    for (int i1 = 0; i1 < n; ++i1)
        for (int j1 = 0; j1 < n; ++j1)
            for (int i0 = 0; i0 < n; ++i0)
                for (int j0 = 0; j0 < n; ++j0)
                    k(i0 + n * i1, j0 + n * j1) = m1(i1, j1) * k1(i0, j0) + k1(i1, j1) * m1(i0, j0);
    for (int i1 = 0; i1 < n; ++i1)
        for (int i0 = 0; i0 < n; ++i0) w(i0 + n * i1) = m1(i1, i1) * m1(i0, i0);
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd s = sw.cwiseInverse().asDiagonal() * k * sw.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const double cut = 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        ScalarField rhs(g.size());
        for (double& v : rhs) v = u(rng);
        rhs = remove_mean(g, rhs);
        const Eigen::VectorXd b = sw.asDiagonal() * Eigen::Map<const Eigen::VectorXd>(rhs.data(), nn);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(nn);
        for (Eigen::Index i = 0; i < nn; ++i) {
            const double lam = es.eigenvalues()(i);
            if (std::abs(lam) > cut) v += es.eigenvectors().col(i) * (es.eigenvectors().col(i).dot(b) / lam);
        }
        const Eigen::VectorXd ref = sw.cwiseInverse().asDiagonal() * v;
        const auto sol = lap.solve_poisson_meanfree(rhs, 1e-13);
        double err = 0.0;
        for (Eigen::Index i = 0; i < nn; ++i) err = std::max(err, std::abs(sol[static_cast<std::size_t>(i)] - ref(i)));
        worst = std::max(worst, err / ref.cwiseAbs().maxCoeff());
    }
    return verdict_le("poisson_dense_relative_error", worst, tol);
}

/// Observed order of ‖cos(πx₁)‖²_{Ṽ₀} → 1/(2π²) over n = 17, 33, 65.
inline Verdict hminus_order_oracle(double min_order = 1.9) {
    std::vector<double> lh, le;
    const double pi = std::numbers::pi;
    for (int n : {17, 33, 65}) {
        const Grid<2> g(n);
        const NeumannLaplacian<2> lap(g);
        const auto phi = remove_mean(g, g.sample_scalar([&](const Vec<2>& x) { return std::cos(pi * x[0]); }));
        lh.push_back(std::log(g.h()));
        le.push_back(std::log(std::abs(lap.hminus_norm_sq(phi, 1e-13) - 1.0 / (2 * pi * pi))));
    }
    const double mh = (lh[0] + lh[1] + lh[2]) / 3, me = (le[0] + le[1] + le[2]) / 3;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
        num += (lh[i] - mh) * (le[i] - me);
        den += (lh[i] - mh) * (lh[i] - mh);
    }
    return verdict_ge("hminus_norm_order", num / den, min_order);
}

/// Static and dynamic frame-indifference residuals over random samples.
inline std::vector<Verdict> frame_indifference_oracle(int samples = 10000, double tol = 1e-10, std::uint64_t seed = 5) {
    const auto rep = check_assumptions<2>(detail::selftest_params(), samples, seed);
    return {verdict_le("static_wel_residual", rep.static_wel_residual, tol),
            verdict_le("static_why_residual", rep.static_why_residual, tol),
            verdict_le("dynamic_visc_residual", rep.dynamic_visc_residual, tol)};
}

inline std::vector<Verdict> run_selftest() {
    std::vector<Verdict> out = {gradient_oracle(), poisson_oracle(), hminus_order_oracle()};
    for (auto& v : frame_indifference_oracle()) out.push_back(std::move(v));
    return out;
}

}  // namespace gelstep
