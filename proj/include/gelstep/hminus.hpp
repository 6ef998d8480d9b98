#pragma once

// Discrete Neumann Laplacian and the negative-norm inner product on
// mean-free nodal fields.
//
// The operator is K = Σ_axis K1 ⊗ (trapezoid masses of the other axes), the
// stiffness matrix of tensor-product hat functions with lumped mass. K is
// symmetric positive semidefinite with kernel = constants, and W⁻¹K (W the
// quadrature weights) is the reflecting five/seven-point stencil. The
// discrete Poisson problem L u = rhs is solved as K u = W rhs.

#include <cmath>
#include <string>
#include <vector>

#include "gelstep/errors.hpp"
#include "gelstep/grid.hpp"

namespace gelstep {

template <int D>
class NeumannLaplacian {
public:
    explicit NeumannLaplacian(const Grid<D>& grid) : grid_(grid) {
        const std::size_t n = grid_.size();
        diag_.assign(n, 0.0);
        const double h = grid_.h();
        for (std::size_t node = 0; node < n; ++node) {
            const auto ix = grid_.multi(node);
            double d = 0.0;
            for (int a = 0; a < D; ++a) {
                const bool end_a = ix[a] == 0 || ix[a] == grid_.n() - 1;
                double others = 1.0;
                for (int b = 0; b < D; ++b)
                    if (b != a) others *= (ix[b] == 0 || ix[b] == grid_.n() - 1) ? 0.5 * h : h;
                d += others * (end_a ? 1.0 / h : 2.0 / h);
            }
            diag_[node] = d;
        }
    }

    const Grid<D>& grid() const { return grid_; }

    /// Reflecting-boundary stencil -Δ_h u.
    ScalarField apply_L(const ScalarField& u) const {
        const std::size_t n = grid_.size();
        const double ih2 = 1.0 / (grid_.h() * grid_.h());
        const int nn = grid_.n();
        ScalarField out(n, 0.0);
        for (std::size_t node = 0; node < n; ++node) {
            const auto ix = grid_.multi(node);
            double s = 0.0;
            for (int a = 0; a < D; ++a) {
                const std::size_t st = grid_.stride(a);
                const double lo = ix[a] > 0 ? u[node - st] : u[node + st];
                const double hi = ix[a] < nn - 1 ? u[node + st] : u[node - st];
                s += (2.0 * u[node] - lo - hi) * ih2;
            }
            out[node] = s;
        }
        return out;
    }

    /// Stiffness form K u = W ⊙ (L u).
    ScalarField apply_K(const ScalarField& u) const {
        ScalarField out = apply_L(u);
        const auto& w = grid_.weights();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= w[i];
        return out;
    }

    /// Discrete Dirichlet form ∫ ∇u·∇v = uᵀ K v.
    double dirichlet_form(const ScalarField& u, const ScalarField& v) const {
        const ScalarField kv = apply_K(v);
        CompensatedSum s;
        for (std::size_t i = 0; i < u.size(); ++i) s.add(u[i] * kv[i]);
        return s.value();
    }

    /// Solves L u = rhs with mean(u) = 0. `tol` is the relative residual
    /// target of the preconditioned conjugate gradient iteration.
    ScalarField solve_poisson_meanfree(const ScalarField& rhs, double tol = 1e-10) const {
        const std::size_t n = grid_.size();
        if (rhs.size() != n) throw ValidationError("Poisson right-hand side has wrong length");
        const auto& w = grid_.weights();
        double rhs_norm = 0.0;
        for (double r : rhs) rhs_norm = std::max(rhs_norm, std::abs(r));
        const double m = grid_.mean(rhs);
        if (std::abs(m) > 1e-10 * std::max(rhs_norm, 1e-300) && std::abs(m) > 0.0)
            throw NotMeanFree("Poisson right-hand side has mean " + std::to_string(m));

        // b = W rhs, projected onto 1⊥ so the singular system is consistent.
        ScalarField b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = w[i] * rhs[i];
        project_out_constants(b);
        const double bnorm = std::sqrt(dot(b, b));
        ScalarField u(n, 0.0);
        if (bnorm == 0.0) return u;

        ScalarField r = b;
        ScalarField z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag_[i];
        project_out_constants(z);
        ScalarField pv = z;
        double rz = dot(r, z);
        const std::size_t budget = 10 * n;
        bool converged = false;
        for (std::size_t it = 0; it < budget; ++it) {
            const ScalarField kp = apply_K(pv);
            const double pkp = dot(pv, kp);
            if (!(pkp > 0.0)) break;
            const double alpha = rz / pkp;
            for (std::size_t i = 0; i < n; ++i) {
                u[i] += alpha * pv[i];
                r[i] -= alpha * kp[i];
            }
            if (std::sqrt(dot(r, r)) <= tol * bnorm) {
                converged = true;
                break;
            }
            for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag_[i];
            project_out_constants(z);
            const double rz_new = dot(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < n; ++i) pv[i] = z[i] + beta * pv[i];
        }
        if (!converged) {
            // Recompute the true residual before giving up.
            const ScalarField ku = apply_K(u);
            double res = 0.0;
            for (std::size_t i = 0; i < n; ++i) res += (b[i] - ku[i]) * (b[i] - ku[i]);
            if (std::sqrt(res) > tol * bnorm)
                throw SolverStagnation("Poisson solve: relative residual " + std::to_string(std::sqrt(res) / bnorm) +
                                       " above " + std::to_string(tol) + " after " + std::to_string(budget) +
                                       " iterations");
        }
        const double mu = grid_.mean(u);
        for (double& x : u) x -= mu;
        return u;
    }

    /// ⟨φ1, φ2⟩ = ∫ ∇u1·∇u2 with u_i = (-Δ)^{-1} φ_i.
    double hminus_inner(const ScalarField& phi1, const ScalarField& phi2, double tol = 1e-10) const {
        const ScalarField u1 = solve_poisson_meanfree(phi1, tol);
        const ScalarField u2 = (&phi1 == &phi2) ? u1 : solve_poisson_meanfree(phi2, tol);
        return dirichlet_form(u1, u2);
    }

    double hminus_norm_sq(const ScalarField& phi, double tol = 1e-10) const { return hminus_inner(phi, phi, tol); }

private:
    static double dot(const ScalarField& a, const ScalarField& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }

    static void project_out_constants(ScalarField& v) {
        double s = 0.0;
        for (double x : v) s += x;
        s /= static_cast<double>(v.size());
        for (double& x : v) x -= s;
    }

    Grid<D> grid_;
    ScalarField diag_;
};

/// Subtracts the quadrature mean.
template <int D>
ScalarField remove_mean(const Grid<D>& g, ScalarField f) {
    const double m = g.mean(f);
    for (double& x : f) x -= m;
    return f;
}

}  // namespace gelstep
