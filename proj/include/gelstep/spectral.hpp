#pragma once

// Fast diagonalization of the tensor-product stiffness/mass pair.
//
// Per axis, the 1D stiffness K1 and lumped mass M1 (restricted to the free
// indices) are diagonalized as K1 V = M1 V Λ with Vᵀ M1 V = I. On the
// tensor grid K = Σ K1 ⊗ M1 and W = ⊗ M1 share the basis 𝒱 = ⊗ V with
// 𝒱ᵀ W 𝒱 = I and 𝒱ᵀ K 𝒱 = diag(μ), μ the sums of 1D eigenvalues. Any
// operator W 𝒱 diag(φ(μ)) 𝒱ᵀ W is then inverted by 𝒱 diag(1/φ(μ)) 𝒱ᵀ.

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <vector>

#include "gelstep/grid.hpp"

namespace gelstep {

struct AxisBasis {
    int first = 0;  // free indices are [first, first + size)
    Eigen::MatrixXd v;
    Eigen::VectorXd lambda;

    int size() const { return static_cast<int>(lambda.size()); }
};

/// Generalized eigenbasis of the 1D hat-function stiffness and trapezoid
/// mass on n nodes, with optional Dirichlet conditions at either end.
inline AxisBasis axis_basis(int n, double h, bool fixed_lo, bool fixed_hi) {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    for (int e = 0; e < n - 1; ++e) {
        k(e, e) += 1 / h;
        k(e + 1, e + 1) += 1 / h;
        k(e, e + 1) -= 1 / h;
        k(e + 1, e) -= 1 / h;
        m(e) += h / 2;
        m(e + 1) += h / 2;
    }
    AxisBasis b;
    b.first = fixed_lo ? 1 : 0;
    const int size = n - b.first - (fixed_hi ? 1 : 0);
    const Eigen::MatrixXd kf = k.block(b.first, b.first, size, size);
    const Eigen::VectorXd isq = m.segment(b.first, size).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd s = isq.asDiagonal() * kf * isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    b.v = isq.asDiagonal() * es.eigenvectors();
    b.lambda = es.eigenvalues().cwiseMax(0.0);
    if (!fixed_lo && !fixed_hi) b.lambda(0) = 0.0;  // constants, exactly
    return b;
}

template <int D>
class TensorSpectrum {
public:
    /// Neumann on every axis (ψ) or the Dirichlet faces of the grid (y).
    TensorSpectrum(const Grid<D>& g, bool dirichlet) : n_(g.n()) {
        for (int a = 0; a < D; ++a) {
            bool lo = false, hi = false;
            if (dirichlet) {
                switch (g.faces()) {
                    case DirichletFaces::OneFace:
                        lo = a == 0;
                        break;
                    case DirichletFaces::TwoFaces:
                        lo = hi = a == 0;
                        break;
                    case DirichletFaces::FullBoundary:
                        lo = hi = true;
                        break;
                }
            }
            axes_[a] = axis_basis(g.n(), g.h(), lo, hi);
        }
        std::size_t count = 1;
        for (const auto& ax : axes_) count *= static_cast<std::size_t>(ax.size());
        mu_.assign(count, 0.0);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t r = i;
            for (int a = 0; a < D; ++a) {
                const int s = axes_[a].size();
                mu_[i] += axes_[a].lambda(static_cast<Eigen::Index>(r % s));
                r /= s;
            }
        }
    }

    const std::vector<double>& eigenvalues() const { return mu_; }

    /// z = 𝒱 diag(inv_phi(μ)) 𝒱ᵀ g on the free nodes; zero elsewhere.
    ScalarField apply(const ScalarField& g, const std::function<double(double)>& inv_phi) const {
        std::vector<double> c = gather(g);
        transform(c, true);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] *= inv_phi(mu_[i]);
        transform(c, false);
        return scatter(c);
    }

private:
    std::vector<double> gather(const ScalarField& f) const {
        std::vector<double> out(mu_.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f[full_index(i)];
        return out;
    }

    ScalarField scatter(const std::vector<double>& c) const {
        std::size_t total = 1;
        for (int a = 0; a < D; ++a) total *= static_cast<std::size_t>(n_);
        ScalarField out(total, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) out[full_index(i)] = c[i];
        return out;
    }

    std::size_t full_index(std::size_t i) const {
        std::size_t r = i, idx = 0, stride = 1;
        for (int a = 0; a < D; ++a) {
            const std::size_t s = static_cast<std::size_t>(axes_[a].size());
            idx += (r % s + static_cast<std::size_t>(axes_[a].first)) * stride;
            r /= s;
            stride *= static_cast<std::size_t>(n_);
        }
        return idx;
    }

    // Applies Vᵀ (forward) or V along every axis of the free-node block.
    void transform(std::vector<double>& c, bool forward) const {
        std::size_t inner = 1;
        for (int a = 0; a < D; ++a) {
            const auto& ax = axes_[a];
            const std::size_t s = static_cast<std::size_t>(ax.size());
            const std::size_t outer = c.size() / (inner * s);
            Eigen::VectorXd line(ax.size());
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * inner * s + in;
                    for (std::size_t j = 0; j < s; ++j) line(static_cast<Eigen::Index>(j)) = c[base + j * inner];
                    const Eigen::VectorXd r = forward ? Eigen::VectorXd(ax.v.transpose() * line) : Eigen::VectorXd(ax.v * line);
                    for (std::size_t j = 0; j < s; ++j) c[base + j * inner] = r(static_cast<Eigen::Index>(j));
                }
            inner *= s;
        }
    }

    int n_;
    std::array<AxisBasis, D> axes_;
    std::vector<double> mu_;
};

}  // namespace gelstep
