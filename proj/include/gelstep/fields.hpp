#pragma once

// Seeded smooth nodal fields: low-mode cosine sums used for initial data,
// verification test fields and randomized states.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "gelstep/grid.hpp"

namespace gelstep {

/// Σ_k a_k Π_axis cos(π k_axis x_axis + φ_{k,axis}) over 0 ≤ k_axis ≤ kmax,
/// k ≠ 0, with a_k uniform in [-1, 1] scaled by 1/|k|. The result is
/// rescaled to max-norm `amplitude`.
template <int D>
ScalarField smooth_random_field(const Grid<D>& g, std::uint64_t seed, int kmax, double amplitude) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    struct Mode {
        std::array<int, D> k;
        std::array<double, D> phi;
        double a;
    };
    std::vector<Mode> modes;
    std::array<int, D> k{};
    for (;;) {
        bool nonzero = false;
        double k2 = 0.0;
        for (int a = 0; a < D; ++a) {
            nonzero = nonzero || k[a] != 0;
            k2 += k[a] * k[a];
        }
        if (nonzero) {
            Mode m;
            m.k = k;
            for (int a = 0; a < D; ++a) m.phi[a] = phase(rng);
            m.a = coef(rng) / std::sqrt(k2);
            modes.push_back(m);
        }
        int a = 0;
        while (a < D && ++k[a] > kmax) k[a++] = 0;
        if (a == D) break;
    }
    ScalarField f(g.size());
    double peak = 0.0;
    for (std::size_t node = 0; node < g.size(); ++node) {
        const Vec<D> x = g.coord(node);
        double s = 0.0;
        for (const auto& m : modes) {
            double p = m.a;
            for (int a = 0; a < D; ++a) p *= std::cos(std::numbers::pi * m.k[a] * x[a] + m.phi[a]);
            s += p;
        }
        f[node] = s;
        peak = std::max(peak, std::abs(s));
    }
    if (peak > 0)
        for (double& v : f) v *= amplitude / peak;
    return f;
}

/// Smooth nonnegative weight vanishing exactly on Γ_D.
template <int D>
double dirichlet_cutoff(const Grid<D>& g, const Vec<D>& x) {
    switch (g.faces()) {
        case DirichletFaces::OneFace: return x[0];
        case DirichletFaces::TwoFaces: return 4.0 * x[0] * (1.0 - x[0]);
        case DirichletFaces::FullBoundary: {
            double c = 1.0;
            for (int a = 0; a < D; ++a) c *= 4.0 * x[a] * (1.0 - x[a]);
            return c;
        }
    }
    return 0.0;
}

/// Smooth vector field vanishing on Γ_D (exactly zero at Γ_D nodes).
template <int D>
VectorField<D> smooth_random_displacement(const Grid<D>& g, std::uint64_t seed, int kmax, double amplitude) {
    VectorField<D> u(g.size());
    for (int i = 0; i < D; ++i) {
        const ScalarField c = smooth_random_field(g, seed * 7919 + static_cast<std::uint64_t>(i) + 1, kmax, amplitude);
        for (std::size_t node = 0; node < g.size(); ++node)
            u[node][i] = g.is_dirichlet(node) ? 0.0 : c[node] * dirichlet_cutoff(g, g.coord(node));
    }
    return u;
}

}  // namespace gelstep
