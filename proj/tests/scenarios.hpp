#pragma once

// Shared fixtures: parameter sets, families and random admissible states.

#include <random>
#include <string>
#include <vector>

#include "gelstep/energy.hpp"
#include "gelstep/fields.hpp"
#include "oracles.hpp"

namespace scenario {

using namespace gelstep;

inline PotentialParams test_params() {
    PotentialParams p;
    p.alpha = 1.0;
    p.p = 6.0;
    p.c_det = 4.0;
    p.q = 9.0;
    p.gamma = 0.05;
    p.beta = 3.0;
    p.a_dw = 1.0;
    p.b_kw = 0.1;
    p.eta_visc = 0.7;
    return p;
}

struct NamedFamily {
    std::string name;
    DirichletFamily<2> family;
};

inline std::vector<NamedFamily> families() {
    Mat<2> a1;
    a1(0, 0) = 0.5;
    a1(0, 1) = 0.2;
    a1(1, 1) = -0.3;
    std::mt19937_64 rng(99);
    const auto r = random_rotation<2>(rng);
    return {
        {"identity", DirichletFamily<2>::identity()},
        {"affine", DirichletFamily<2>::affine(Mat<2>::identity(), a1, Vec<2>{{0.0, 0.1}}, Vec<2>{{0.1, 0.0}}, 0.2)},
        {"gentle_bend", DirichletFamily<2>::gentle_bend(0.2, 1.0, 0.2)},
        {"rotated_bend", DirichletFamily<2>::gentle_bend(0.15, 1.0, 0.2).rotated(r)},
    };
}

struct State {
    VectorField<2> y;
    ScalarField psi;
};

/// y = id + smooth displacement vanishing on Γ_D, ψ = smooth field around a
/// random offset.
inline State random_state(const Grid<2>& g, std::uint64_t seed, double disp = 0.06, double amp = 0.8) {
    State s;
    s.y = g.identity_field();
    const auto u = smooth_random_displacement(g, seed, 2, disp);
    for (std::size_t k = 0; k < g.size(); ++k) s.y[k] += u[k];
    s.psi = smooth_random_field(g, seed + 1000, 3, amp);
    std::mt19937_64 rng(seed);
    const double shift = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
    for (double& v : s.psi) v += shift;
    return s;
}

/// Perturbation of `base` keeping y on Γ_D and the ψ-mean.
inline State nearby_state(const Grid<2>& g, const State& base, std::uint64_t seed, double scale = 0.3) {
    State s = base;
    const auto u = smooth_random_displacement(g, seed, 2, 0.03 * scale);
    for (std::size_t k = 0; k < g.size(); ++k) s.y[k] += u[k];
    const auto d = remove_mean(g, smooth_random_field(g, seed + 77, 3, scale));
    for (std::size_t k = 0; k < g.size(); ++k) s.psi[k] += d[k];
    return s;
}

/// Random nodal direction tangent to the constraints: zero on Γ_D for y,
/// orthogonal to the quadrature weights for ψ.
inline std::pair<VectorField<2>, ScalarField> random_direction(const Grid<2>& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorField<2> dy(g.size());
    ScalarField dp(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.is_dirichlet(k)) dy[k] = Vec<2>{{u(rng), u(rng)}};
        dp[k] = u(rng);
    }
    const auto& w = g.weights();
    double ww = 0, wd = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        ww += w[k] * w[k];
        wd += w[k] * dp[k];
    }
    for (std::size_t k = 0; k < g.size(); ++k) dp[k] -= w[k] * wd / ww;
    return {dy, dp};
}

}  // namespace scenario
