#pragma once

// Energy densities of the hydrogel model: Ogden-type elastic energy with a
// determinant barrier, hyperelastic (second-grade) energy, Ginzburg-Landau
// energy with a Korteweg term in the deformed frame, the swelling ramp g, and
// the frame-indifferent Kelvin-Voigt viscous potential.

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "gelstep/errors.hpp"
#include "gelstep/tensor.hpp"

namespace gelstep {

struct PotentialParams {
    double alpha = 1.0;     // |F|^p weight
    double p = 6.0;
    double c_det = 4.0;     // det^{-q} weight
    double q = 9.0;
    double gamma = 1e-2;    // hyperstress weight
    double beta = 3.0;
    double a_dw = 1.0;      // double-well height
    double b_kw = 1e-2;     // Korteweg weight
    double eta_visc = 1.0;  // viscosity scale
    double g_slope = 0.1;
    double g_lo = 0.8;
    double g_hi = 1.2;
    double g_delta = 0.5;
};

/// Checks the exponent chain, positivity of the constants and the swelling
/// ramp bounds for spatial dimension `d`. Throws ValidationError naming the
/// violated assumption.
inline void validate(const PotentialParams& pp, int d) {
    auto fail = [](const std::string& msg) { throw ValidationError(msg); };
    std::ostringstream os;
    if (!(pp.alpha > 0 && pp.c_det > 0 && pp.gamma > 0))
        fail("growth constants alpha, c, gamma must be positive");
    if (!(pp.p > 1 && pp.q > 1 && pp.beta > 1)) fail("exponents p, q, beta must exceed 1");
    if (!(pp.beta > d)) {
        os << "exponent chain violated: beta > d required (beta=" << pp.beta << ", d=" << d << ")";
        fail(os.str());
    }
    if (!(pp.p >= 2.0 * pp.beta)) {
        os << "exponent chain violated: p >= 2*beta required (p=" << pp.p << ", beta=" << pp.beta << ")";
        fail(os.str());
    }
    const double q_min = pp.beta * d / (pp.beta - d);
    if (!(pp.q >= q_min)) {
        os << "exponent chain violated: q >= beta*d/(beta-d) = " << q_min << " required (q=" << pp.q << ")";
        fail(os.str());
    }
    if (!(pp.a_dw > 0 && pp.b_kw > 0)) fail("double-well height a and Korteweg weight b must be positive");
    if (!(pp.eta_visc > 0)) fail("viscosity scale eta must be positive");
    if (!(pp.g_slope > 0 && pp.g_delta > 0)) fail("swelling ramp slope and band width must be positive");
    if (!(pp.g_lo > 0 && pp.g_lo < 1 && pp.g_hi > 1)) fail("swelling bounds must satisfy 0 < g_lo < 1 < g_hi");
    const double upper_gap = pp.g_hi - (1.0 + pp.g_slope);
    const double lower_gap = (1.0 - pp.g_slope) - pp.g_lo;
    if (!(upper_gap > 0 && lower_gap > 0))
        fail("swelling ramp must satisfy g_lo < 1 - g_slope and g_hi > 1 + g_slope");
    // Fritsch-Carlson monotonicity of the cubic blends.
    if (pp.g_slope * pp.g_delta > 3.0 * upper_gap || pp.g_slope * pp.g_delta > 3.0 * lower_gap)
        fail("swelling ramp blend not monotone: need g_slope*g_delta <= 3*(band gap)");
}

struct ScalarAndSlope {
    double value;
    double derivative;
};

/// Swelling ramp: 1 + s z on [-1, 1], g_hi above 1 + delta, g_lo below
/// -1 - delta, C1 cubic Hermite blends in between.
inline ScalarAndSlope g_eval(double z, const PotentialParams& pp) {
    const double s = pp.g_slope;
    const double delta = pp.g_delta;
    if (z >= -1.0 && z <= 1.0) return {1.0 + s * z, s};
    if (z >= 1.0 + delta) return {pp.g_hi, 0.0};
    if (z <= -1.0 - delta) return {pp.g_lo, 0.0};

    double p0, m0, p1, m1, t;
    if (z > 1.0) {
        t = (z - 1.0) / delta;
        p0 = 1.0 + s;
        m0 = s * delta;
        p1 = pp.g_hi;
        m1 = 0.0;
    } else {
        t = (z + 1.0 + delta) / delta;
        p0 = pp.g_lo;
        m0 = 0.0;
        p1 = 1.0 - s;
        m1 = s * delta;
    }
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double value = (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * p1 +
                         (t3 - t2) * m1;
    const double slope = ((6 * t2 - 6 * t) * p0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * p1 +
                          (3 * t2 - 2 * t) * m1) /
                         delta;
    return {value, slope};
}

template <int D>
struct MatValue {
    double value;
    Mat<D> stress;
};

/// Wel(A) = (α/p)|A|^p + (c/q) det(A)^{-q} and ∂A Wel.
template <int D>
MatValue<D> wel_eval(const Mat<D>& a, const PotentialParams& pp) {
    const double j = det(a);
    if (!(j > 0.0)) throw NonpositiveDeterminant("Wel evaluated at det(A) = " + std::to_string(j));
    const double n2 = frob_dot(a, a);
    const double np = std::pow(n2, 0.5 * pp.p);
    const double jq = std::pow(j, -pp.q);
    const double value = pp.alpha / pp.p * np + pp.c_det / pp.q * jq;
    // d|A|^p/dA = p |A|^{p-2} A ;  d det^{-q}/dA = -q det^{-q} A^{-T}
    const Mat<D> inv_t = transpose(adjugate(a) / j);
    Mat<D> stress = (pp.alpha * (n2 > 0.0 ? np / n2 : 0.0)) * a;
    stress -= (pp.c_det * jq) * inv_t;
    return {value, stress};
}

template <int D>
struct Tensor3Value {
    double value;
    Tensor3<D> stress;
};

/// Why(G) = (γ/β)|G|^β and ∂G Why = γ|G|^{β-2} G.
template <int D>
Tensor3Value<D> why_eval(const Tensor3<D>& g, const PotentialParams& pp) {
    const double n2 = frob_dot(g, g);
    if (n2 == 0.0) return {0.0, Tensor3<D>{}};
    const double nb = std::pow(n2, 0.5 * pp.beta);
    return {pp.gamma / pp.beta * nb, (pp.gamma * nb / n2) * g};
}

template <int D>
struct PhaseFieldValue {
    double value;
    double d_psi;
    Vec<D> d_gradpsi;
    Mat<D> d_F;
};

/// Wpf = a/4 (ψ²-1)² + b/2 |F^{-T}∇ψ|² with all partial derivatives.
/// d_F satisfies d_F : G = -b (F^{-1}F^{-T}∇ψ) · (G^T F^{-T}∇ψ).
template <int D>
PhaseFieldValue<D> wpf_eval(double psi, const Vec<D>& grad_psi, const Mat<D>& f, const PotentialParams& pp) {
    const double j = det(f);
    if (!(j > 0.0)) throw NonpositiveDeterminant("Wpf evaluated at det(F) = " + std::to_string(j));
    const Mat<D> finv = adjugate(f) / j;
    const Vec<D> u = transpose(finv) * grad_psi;  // F^{-T}∇ψ
    const Vec<D> w = finv * u;                    // F^{-1}F^{-T}∇ψ
    const double well = psi * psi - 1.0;
    PhaseFieldValue<D> r;
    r.value = 0.25 * pp.a_dw * well * well + 0.5 * pp.b_kw * dot(u, u);
    r.d_psi = pp.a_dw * (psi * psi * psi - psi);
    r.d_gradpsi = pp.b_kw * w;
    r.d_F = (-pp.b_kw) * outer(u, w);
    return r;
}

/// ∂ψ W = -∂A Wel(F/g(ψ)) : F g'(ψ)/g(ψ)² + a(ψ³ - ψ).
template <int D>
double dpsi_total(const Mat<D>& f, double psi, const PotentialParams& pp) {
    const auto [g, dg] = g_eval(psi, pp);
    const auto wel = wel_eval<D>(f / g, pp);
    return -double_dot(wel.stress, f) * dg / (g * g) + pp.a_dw * (psi * psi * psi - psi);
}

/// Fourth-order viscosity tensor 𝔻(C, ψ) applied to Ċ. Leave `apply` empty
/// for the isotropic default 𝔻 = η·Id on symmetric matrices. A user-supplied
/// map must be linear in Ċ, symmetric, and return symmetric matrices.
template <int D>
struct ViscosityModel {
    std::function<Mat<D>(const Mat<D>& c, double psi, const Mat<D>& c_dot)> apply;

    Mat<D> operator()(const Mat<D>& c, double psi, const Mat<D>& c_dot, const PotentialParams& pp) const {
        if (apply) return apply(c, psi, c_dot);
        return pp.eta_visc * c_dot;
    }
};

/// V(F, Ḟ, ψ) = ½ Ċ : 𝔻 Ċ with Ċ = ḞᵀF + FᵀḞ; ∂Ḟ V = 2 F (𝔻 Ċ).
template <int D>
MatValue<D> viscous_eval(const Mat<D>& f, const Mat<D>& f_dot, double psi, const PotentialParams& pp,
                         const ViscosityModel<D>& model = {}) {
    const Mat<D> ft = transpose(f);
    const Mat<D> c = ft * f;
    const Mat<D> c_dot = transpose(f_dot) * f + ft * f_dot;
    const Mat<D> dc = model(c, psi, c_dot, pp);
    return {0.5 * double_dot(c_dot, dc), 2.0 * (f * dc)};
}

/// Constants (c, C) of c|Ċ|² ≤ V̂ ≤ C|Ċ|² for the isotropic default.
struct KornConstants {
    double lower;
    double upper;
};

inline KornConstants viscous_bounds(const PotentialParams& pp) { return {0.5 * pp.eta_visc, 0.5 * pp.eta_visc}; }

// ---------------------------------------------------------------------------
// Random sampling helpers shared by diagnostics and tests.

template <int D>
Mat<D> random_rotation(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat<D> r;
    if constexpr (D == 2) {
        const double th = std::numbers::pi * u(rng);
        r(0, 0) = std::cos(th);
        r(0, 1) = -std::sin(th);
        r(1, 0) = std::sin(th);
        r(1, 1) = std::cos(th);
    } else {
        std::normal_distribution<double> n(0.0, 1.0);
        double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
        const double s = 1.0 / std::sqrt(w * w + x * x + y * y + z * z);
        w *= s, x *= s, y *= s, z *= s;
        r(0, 0) = 1 - 2 * (y * y + z * z);
        r(0, 1) = 2 * (x * y - z * w);
        r(0, 2) = 2 * (x * z + y * w);
        r(1, 0) = 2 * (x * y + z * w);
        r(1, 1) = 1 - 2 * (x * x + z * z);
        r(1, 2) = 2 * (y * z - x * w);
        r(2, 0) = 2 * (x * z - y * w);
        r(2, 1) = 2 * (y * z + x * w);
        r(2, 2) = 1 - 2 * (x * x + y * y);
    }
    return r;
}

template <int D>
Mat<D> random_skew(std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Mat<D> s;
    for (int i = 0; i < D; ++i)
        for (int j = i + 1; j < D; ++j) {
            s(i, j) = u(rng);
            s(j, i) = -s(i, j);
        }
    return s;
}

/// Random element of GL+(d) near the identity: I + spread·U with a column
/// flip if needed, then rescaled.
template <int D>
Mat<D> random_gl_plus(std::mt19937_64& rng, double spread = 0.5) {
    std::uniform_real_distribution<double> u(-spread, spread);
    std::uniform_real_distribution<double> scale(0.6, 1.5);
    for (;;) {
        Mat<D> a = Mat<D>::identity();
        for (double& e : a.a) e += u(rng);
        double j = det(a);
        if (std::abs(j) < 1e-2) continue;
        if (j < 0)
            for (int i = 0; i < D; ++i) a(i, 0) = -a(i, 0);
        return scale(rng) * a;
    }
}

template <int D>
Mat<D> random_mat(std::mt19937_64& rng, double spread = 1.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    Mat<D> a;
    for (double& e : a.a) e = u(rng);
    return a;
}

template <int D>
Tensor3<D> random_tensor3(std::mt19937_64& rng, double spread = 1.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    Tensor3<D> g;
    for (double& e : g.a) e = u(rng);
    return g;
}

template <int D>
Vec<D> random_vec(std::mt19937_64& rng, double spread = 1.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    Vec<D> v;
    for (double& e : v.v) e = u(rng);
    return v;
}

// ---------------------------------------------------------------------------

/// Sampled verification of the structural assumptions: static frame
/// indifference of Wel and Why, dynamic frame indifference of V, and the
/// empirical constant of |∂A Wel(A) Aᵀ| ≤ C (1 + Wel(A)).
struct DiagnosticReport {
    int samples = 0;
    double static_wel_residual = 0.0;   // max |Wel(RA) - Wel(A)| / (1 + |Wel(A)|)
    double static_why_residual = 0.0;   // max |Why(RG) - Why(G)| / (1 + |Why(G)|)
    double dynamic_visc_residual = 0.0; // max |V(RF, SRF + RḞ) - V(F, Ḟ)| / (1 + |V|)
    double stress_control_constant = 0.0;
    KornConstants korn{};
    double threshold = 1e-10;

    bool pass() const {
        return static_wel_residual < threshold && static_why_residual < threshold &&
               dynamic_visc_residual < threshold && std::isfinite(stress_control_constant);
    }
};

template <int D>
DiagnosticReport check_assumptions(const PotentialParams& pp, int samples, std::uint64_t seed,
                                   const ViscosityModel<D>& model = {}) {
    if (samples < 1) throw ValidationError("check_assumptions needs at least one sample");
    std::mt19937_64 rng(seed);
    DiagnosticReport rep;
    rep.samples = samples;
    rep.korn = viscous_bounds(pp);
    for (int s = 0; s < samples; ++s) {
        const Mat<D> a = random_gl_plus<D>(rng);
        const Mat<D> r = random_rotation<D>(rng);
        const Tensor3<D> g = random_tensor3<D>(rng);
        const Mat<D> f_dot = random_mat<D>(rng);
        const Mat<D> skew = random_skew<D>(rng);
        const double psi = std::uniform_real_distribution<double>(-1.5, 1.5)(rng);

        const auto w = wel_eval(a, pp);
        const auto wr = wel_eval(r * a, pp);
        rep.static_wel_residual =
            std::max(rep.static_wel_residual, std::abs(wr.value - w.value) / (1.0 + std::abs(w.value)));

        const double h = why_eval(g, pp).value;
        const double hr = why_eval(left_multiply(r, g), pp).value;
        rep.static_why_residual = std::max(rep.static_why_residual, std::abs(hr - h) / (1.0 + std::abs(h)));

        const double v = viscous_eval(a, f_dot, psi, pp, model).value;
        const Mat<D> ra = r * a;
        const double vr = viscous_eval(ra, skew * ra + r * f_dot, psi, pp, model).value;
        rep.dynamic_visc_residual = std::max(rep.dynamic_visc_residual, std::abs(vr - v) / (1.0 + std::abs(v)));

        const double k = norm(w.stress * transpose(a)) / (1.0 + w.value);
        rep.stress_control_constant = std::max(rep.stress_control_constant, k);
    }
    return rep;
}

}  // namespace gelstep
