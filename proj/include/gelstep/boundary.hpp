#pragma once

// Time-dependent Dirichlet data vD(t, ·) and the composition v = vD(t, y).
// Each family supplies closed-form derivatives up to third order in y and
// the mixed time derivatives needed for the external power.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gelstep/errors.hpp"
#include "gelstep/grid.hpp"
#include "gelstep/potentials.hpp"
#include "gelstep/tensor.hpp"

namespace gelstep {

/// Pointwise derivatives of vD at (t, y).
template <int D>
struct FamilyJet {
    Vec<D> v;                      // vD
    Mat<D> a;                      // ∇_y vD
    Tensor3<D> b;                  // b(i,l,m) = ∂_l ∂_m vD_i
    std::array<Tensor3<D>, D> c;   // c[r](i,l,m) = ∂_r ∂_l ∂_m vD_i
    Vec<D> dv;                     // ∂t vD
    Mat<D> da;                     // ∂t ∇_y vD
    Tensor3<D> db;                 // ∂t ∇²_y vD
};

enum class FamilyKind { Identity, Affine, GentleBend };

inline std::string to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::Identity: return "identity";
        case FamilyKind::Affine: return "affine";
        case FamilyKind::GentleBend: return "gentle_bend";
    }
    return "?";
}

template <int D>
class DirichletFamily {
public:
    static DirichletFamily identity() { return DirichletFamily(FamilyKind::Identity); }

    /// vD(t, y) = (A0 + t A1) y + b0 + t b1
    static DirichletFamily affine(const Mat<D>& a0, const Mat<D>& a1, const Vec<D>& b0, const Vec<D>& b1,
                                  double horizon) {
        DirichletFamily f(FamilyKind::Affine);
        f.a0_ = a0;
        f.a1_ = a1;
        f.b0_ = b0;
        f.b1_ = b1;
        f.horizon_ = horizon;
        f.validate();
        return f;
    }

    /// vD(t, y) = y + κ (t/T) (sin(ω π y₂), 0, ...)
    static DirichletFamily gentle_bend(double amplitude, double frequency, double horizon) {
        if (!(horizon > 0)) throw ValidationError("gentle_bend needs a positive horizon T");
        DirichletFamily f(FamilyKind::GentleBend);
        f.kappa_ = amplitude;
        f.omega_ = frequency;
        f.horizon_ = horizon;
        f.validate();
        return f;
    }

    /// Same family composed with a fixed rotation: vD ↦ R vD.
    DirichletFamily rotated(const Mat<D>& r) const {
        DirichletFamily f = *this;
        f.rot_ = r * rot_;
        f.rotated_ = true;
        f.validate();
        return f;
    }

    FamilyKind kind() const { return kind_; }
    double horizon() const { return horizon_; }
    double amplitude() const { return kappa_; }
    double frequency() const { return omega_; }

    /// Largest |(∇_y vD)^{-1}| seen during construction-time sampling.
    double inverse_bound() const { return inverse_bound_; }

    FamilyJet<D> jet(double t, const Vec<D>& y) const {
        FamilyJet<D> j;
        switch (kind_) {
            case FamilyKind::Identity:
                j.v = y;
                j.a = Mat<D>::identity();
                break;
            case FamilyKind::Affine: {
                j.a = a0_ + t * a1_;
                j.v = j.a * y + b0_ + t * b1_;
                j.dv = a1_ * y + b1_;
                j.da = a1_;
                break;
            }
            case FamilyKind::GentleBend: {
                const double s = t / horizon_;
                const double ds = 1.0 / horizon_;
                const double k = omega_ * std::numbers::pi;
                const double sn = std::sin(k * y[1]);
                const double cs = std::cos(k * y[1]);
                j.v = y;
                j.v[0] += kappa_ * s * sn;
                j.a = Mat<D>::identity();
                j.a(0, 1) += kappa_ * s * k * cs;
                j.b(0, 1, 1) = -kappa_ * s * k * k * sn;
                j.c[1](0, 1, 1) = -kappa_ * s * k * k * k * cs;
                j.dv[0] = kappa_ * ds * sn;
                j.da(0, 1) = kappa_ * ds * k * cs;
                j.db(0, 1, 1) = -kappa_ * ds * k * k * sn;
                break;
            }
        }
        if (rotated_) {
            j.v = rot_ * j.v;
            j.a = rot_ * j.a;
            j.b = left_multiply(rot_, j.b);
            for (auto& cr : j.c) cr = left_multiply(rot_, cr);
            j.dv = rot_ * j.dv;
            j.da = rot_ * j.da;
            j.db = left_multiply(rot_, j.db);
        }
        return j;
    }

    /// sup over y of |∇²_y vD(T, y)| in closed form.
    double analytic_hessian_sup() const {
        if (kind_ != FamilyKind::GentleBend) return 0.0;
        const double k = omega_ * std::numbers::pi;
        return std::abs(kappa_) * k * k;
    }

private:
    explicit DirichletFamily(FamilyKind k) : kind_(k) {}

    // Derivative consistency and invertibility on a fixed sample cloud.
    void validate() {
        std::mt19937_64 rng(0x5eedf00dULL);
        std::uniform_real_distribution<double> uy(-0.5, 1.5);
        std::uniform_real_distribution<double> ut(0.0, 1.0);
        const double step = 1e-5;
        const double tol = 1e-6;
        auto close = [&](double analytic, double numeric, double scale) {
            return std::abs(analytic - numeric) <= tol * (1.0 + scale);
        };
        inverse_bound_ = 0.0;
        for (int sample = 0; sample < 64; ++sample) {
            Vec<D> y;
            for (int i = 0; i < D; ++i) y[i] = uy(rng);
            const double t = (horizon_ > 0 ? horizon_ : 1.0) * ut(rng);
            const FamilyJet<D> j = jet(t, y);
            const double dj = det(j.a);
            if (!(dj > 1e-8))
                throw ValidationError("Dirichlet family: grad vD not invertible with positive determinant at a sample point");
            inverse_bound_ = std::max(inverse_bound_, norm(inverse(j.a)));
            for (int r = 0; r < D; ++r) {
                Vec<D> yp = y, ym = y;
                yp[r] += step;
                ym[r] -= step;
                const FamilyJet<D> jp = jet(t, yp), jm = jet(t, ym);
                for (int i = 0; i < D; ++i) {
                    if (!close(j.a(i, r), (jp.v[i] - jm.v[i]) / (2 * step), norm(j.a)))
                        throw ValidationError("Dirichlet family: grad vD inconsistent with vD");
                    for (int l = 0; l < D; ++l) {
                        if (!close(j.b(i, l, r), (jp.a(i, l) - jm.a(i, l)) / (2 * step), norm(j.b)))
                            throw ValidationError("Dirichlet family: second derivative inconsistent");
                        for (int m = 0; m < D; ++m)
                            if (!close(j.c[r](i, l, m), (jp.b(i, l, m) - jm.b(i, l, m)) / (2 * step), norm(j.c[r])))
                                throw ValidationError("Dirichlet family: third derivative inconsistent");
                    }
                }
            }
            const FamilyJet<D> tp = jet(t + step, y), tm = jet(t - step, y);
            for (int i = 0; i < D; ++i) {
                if (!close(j.dv[i], (tp.v[i] - tm.v[i]) / (2 * step), norm(j.dv)))
                    throw ValidationError("Dirichlet family: time derivative inconsistent");
                for (int l = 0; l < D; ++l) {
                    if (!close(j.da(i, l), (tp.a(i, l) - tm.a(i, l)) / (2 * step), norm(j.da)))
                        throw ValidationError("Dirichlet family: time derivative of grad vD inconsistent");
                    for (int m = 0; m < D; ++m)
                        if (!close(j.db(i, l, m), (tp.b(i, l, m) - tm.b(i, l, m)) / (2 * step), norm(j.db)))
                            throw ValidationError("Dirichlet family: time derivative of second derivative inconsistent");
                }
            }
        }
    }

    FamilyKind kind_;
    Mat<D> a0_ = Mat<D>::identity();
    Mat<D> a1_{};
    Vec<D> b0_{}, b1_{};
    double kappa_ = 0.0;
    double omega_ = 1.0;
    double horizon_ = 1.0;
    Mat<D> rot_ = Mat<D>::identity();
    bool rotated_ = false;
    double inverse_bound_ = 1.0;
};

// ---------------------------------------------------------------------------

/// F = A ∇y and (∇F)_{ijk} = Σ B_{ilm} Gy_{lj} Gy_{mk} + Σ A_{il} Hy_{ljk}.
template <int D>
Tensor3<D> compose_second_gradient(const Mat<D>& a, const Tensor3<D>& b, const Mat<D>& gy, const Tensor3<D>& hy) {
    Tensor3<D> out = left_multiply(a, hy);
    for (int i = 0; i < D; ++i)
        for (int l = 0; l < D; ++l)
            for (int m = 0; m < D; ++m) {
                const double bilm = b(i, l, m);
                if (bilm == 0.0) continue;
                for (int j = 0; j < D; ++j)
                    for (int k = 0; k < D; ++k) out(i, j, k) += bilm * gy(l, j) * gy(m, k);
            }
    return out;
}

template <int D>
struct DeformationBundle {
    VectorField<D> v;
    std::vector<Mat<D>> f;
    std::vector<Tensor3<D>> grad_f;
    std::vector<Mat<D>> dt_f;  // ∂t F at fixed y
    std::vector<Mat<D>> l;     // (∂t∇vD)(∇vD)^{-1}
};

template <int D>
DeformationBundle<D> compose_deformation(double t, const VectorField<D>& y, const DirichletFamily<D>& fam,
                                         const Grid<D>& grid) {
    const auto gy = grad_field(grid, y);
    const auto hy = hess_field(grid, y);
    DeformationBundle<D> out;
    const std::size_t n = grid.size();
    out.v.resize(n);
    out.f.resize(n);
    out.grad_f.resize(n);
    out.dt_f.resize(n);
    out.l.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const FamilyJet<D> j = fam.jet(t, y[k]);
        out.v[k] = j.v;
        out.f[k] = j.a * gy[k];
        out.grad_f[k] = compose_second_gradient(j.a, j.b, gy[k], hy[k]);
        out.dt_f[k] = j.da * gy[k];
        out.l[k] = j.da * inverse(j.a);
    }
    return out;
}

template <int D>
struct PowerFields {
    std::vector<Mat<D>> l;
    std::vector<Tensor3<D>> dt_grad_f;
};

template <int D>
PowerFields<D> external_power_fields(double t, const VectorField<D>& y, const DirichletFamily<D>& fam,
                                     const Grid<D>& grid) {
    const auto gy = grad_field(grid, y);
    const auto hy = hess_field(grid, y);
    PowerFields<D> out;
    out.l.resize(grid.size());
    out.dt_grad_f.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const FamilyJet<D> j = fam.jet(t, y[k]);
        out.l[k] = j.da * inverse(j.a);
        out.dt_grad_f[k] = compose_second_gradient(j.da, j.db, gy[k], hy[k]);
    }
    return out;
}

struct SmallnessReport {
    double lhs = 0.0;           // (γ/α) sup |∇²vD|^β
    double sup_hessian = 0.0;
    double delta0 = 0.1;
    bool pass() const { return lhs < delta0; }
};

/// Samples |∇²_y vD(t, y)| over t ∈ [0, T] and the given points plus ten
/// jittered copies of each.
template <int D>
SmallnessReport smallness_check(const DirichletFamily<D>& fam, const PotentialParams& pp, double horizon,
                                const std::vector<Vec<D>>& points, double delta0 = 0.1,
                                std::uint64_t seed = 1) {
    SmallnessReport rep;
    rep.delta0 = delta0;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    std::vector<Vec<D>> cloud = points;
    cloud.reserve(points.size() * 11);
    for (const auto& p : points)
        for (int r = 0; r < 10; ++r) {
            Vec<D> q = p;
            for (int i = 0; i < D; ++i) q[i] += jitter(rng);
            cloud.push_back(q);
        }
    constexpr int kTimes = 33;
    for (int s = 0; s < kTimes; ++s) {
        const double t = horizon * s / (kTimes - 1);
        for (const auto& p : cloud) rep.sup_hessian = std::max(rep.sup_hessian, norm(fam.jet(t, p).b));
    }
    rep.lhs = pp.gamma / pp.alpha * std::pow(rep.sup_hessian, pp.beta);
    return rep;
}

}  // namespace gelstep
