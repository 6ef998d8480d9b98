#pragma once

// Assembly of the discrete free energy, its explicit time derivative, the
// viscous dissipation, and the incremental functional of one time step with
// its exact nodal gradient (adjoint of stencils and composition chain).

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gelstep/boundary.hpp"
#include "gelstep/errors.hpp"
#include "gelstep/grid.hpp"
#include "gelstep/hminus.hpp"
#include "gelstep/parallel.hpp"
#include "gelstep/potentials.hpp"
#include "gelstep/tensor.hpp"

namespace gelstep {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// How the viscous rate is formed from (y - y_prev)/τ: pushed through
/// ∇vD(t, y_prev) (default) or used as the raw gradient.
enum class RateComposition { Composed, Raw };

struct AssemblyOptions {
    double det_floor = 1e-8;
    RateComposition rate = RateComposition::Composed;
    double poisson_tol = 1e-13;
    int threads = 1;
};

/// Everything that stays fixed over a run.
template <int D>
struct Model {
    Grid<D> grid;
    NeumannLaplacian<D> laplacian;
    DirichletFamily<D> family;
    PotentialParams params;
    ViscosityModel<D> viscosity;
    AssemblyOptions options;

    Model(const Grid<D>& g, const DirichletFamily<D>& f, const PotentialParams& p, const AssemblyOptions& o = {},
          const ViscosityModel<D>& v = {})
        : grid(g), laplacian(grid), family(f), params(p), viscosity(v), options(o) {}
};

struct EnergyBreakdown {
    double f_el = 0.0;
    double f_pf = 0.0;
    double f_hy = 0.0;
    double total = 0.0;

    bool finite() const { return std::isfinite(total); }
    static EnergyBreakdown infinite() { return {kInfinity, kInfinity, kInfinity, kInfinity}; }
};

template <int D>
struct Kinematics {
    std::vector<Mat<D>> gy;
    std::vector<Tensor3<D>> hy;
    SidedGradients<D> gpsi;
};

template <int D>
Kinematics<D> kinematics(const Grid<D>& g, const VectorField<D>& y, const ScalarField& psi) {
    return {grad_field(g, y), hess_field(g, y), sided_gradients(g, psi)};
}

// ---------------------------------------------------------------------------
// Per-node evaluation.

template <int D>
struct LocalTerms {
    bool admissible = false;
    double el = 0.0, pf = 0.0, hy = 0.0;
    Mat<D> f;
    Tensor3<D> grad_f;
    Mat<D> s_f_el;   // ∂F Wel(F/g)
    Mat<D> s_f_pf;   // ∂F Wpf
    Tensor3<D> s_g;  // ∂G Why
    double s_psi = 0.0;
    std::array<Vec<D>, (1 << D)> s_gpsi;  // per one-sided gradient combination
};

template <int D>
LocalTerms<D> local_terms(const FamilyJet<D>& j, const Mat<D>& gy, const Tensor3<D>& hy, double psi,
                          const std::array<Vec<D>, (1 << D)>& gpsi, const PotentialParams& pp,
                          double det_floor) {
    LocalTerms<D> r;
    if (!(det(gy) > det_floor)) return r;
    r.f = j.a * gy;
    r.grad_f = compose_second_gradient(j.a, j.b, gy, hy);
    const auto [g, dg] = g_eval(psi, pp);
    const auto wel = wel_eval<D>(r.f / g, pp);
    // Korteweg term averaged over the one-sided gradients.
    constexpr double share = 1.0 / (1 << D);
    PhaseFieldValue<D> wpf{};
    for (int c = 0; c < (1 << D); ++c) {
        const auto part = wpf_eval(psi, gpsi[c], r.f, pp);
        wpf.value += share * part.value;
        wpf.d_psi += share * part.d_psi;
        wpf.d_F += share * part.d_F;
        r.s_gpsi[c] = share * part.d_gradpsi;
    }
    const auto why = why_eval(r.grad_f, pp);
    if (!std::isfinite(wel.value) || !std::isfinite(wpf.value) || !std::isfinite(why.value)) return r;
    r.admissible = true;
    r.el = wel.value;
    r.pf = wpf.value;
    r.hy = why.value;
    r.s_f_el = wel.stress / g;
    r.s_f_pf = wpf.d_F;
    r.s_g = why.stress;
    r.s_psi = -double_dot(wel.stress, r.f) * dg / (g * g) + wpf.d_psi;
    return r;
}

/// B(·,·,r) as a matrix.
template <int D>
Mat<D> slice_last(const Tensor3<D>& b, int r) {
    Mat<D> m;
    for (int i = 0; i < D; ++i)
        for (int l = 0; l < D; ++l) m(i, l) = b(i, l, r);
    return m;
}

inline bool family_is_curved(FamilyKind k) { return k == FamilyKind::GentleBend; }

template <int D>
struct LocalAdjoint {
    Vec<D> dy;
    Mat<D> dgy;
    Tensor3<D> dhy;
};

/// Pulls sensitivities (S_F, S_G) of (F, ∇F) back to (y, ∇y, ∇²y) through
/// F = A(y)∇y and ∇F = B(y)[∇y, ∇y] + A(y)∇²y.
template <int D>
LocalAdjoint<D> chain_adjoint(const FamilyJet<D>& j, const Mat<D>& gy, const Tensor3<D>& hy, const Mat<D>& s_f,
                              const Tensor3<D>& s_g, bool curved) {
    LocalAdjoint<D> out;
    out.dgy = transpose(j.a) * s_f;
    out.dhy = left_multiply(transpose(j.a), s_g);
    if (!curved) return out;
    const Mat<D> sfg = s_f * transpose(gy);
    for (int r = 0; r < D; ++r) {
        const Mat<D> br = slice_last(j.b, r);
        out.dy[r] = double_dot(br, sfg) + triple_dot(s_g, compose_second_gradient(br, j.c[r], gy, hy));
    }
    for (int i = 0; i < D; ++i)
        for (int jj = 0; jj < D; ++jj)
            for (int k = 0; k < D; ++k) {
                const double s = s_g(i, jj, k);
                if (s == 0.0) continue;
                for (int l = 0; l < D; ++l)
                    for (int m = 0; m < D; ++m) {
                        const double sb = s * j.b(i, l, m);
                        if (sb == 0.0) continue;
                        out.dgy(l, jj) += sb * gy(m, k);
                        out.dgy(m, k) += sb * gy(l, jj);
                    }
            }
    return out;
}

/// Forward tangent of (F, ∇F) along a perturbation (w, ∇w, ∇²w) of y.
template <int D>
std::pair<Mat<D>, Tensor3<D>> chain_tangent(const FamilyJet<D>& j, const Mat<D>& gy, const Tensor3<D>& hy,
                                            const Vec<D>& w, const Mat<D>& gw, const Tensor3<D>& hw) {
    Mat<D> da;
    Tensor3<D> db;
    for (int r = 0; r < D; ++r) {
        da += w[r] * slice_last(j.b, r);
        db += w[r] * j.c[r];
    }
    const Mat<D> df = da * gy + j.a * gw;
    Tensor3<D> dg = compose_second_gradient(da, db, gy, hy);
    dg += left_multiply(j.a, hw);
    for (int i = 0; i < D; ++i)
        for (int l = 0; l < D; ++l)
            for (int m = 0; m < D; ++m) {
                const double b = j.b(i, l, m);
                if (b == 0.0) continue;
                for (int jj = 0; jj < D; ++jj)
                    for (int k = 0; k < D; ++k) dg(i, jj, k) += b * (gw(l, jj) * gy(m, k) + gy(l, jj) * gw(m, k));
            }
    return {df, dg};
}

// ---------------------------------------------------------------------------

/// Chunked reduction helper: each chunk accumulates a compensated sum.
struct ChunkSums {
    std::vector<CompensatedSum> el, pf, hy;
    std::vector<char> ok;
    explicit ChunkSums(std::size_t k) : el(k), pf(k), hy(k), ok(k, 1) {}

    EnergyBreakdown total() const {
        EnergyBreakdown e;
        for (char c : ok)
            if (!c) return EnergyBreakdown::infinite();
        CompensatedSum a, b, c;
        for (std::size_t i = 0; i < el.size(); ++i) {
            a.add(el[i].value());
            b.add(pf[i].value());
            c.add(hy[i].value());
        }
        e.f_el = a.value();
        e.f_pf = b.value();
        e.f_hy = c.value();
        e.total = e.f_el + e.f_pf + e.f_hy;
        return e;
    }
};

/// ℱ(t, y, ψ) = ∫ Wel(F/g(ψ)) + Wpf(ψ, ∇ψ, F) + Why(∇F). Returns the
/// infinite marker when det ∇y ≤ det_floor at some node.
template <int D>
EnergyBreakdown free_energy(const Model<D>& model, double t, const VectorField<D>& y, const ScalarField& psi) {
    const auto& g = model.grid;
    const Kinematics<D> kin = kinematics(g, y, psi);
    const int threads = resolve_threads(model.options.threads);
    ChunkSums sums(chunk_count(g.size(), threads));
    parallel_chunks(g.size(), threads, [&](std::size_t b, std::size_t e, std::size_t c) {
        for (std::size_t k = b; k < e; ++k) {
            const auto lt = local_terms(model.family.jet(t, y[k]), kin.gy[k], kin.hy[k], psi[k], kin.gpsi[k],
                                        model.params, model.options.det_floor);
            if (!lt.admissible) {
                sums.ok[c] = 0;
                return;
            }
            const double w = g.weight(k);
            sums.el[c].add(w * lt.el);
            sums.pf[c].add(w * lt.pf);
            sums.hy[c].add(w * lt.hy);
        }
    });
    return sums.total();
}

/// ∂tℱ at fixed (y, ψ): ∫ ∂F W : (L F) + ∂G Why ⋮ ∂t∇F with
/// L = (∂t∇vD)(∇vD)^{-1}.
template <int D>
double dt_free_energy(const Model<D>& model, double t, const VectorField<D>& y, const ScalarField& psi) {
    const auto& g = model.grid;
    const Kinematics<D> kin = kinematics(g, y, psi);
    const PowerFields<D> pw = external_power_fields(t, y, model.family, g);
    CompensatedSum s;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto lt = local_terms(model.family.jet(t, y[k]), kin.gy[k], kin.hy[k], psi[k], kin.gpsi[k],
                                    model.params, model.options.det_floor);
        if (!lt.admissible) throw InfiniteEnergy("time derivative requested at an inadmissible state");
        const Mat<D> lf = pw.l[k] * lt.f;
        s.add(g.weight(k) * (double_dot(lt.s_f_el + lt.s_f_pf, lf) + triple_dot(lt.s_g, pw.dt_grad_f[k])));
    }
    return s.value();
}

/// 𝒱(t, y_prev, y_rate, ψ_prev) = ∫ V(F(t, y_prev), Ḟ, ψ_prev).
template <int D>
double viscous_dissipation(const Model<D>& model, double t, const VectorField<D>& y_prev, const VectorField<D>& y_rate,
                           const ScalarField& psi_prev) {
    const auto& g = model.grid;
    const auto gp = grad_field(g, y_prev);
    const auto gr = grad_field(g, y_rate);
    CompensatedSum s;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Mat<D> a = model.family.jet(t, y_prev[k]).a;
        const Mat<D> fdot = model.options.rate == RateComposition::Composed ? a * gr[k] : gr[k];
        s.add(g.weight(k) * viscous_eval(a * gp[k], fdot, psi_prev[k], model.params, model.viscosity).value);
    }
    return s.value();
}

// ---------------------------------------------------------------------------

struct IncrementValue {
    double total = 0.0;
    EnergyBreakdown energy;
    double hminus = 0.0;   // (1/2τ)‖ψ - ψ_prev‖²
    double viscous = 0.0;  // τ 𝒱

    bool finite() const { return std::isfinite(total); }
};

/// Directional pairings of the first variation, split by term. The y-test
/// enters through (el, pf_f, hy, vi); the ψ-test through (chem_psi,
/// chem_grad, dist).
struct TangentTerms {
    double el = 0.0;
    double pf_f = 0.0;
    double hy = 0.0;
    double vi = 0.0;
    double chem_psi = 0.0;
    double chem_grad = 0.0;
    double dist = 0.0;
};

/// 𝔽(y, ψ) = ℱ(t_m, y, ψ) + (1/2τ)‖ψ - ψ_prev‖² + τ 𝒱(t_m, y_prev, (y - y_prev)/τ, ψ_prev)
template <int D>
class IncrementalFunctional {
public:
    IncrementalFunctional(const Model<D>& model, double t_m, double tau, const VectorField<D>& y_prev,
                          const ScalarField& psi_prev, std::optional<double> reference_mass = std::nullopt)
        : model_(&model), t_(t_m), tau_(tau), y_prev_(y_prev), psi_prev_(psi_prev) {
        if (!(tau > 0)) throw ValidationError("time step must be positive");
        const auto& g = model.grid;
        mass_ = reference_mass ? *reference_mass : g.mean(psi_prev);
        gy_prev_ = grad_field(g, y_prev);
        a_prev_.resize(g.size());
        f_prev_.resize(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            a_prev_[k] = model.family.jet(t_m, y_prev[k]).a;
            f_prev_[k] = a_prev_[k] * gy_prev_[k];
        }
    }

    double time() const { return t_; }
    double tau() const { return tau_; }
    double reference_mass() const { return mass_; }
    const VectorField<D>& y_prev() const { return y_prev_; }
    const ScalarField& psi_prev() const { return psi_prev_; }
    const Model<D>& model() const { return *model_; }

    IncrementValue value(const VectorField<D>& y, const ScalarField& psi) const {
        return evaluate(y, psi, nullptr, nullptr);
    }

    /// Raw (unprojected) gradient with respect to nodal values.
    IncrementValue value_and_gradient(const VectorField<D>& y, const ScalarField& psi, VectorField<D>& grad_y,
                                      ScalarField& grad_psi) const {
        return evaluate(y, psi, &grad_y, &grad_psi);
    }

    /// Zeroes y-components on Γ_D and removes the quadrature-weight
    /// direction from the ψ-component (Euclidean projection onto the
    /// tangent space of the mass constraint).
    void project(VectorField<D>& grad_y, ScalarField& grad_psi) const {
        const auto& g = model_->grid;
        for (std::size_t k : g.dirichlet_nodes()) grad_y[k] = Vec<D>{};
        const auto& w = g.weights();
        double wg = 0.0, ww = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            wg += w[k] * grad_psi[k];
            ww += w[k] * w[k];
        }
        const double c = wg / ww;
        for (std::size_t k = 0; k < w.size(); ++k) grad_psi[k] -= c * w[k];
    }

    /// Mean-free Poisson solve of (ψ - ψ_prev); returns u with L u = φ.
    ScalarField distance_potential(const ScalarField& psi) const {
        const auto& g = model_->grid;
        ScalarField phi(psi.size());
        for (std::size_t k = 0; k < psi.size(); ++k) phi[k] = psi[k] - psi_prev_[k];
        phi = remove_mean(g, std::move(phi));
        return model_->laplacian.solve_poisson_meanfree(phi, model_->options.poisson_tol);
    }

    /// Forward-mode pairings of the first variation with test fields
    /// (w for y, ζ for ψ), assembled without the adjoint path.
    TangentTerms tangent_terms(const VectorField<D>& y, const ScalarField& psi, const VectorField<D>& w,
                               const ScalarField& zeta) const {
        const auto& g = model_->grid;
        const Kinematics<D> kin = kinematics(g, y, psi);
        const auto gw = grad_field(g, w);
        const auto hw = hess_field(g, w);
        const auto gz = sided_gradients(g, zeta);
        const ScalarField u = distance_potential(psi);
        TangentTerms tt;
        CompensatedSum el, pf, hy, vi, cp, cg, di;
        for (std::size_t k = 0; k < g.size(); ++k) {
            const FamilyJet<D> j = model_->family.jet(t_, y[k]);
            const auto lt = local_terms(j, kin.gy[k], kin.hy[k], psi[k], kin.gpsi[k], model_->params,
                                        model_->options.det_floor);
            if (!lt.admissible) throw InfiniteEnergy("tangent requested at an inadmissible state");
            const double wk = g.weight(k);
            const auto [df, dg] = chain_tangent(j, kin.gy[k], kin.hy[k], w[k], gw[k], hw[k]);
            el.add(wk * double_dot(lt.s_f_el, df));
            pf.add(wk * double_dot(lt.s_f_pf, df));
            hy.add(wk * triple_dot(lt.s_g, dg));
            const auto vis = rate_terms(k, kin.gy[k]);
            const Mat<D> dfdot = model_->options.rate == RateComposition::Composed ? a_prev_[k] * gw[k] : gw[k];
            vi.add(wk * double_dot(vis.stress, dfdot));
            cp.add(wk * lt.s_psi * zeta[k]);
            for (int c = 0; c < (1 << D); ++c) cg.add(wk * dot(lt.s_gpsi[c], gz[k][c]));
            di.add(wk * u[k] * zeta[k] / tau_);
        }
        tt.el = el.value();
        tt.pf_f = pf.value();
        tt.hy = hy.value();
        tt.vi = vi.value();
        tt.chem_psi = cp.value();
        tt.chem_grad = cg.value();
        tt.dist = di.value();
        return tt;
    }

private:
    MatValue<D> rate_terms(std::size_t k, const Mat<D>& gy) const {
        const Mat<D> gdot = (gy - gy_prev_[k]) / tau_;
        const Mat<D> fdot = model_->options.rate == RateComposition::Composed ? a_prev_[k] * gdot : gdot;
        return viscous_eval(f_prev_[k], fdot, psi_prev_[k], model_->params, model_->viscosity);
    }

    void check_mass(const ScalarField& psi) const {
        const double m = model_->grid.mean(psi);
        if (std::abs(m - mass_) > 1e-10)
            throw MassMismatch("phase-field mean " + std::to_string(m) + " differs from reference " +
                               std::to_string(mass_));
    }

    IncrementValue evaluate(const VectorField<D>& y, const ScalarField& psi, VectorField<D>* grad_y,
                            ScalarField* grad_psi) const {
        const auto& g = model_->grid;
        const std::size_t n = g.size();
        check_mass(psi);
        const Kinematics<D> kin = kinematics(g, y, psi);
        const bool want = grad_y != nullptr;
        const bool curved = family_is_curved(model_->family.kind());

        std::vector<Vec<D>> dy;
        std::vector<Mat<D>> dgy;
        std::vector<Tensor3<D>> dhy;
        ScalarField dpsi;
        SidedGradients<D> dgpsi;
        if (want) {
            dy.assign(n, Vec<D>{});
            dgy.assign(n, Mat<D>{});
            dhy.assign(n, Tensor3<D>{});
            dpsi.assign(n, 0.0);
            dgpsi.assign(n, {});
        }

        const int threads = resolve_threads(model_->options.threads);
        const std::size_t chunks = chunk_count(n, threads);
        ChunkSums sums(chunks);
        std::vector<CompensatedSum> visc(chunks);
        parallel_chunks(n, threads, [&](std::size_t b, std::size_t e, std::size_t c) {
            for (std::size_t k = b; k < e; ++k) {
                const FamilyJet<D> j = model_->family.jet(t_, y[k]);
                const auto lt = local_terms(j, kin.gy[k], kin.hy[k], psi[k], kin.gpsi[k], model_->params,
                                            model_->options.det_floor);
                if (!lt.admissible) {
                    sums.ok[c] = 0;
                    return;
                }
                const double w = g.weight(k);
                sums.el[c].add(w * lt.el);
                sums.pf[c].add(w * lt.pf);
                sums.hy[c].add(w * lt.hy);
                const auto vis = rate_terms(k, kin.gy[k]);
                visc[c].add(w * tau_ * vis.value);
                if (!want) continue;
                const auto adj = chain_adjoint(j, kin.gy[k], kin.hy[k], lt.s_f_el + lt.s_f_pf, lt.s_g, curved);
                dy[k] = w * adj.dy;
                Mat<D> vis_gy =
                    model_->options.rate == RateComposition::Composed ? transpose(a_prev_[k]) * vis.stress : vis.stress;
                dgy[k] = w * (adj.dgy + vis_gy);
                dhy[k] = w * adj.dhy;
                dpsi[k] = w * lt.s_psi;
                for (int c = 0; c < (1 << D); ++c) dgpsi[k][c] = w * lt.s_gpsi[c];
            }
        });

        IncrementValue out;
        out.energy = sums.total();
        if (!out.energy.finite()) {
            out.total = kInfinity;
            out.hminus = out.viscous = kInfinity;
            return out;
        }
        CompensatedSum vs;
        for (const auto& v : visc) vs.add(v.value());
        out.viscous = vs.value();

        const ScalarField u = distance_potential(psi);
        CompensatedSum hs;
        for (std::size_t k = 0; k < n; ++k) hs.add(g.weight(k) * (psi[k] - psi_prev_[k]) * u[k]);
        out.hminus = hs.value() / (2.0 * tau_);
        out.total = out.energy.total + out.hminus + out.viscous;

        if (want) {
            const VectorField<D> from_grad = grad_adjoint(g, dgy);
            const VectorField<D> from_hess = hess_adjoint(g, dhy);
            grad_y->resize(n);
            for (std::size_t k = 0; k < n; ++k) (*grad_y)[k] = dy[k] + from_grad[k] + from_hess[k];
            const ScalarField from_gpsi = sided_gradient_adjoint(g, dgpsi);
            grad_psi->resize(n);
            for (std::size_t k = 0; k < n; ++k)
                (*grad_psi)[k] = dpsi[k] + from_gpsi[k] + g.weight(k) * u[k] / tau_;
        }
        return out;
    }

    const Model<D>* model_;
    double t_;
    double tau_;
    VectorField<D> y_prev_;
    ScalarField psi_prev_;
    double mass_ = 0.0;
    std::vector<Mat<D>> gy_prev_;
    std::vector<Mat<D>> a_prev_;
    std::vector<Mat<D>> f_prev_;
};

template <int D>
double incremental_functional(const Model<D>& model, double t_m, double tau, const VectorField<D>& y,
                              const ScalarField& psi, const VectorField<D>& y_prev, const ScalarField& psi_prev) {
    return IncrementalFunctional<D>(model, t_m, tau, y_prev, psi_prev).value(y, psi).total;
}

/// Projected gradient (Γ_D rows zeroed, ψ-part tangent to the mass
/// constraint). Throws InfiniteEnergy at inadmissible states.
template <int D>
std::pair<VectorField<D>, ScalarField> incremental_gradient(const Model<D>& model, double t_m, double tau,
                                                            const VectorField<D>& y, const ScalarField& psi,
                                                            const VectorField<D>& y_prev, const ScalarField& psi_prev) {
    IncrementalFunctional<D> fn(model, t_m, tau, y_prev, psi_prev);
    VectorField<D> gy;
    ScalarField gp;
    if (!fn.value_and_gradient(y, psi, gy, gp).finite())
        throw InfiniteEnergy("gradient requested at an inadmissible state");
    fn.project(gy, gp);
    return {std::move(gy), std::move(gp)};
}

}  // namespace gelstep
