#pragma once

// Checks run on a computed trajectory: energy-dissipation ledger,
// Euler–Lagrange residuals, a-priori bound table and a refinement study.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gelstep/fields.hpp"
#include "gelstep/parallel.hpp"
#include "gelstep/solver.hpp"

namespace gelstep {

/// A computed number with the threshold it was compared against.
struct Verdict {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation = "<=";  // value relation threshold must hold
    bool pass = false;
};

inline Verdict verdict_le(std::string name, double value, double threshold) {
    return {std::move(name), value, threshold, "<=", value <= threshold};
}
inline Verdict verdict_ge(std::string name, double value, double threshold) {
    return {std::move(name), value, threshold, ">=", value >= threshold};
}
inline Verdict verdict_lt(std::string name, double value, double threshold) {
    return {std::move(name), value, threshold, "<", value < threshold};
}

inline bool all_pass(const std::vector<Verdict>& vs) {
    return std::all_of(vs.begin(), vs.end(), [](const Verdict& v) { return v.pass; });
}

// ---------------------------------------------------------------------------
// Energy-dissipation ledger

struct EdiRow {
    int m = 0;
    double t = 0.0;
    EnergyBreakdown energy;   // ℱ(tᵐ, yᵐ, ψᵐ)
    double hminus_dist = 0.0;  // (τ/2)‖(ψᵐ - ψᵐ⁻¹)/τ‖²_{Ṽ₀}
    double viscous = 0.0;      // τ 𝒱
    double rate_norm_sq = 0.0;     // ‖(ψᵐ - ψᵐ⁻¹)/τ‖²_{Ṽ₀}
    double grad_mu_sq = 0.0;       // ∫|∇μᵐ|²
    double dt_f_integral = 0.0;    // ∫ ∂tℱ(s, yᵐ⁻¹, ψᵐ⁻¹) ds over the step, Gauss–Legendre
    double dt_f_exact = 0.0;       // ℱ(tᵐ, ·ᵐ⁻¹) - ℱ(tᵐ⁻¹, ·ᵐ⁻¹)
    double lhs = 0.0;
    double rhs = 0.0;
    double step_slack = 0.0;  // per-step inequality margin
    double det_min = 0.0;
    double mass = 0.0;
    bool descent = true;
};

struct EdiReport {
    std::vector<EdiRow> rows;
    double slack = 0.0;
    Verdict inequality;   // max_m (LHS - RHS)
    Verdict identity;     // max_m relative gap of ‖ψ̇‖²_{Ṽ₀} vs ∫|∇μ|²
    Verdict telescoping;  // Σ per-step margins vs cumulative margin
    Verdict descent;      // max_m 𝔽ᵐ(new) - 𝔽ᵐ(prev)
    Verdict quadrature;   // max_m |Gauss–Legendre - exact difference|

    std::vector<Verdict> verdicts() const { return {inequality, identity, telescoping, descent, quadrature}; }
    bool pass() const { return all_pass(verdicts()); }
};

namespace detail {
inline constexpr std::array<double, 5> kGaussNodes = {0.0469100770306680, 0.2307653449471585, 0.5,
                                                      0.7692346550528415, 0.9530899229693320};
inline constexpr std::array<double, 5> kGaussWeights = {0.1184634425280945, 0.2393143352496832,
                                                        0.2844444444444444, 0.2393143352496832,
                                                        0.1184634425280945};
}  // namespace detail

template <int D>
EdiReport check_edi(const Trajectory<D>& tr, const Model<D>& model) {
    const auto& g = model.grid;
    const int steps = tr.steps_count();
    const double tau = tr.tau;
    EdiReport rep;
    rep.rows.resize(steps + 1);
    const double f0 = tr.states[0].energy.total;
    rep.slack = 1e-8 * (1.0 + std::abs(f0));

    auto& r0 = rep.rows[0];
    r0.energy = tr.states[0].energy;
    r0.lhs = r0.rhs = f0;
    r0.det_min = tr.steps[0].det_min;
    r0.mass = tr.steps[0].mass;

    const int threads = resolve_threads(model.options.threads);
    parallel_chunks(static_cast<std::size_t>(steps), threads, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t i = b; i < e; ++i) {
            const int m = static_cast<int>(i) + 1;
            const auto& prev = tr.states[m - 1];
            const auto& cur = tr.states[m];
            const auto& rec = tr.steps[m];
            EdiRow& row = rep.rows[m];
            row.m = m;
            row.t = cur.t;
            row.energy = cur.energy;
            row.hminus_dist = rec.value.hminus;
            row.viscous = rec.value.viscous;
            row.det_min = rec.det_min;
            row.mass = rec.mass;
            row.descent = rec.solver.descent();

            ScalarField rate(g.size());
            for (std::size_t k = 0; k < g.size(); ++k) rate[k] = (cur.psi[k] - prev.psi[k]) / tau;
            rate = remove_mean(g, std::move(rate));
            const ScalarField u = model.laplacian.solve_poisson_meanfree(rate, model.options.poisson_tol);
            CompensatedSum ns;
            for (std::size_t k = 0; k < g.size(); ++k) ns.add(g.weight(k) * rate[k] * u[k]);
            row.rate_norm_sq = ns.value();
            row.grad_mu_sq = model.laplacian.dirichlet_form(tr.mu[m], tr.mu[m]);

            CompensatedSum q;
            for (int j = 0; j < 5; ++j) {
                const double s = prev.t + detail::kGaussNodes[j] * tau;
                q.add(tau * detail::kGaussWeights[j] * dt_free_energy(model, s, prev.y, prev.psi));
            }
            row.dt_f_integral = q.value();
            row.dt_f_exact = free_energy(model, cur.t, prev.y, prev.psi).total - prev.energy.total;
        }
    });

    double worst = -kInfinity, worst_id = 0.0, worst_desc = -kInfinity, worst_q = 0.0, margin_sum = 0.0;
    CompensatedSum diss, power;
    for (int m = 1; m <= steps; ++m) {
        auto& row = rep.rows[m];
        diss.add(row.hminus_dist + row.viscous);
        power.add(row.dt_f_integral);
        row.lhs = row.energy.total + diss.value();
        row.rhs = f0 + power.value();
        row.step_slack = (rep.rows[m - 1].energy.total + row.dt_f_integral) -
                         (row.energy.total + row.hminus_dist + row.viscous);
        margin_sum += row.step_slack;
        worst = std::max(worst, row.lhs - row.rhs);
        const double scale = std::max({row.rate_norm_sq, row.grad_mu_sq, 1e-14});
        worst_id = std::max(worst_id, std::abs(row.rate_norm_sq - row.grad_mu_sq) / scale);
        worst_desc = std::max(worst_desc, tr.steps[m].solver.value_end - tr.steps[m].solver.value_start);
        worst_q = std::max(worst_q, std::abs(row.dt_f_integral - row.dt_f_exact));
    }
    if (steps == 0) worst = worst_desc = 0.0;
    const double cumulative = steps > 0 ? rep.rows[steps].rhs - rep.rows[steps].lhs : 0.0;
    rep.inequality = verdict_le("edi_excess", worst, rep.slack);
    rep.identity = verdict_le("hminus_gradmu_identity", worst_id, 1e-8);
    rep.telescoping =
        verdict_le("edi_telescoping", std::abs(margin_sum - cumulative), 1e-12 * (1.0 + std::abs(f0)) * (steps + 1));
    rep.descent = verdict_le("step_descent", worst_desc, 1e-12);
    rep.quadrature = verdict_le("power_quadrature", worst_q, rep.slack);
    return rep;
}

// ---------------------------------------------------------------------------
// Euler–Lagrange residuals

struct ResidualReport {
    int fields = 0;
    double weak_time = 0.0;
    double weak_chem = 0.0;
    double weak_elast = 0.0;
    double threshold = 0.0;

    std::vector<Verdict> verdicts() const {
        return {verdict_le("residual_weak_time", weak_time, threshold),
                verdict_le("residual_weak_chem", weak_chem, threshold),
                verdict_le("residual_weak_elast", weak_elast, threshold)};
    }
    bool pass() const { return all_pass(verdicts()); }
};

/// Constant, coordinate monomials of degree ≤ 2, and `random_fields`
/// seeded smooth fields.
template <int D>
std::vector<ScalarField> test_field_battery(const Grid<D>& g, int random_fields, std::uint64_t seed) {
    std::vector<ScalarField> out;
    out.push_back(ScalarField(g.size(), 1.0));
    for (int a = 0; a < D; ++a) out.push_back(g.sample_scalar([a](const Vec<D>& x) { return x[a]; }));
    for (int a = 0; a < D; ++a)
        for (int b = a; b < D; ++b)
            out.push_back(g.sample_scalar([a, b](const Vec<D>& x) { return x[a] * x[b]; }));
    for (int i = 0; i < random_fields; ++i)
        out.push_back(smooth_random_field(g, seed + static_cast<std::uint64_t>(i), 3, 1.0));
    return out;
}

/// Residuals of the three discrete weak identities at every step, each
/// normalized by |Σ terms| + ‖test‖₂(1 + |𝔽ᵐ|).
template <int D>
ResidualReport check_el_residuals(const Trajectory<D>& tr, const Model<D>& model, int random_fields,
                                  std::uint64_t seed, double grad_tol) {
    const auto& g = model.grid;
    const auto battery = test_field_battery(g, random_fields, seed);
    ResidualReport rep;
    rep.fields = static_cast<int>(battery.size());
    rep.threshold = 100.0 * grad_tol;
    const int steps = tr.steps_count();
    std::vector<std::array<double, 3>> worst(static_cast<std::size_t>(std::max(steps, 0)), {0.0, 0.0, 0.0});

    std::vector<double> cutoff(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) cutoff[k] = g.is_dirichlet(k) ? 0.0 : dirichlet_cutoff(g, g.coord(k));

    const int threads = resolve_threads(model.options.threads);
    parallel_chunks(static_cast<std::size_t>(steps), threads, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t i = b; i < e; ++i) {
            const int m = static_cast<int>(i) + 1;
            const auto& prev = tr.states[m - 1];
            const auto& cur = tr.states[m];
            const auto& mu = tr.mu[m];
            const IncrementalFunctional<D> fn(model, cur.t, tr.tau, prev.y, prev.psi, g.mean(tr.states[0].psi));
            const double fscale = 1.0 + std::abs(tr.steps[m].value.total);
            ScalarField rate(g.size());
            for (std::size_t k = 0; k < g.size(); ++k) rate[k] = (cur.psi[k] - prev.psi[k]) / tr.tau;
            const VectorField<D> zero_w(g.size());
            const ScalarField zero_z(g.size(), 0.0);
            auto& w = worst[i];
            for (const auto& f : battery) {
                double fn2 = 0.0;
                for (double v : f) fn2 += v * v;
                const double fnorm = std::sqrt(fn2);

                // ∫ ∂tψ̂ ζ = -∫ ∇μ·∇ζ
                const ScalarField kz = model.laplacian.apply_K(f);
                CompensatedSum a, c;
                for (std::size_t k = 0; k < g.size(); ++k) {
                    a.add(g.weight(k) * rate[k] * f[k]);
                    c.add(mu[k] * kz[k]);
                }
                w[0] = std::max(w[0], std::abs(a.value() + c.value()) /
                                          (std::abs(a.value()) + std::abs(c.value()) + fnorm * fscale));

                // ∫ μ ζ = ∫ ∂ψW ζ + ∂∇ψWpf·∇ζ
                const TangentTerms tc = fn.tangent_terms(cur.y, cur.psi, zero_w, f);
                CompensatedSum mz;
                for (std::size_t k = 0; k < g.size(); ++k) mz.add(g.weight(k) * mu[k] * f[k]);
                const double rc = mz.value() - tc.chem_psi - tc.chem_grad;
                w[1] = std::max(w[1], std::abs(rc) / (std::abs(mz.value()) + std::abs(tc.chem_psi) +
                                                      std::abs(tc.chem_grad) + fnorm * fscale));

                // 0 = ∫ elastic + Korteweg + hyperstress + viscous stresses against w
                for (int comp = 0; comp < D; ++comp) {
                    VectorField<D> wf(g.size());
                    double wn2 = 0.0;
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        wf[k][comp] = cutoff[k] * f[k];
                        wn2 += wf[k][comp] * wf[k][comp];
                    }
                    const TangentTerms te = fn.tangent_terms(cur.y, cur.psi, wf, zero_z);
                    const double sum = te.el + te.pf_f + te.hy + te.vi;
                    const double mag = std::abs(te.el) + std::abs(te.pf_f) + std::abs(te.hy) + std::abs(te.vi);
                    w[2] = std::max(w[2], std::abs(sum) / (mag + std::sqrt(wn2) * fscale));
                }
            }
        }
    });
    for (const auto& w : worst) {
        rep.weak_time = std::max(rep.weak_time, w[0]);
        rep.weak_chem = std::max(rep.weak_chem, w[1]);
        rep.weak_elast = std::max(rep.weak_elast, w[2]);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// A-priori bounds

inline constexpr std::array<const char*, 7> kBoundNames = {
    "y_Linf_W1p", "y_Linf_W2beta", "det_inverse_sup", "ydot_L2_H1", "psi_Linf_H1", "psidot_L2_dual", "mu_L2_H1"};

struct AprioriReport {
    std::array<double, 7> bounds{};
    double det_min = 0.0;
    double mass_drift = 0.0;
    double gronwall_ratio = 0.0;  // max_t [ℱ(t) + ∫(½|∇μ|² + 𝒱)] / (ℱ⁰ + 1)
    double c1 = 0.0;              // max_m |∂tℱ| / (ℱ + 1) at the underline states
    double korn_constant = 0.0;   // min_m ∫|Ċ|² / ‖ẏ‖²_{H¹}, advisory
    double gronwall_ceiling = 0.0;

    std::vector<Verdict> verdicts() const {
        bool finite = std::isfinite(det_min) && std::isfinite(gronwall_ratio);
        for (double b : bounds) finite = finite && std::isfinite(b);
        return {verdict_ge("bounds_finite", finite ? 1.0 : 0.0, 1.0), verdict_le("mass_drift", mass_drift, 1e-10),
                verdict_le("gronwall_ratio", gronwall_ratio, gronwall_ceiling)};
    }
    bool pass() const { return all_pass(verdicts()); }
};

namespace detail {

template <int D>
double sobolev_w1p(const Grid<D>& g, const VectorField<D>& y, double p) {
    const auto gy = grad_field(g, y);
    CompensatedSum s;
    for (std::size_t k = 0; k < g.size(); ++k) s.add(g.weight(k) * (std::pow(norm(y[k]), p) + std::pow(norm(gy[k]), p)));
    return std::pow(s.value(), 1.0 / p);
}

template <int D>
double sobolev_w2b(const Grid<D>& g, const VectorField<D>& y, double b) {
    const auto gy = grad_field(g, y);
    const auto hy = hess_field(g, y);
    CompensatedSum s;
    for (std::size_t k = 0; k < g.size(); ++k)
        s.add(g.weight(k) * (std::pow(norm(y[k]), b) + std::pow(norm(gy[k]), b) + std::pow(norm(hy[k]), b)));
    return std::pow(s.value(), 1.0 / b);
}

/// ‖f‖²_{H¹} = ∫f² + fᵀKf.
template <int D>
double h1_sq(const NeumannLaplacian<D>& lap, const ScalarField& f) {
    const auto& g = lap.grid();
    CompensatedSum s;
    for (std::size_t k = 0; k < g.size(); ++k) s.add(g.weight(k) * f[k] * f[k]);
    return s.value() + lap.dirichlet_form(f, f);
}

template <int D>
double h1_sq(const NeumannLaplacian<D>& lap, const VectorField<D>& y) {
    double s = 0.0;
    ScalarField c(y.size());
    for (int i = 0; i < D; ++i) {
        for (std::size_t k = 0; k < y.size(); ++k) c[k] = y[k][i];
        s += h1_sq(lap, c);
    }
    return s;
}

}  // namespace detail

template <int D>
AprioriReport check_apriori(const Trajectory<D>& tr, const Model<D>& model, double gronwall_ceiling = 10.0) {
    const auto& g = model.grid;
    const auto& lap = model.laplacian;
    const auto& pp = model.params;
    const int steps = tr.steps_count();
    const double tau = tr.tau;
    AprioriReport rep;
    rep.gronwall_ceiling = gronwall_ceiling;
    rep.det_min = kInfinity;
    const double mass0 = g.mean(tr.states[0].psi);
    const double f0 = tr.states[0].energy.total;

    double ydot = 0.0, psidot = 0.0, mu = 0.0, diss = 0.0;
    rep.korn_constant = kInfinity;
    for (int m = 0; m <= steps; ++m) {
        const auto& s = tr.states[m];
        rep.bounds[0] = std::max(rep.bounds[0], detail::sobolev_w1p(g, s.y, pp.p));
        rep.bounds[1] = std::max(rep.bounds[1], detail::sobolev_w2b(g, s.y, pp.beta));
        const double dm = min_det(g, s.y);
        rep.det_min = std::min(rep.det_min, dm);
        rep.bounds[2] = std::max(rep.bounds[2], 1.0 / dm);
        rep.bounds[4] = std::max(rep.bounds[4], std::sqrt(detail::h1_sq(lap, s.psi)));
        rep.mass_drift = std::max(rep.mass_drift, std::abs(g.mean(s.psi) - mass0));
        if (m == 0) {
            rep.gronwall_ratio = (f0) / (f0 + 1.0);
            continue;
        }
        const auto& prev = tr.states[m - 1];
        VectorField<D> vy(g.size());
        ScalarField vp(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            vy[k] = (s.y[k] - prev.y[k]) / tau;
            vp[k] = (s.psi[k] - prev.psi[k]) / tau;
        }
        const double ydot_sq = detail::h1_sq(lap, vy);
        ydot += tau * ydot_sq;
        const double dual = lap.hminus_norm_sq(remove_mean(g, vp), model.options.poisson_tol);
        psidot += tau * dual;
        mu += tau * detail::h1_sq(lap, tr.mu[m]);
        diss += tau * (0.5 * lap.dirichlet_form(tr.mu[m], tr.mu[m])) + tr.steps[m].value.viscous;
        rep.gronwall_ratio = std::max(rep.gronwall_ratio, (s.energy.total + diss) / (f0 + 1.0));
        const double dtf = dt_free_energy(model, s.t, prev.y, prev.psi);
        rep.c1 = std::max(rep.c1, std::abs(dtf) / (prev.energy.total + 1.0));

        if (ydot_sq > 1e-20) {
            // ∫|Ċ|² with Ċ = ḞᵀF + FᵀḞ at the underline state.
            const auto bundle = compose_deformation(s.t, prev.y, model.family, g);
            const auto gv = grad_field(g, vy);
            CompensatedSum cc;
            for (std::size_t k = 0; k < g.size(); ++k) {
                const Mat<D> a = model.family.jet(s.t, prev.y[k]).a;
                const Mat<D> fdot = model.options.rate == RateComposition::Composed ? a * gv[k] : gv[k];
                const Mat<D> cdot = transpose(fdot) * bundle.f[k] + transpose(bundle.f[k]) * fdot;
                cc.add(g.weight(k) * frob_dot(cdot, cdot));
            }
            rep.korn_constant = std::min(rep.korn_constant, cc.value() / ydot_sq);
        }
    }
    rep.bounds[3] = std::sqrt(ydot);
    rep.bounds[5] = std::sqrt(psidot);
    rep.bounds[6] = std::sqrt(mu);
    if (!std::isfinite(rep.korn_constant)) rep.korn_constant = 0.0;
    return rep;
}

/// Largest relative spread (max - min)/max of each bound across reports.
inline std::array<double, 7> bound_spread(const std::vector<AprioriReport>& reps) {
    std::array<double, 7> out{};
    for (int i = 0; i < 7; ++i) {
        double lo = kInfinity, hi = 0.0;
        for (const auto& r : reps) {
            lo = std::min(lo, r.bounds[i]);
            hi = std::max(hi, r.bounds[i]);
        }
        out[i] = hi > 0 ? (hi - lo) / hi : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Refinement study

struct RefinementRow {
    int m_coarse = 0;
    int m_fine = 0;
    double psi_distance = 0.0;  // max over shared times of ‖ψ̂_coarse - ψ̂_fine‖_{H¹}
    double y_distance = 0.0;
    double psi_order = 0.0;  // log₂(previous distance / this distance) per halving of τ
    double y_order = 0.0;
};

struct RefinementReport {
    std::vector<RefinementRow> rows;
    std::vector<AprioriReport> bounds;  // one per ladder entry
    bool psi_decreasing = false;
    bool y_decreasing = false;
    double trivial_floor = 1e-12;  // distances below this count as converged

    std::vector<Verdict> verdicts() const {
        double worst_ratio_psi = 0.0, worst_ratio_y = 0.0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i - 1].psi_distance > trivial_floor)
                worst_ratio_psi = std::max(worst_ratio_psi, rows[i].psi_distance / rows[i - 1].psi_distance);
            if (rows[i - 1].y_distance > trivial_floor)
                worst_ratio_y = std::max(worst_ratio_y, rows[i].y_distance / rows[i - 1].y_distance);
        }
        return {verdict_lt("psi_distance_ratio", worst_ratio_psi, 1.0), verdict_lt("y_distance_ratio", worst_ratio_y, 1.0)};
    }
};

/// Restriction of a field on an n_fine grid to a nested n_coarse grid.
template <int D, typename T>
std::vector<T> inject(const Grid<D>& fine, const Grid<D>& coarse, const std::vector<T>& f) {
    const int r = (fine.n() - 1) / (coarse.n() - 1);
    if (r * (coarse.n() - 1) != fine.n() - 1) throw ValidationError("grids are not nested");
    std::vector<T> out(coarse.size());
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        auto ix = coarse.multi(k);
        for (auto& v : ix) v *= r;
        out[k] = f[fine.index(ix)];
    }
    return out;
}

/// Runs `run(M, n)` for each ladder entry and compares consecutive
/// hat interpolants at the times of the coarsest partition, on the
/// coarsest grid.
template <int D>
RefinementReport refinement_study(const std::function<std::pair<Trajectory<D>, Model<D>>(int, int)>& run,
                                  const std::vector<int>& m_list, const std::vector<int>& n_list) {
    if (m_list.size() < 2) throw ValidationError("refinement needs at least two step counts");
    if (!(n_list.size() == 1 || n_list.size() == m_list.size()))
        throw ValidationError("grid list must have one entry or one per step count");
    for (std::size_t i = 1; i < m_list.size(); ++i)
        if (m_list[i] % m_list[i - 1] != 0) throw ValidationError("step counts must be nested");
    RefinementReport rep;
    std::vector<std::pair<Trajectory<D>, Model<D>>> runs;
    for (std::size_t i = 0; i < m_list.size(); ++i) {
        runs.push_back(run(m_list[i], n_list.size() == 1 ? n_list[0] : n_list[i]));
        rep.bounds.push_back(check_apriori(runs.back().first, runs.back().second));
    }
    const Grid<D>& coarse = runs.front().second.grid;
    const NeumannLaplacian<D> lap(coarse);
    const auto& tc = runs.front().first;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        const auto& a = runs[i - 1];
        const auto& b = runs[i];
        RefinementRow row;
        row.m_coarse = m_list[i - 1];
        row.m_fine = m_list[i];
        for (int m = 1; m <= tc.steps_count(); ++m) {
            const double t = m * tc.tau;
            auto [ya, pa] = a.first.hat(t);
            auto [yb, pb] = b.first.hat(t);
            ya = inject(a.second.grid, coarse, ya);
            pa = inject(a.second.grid, coarse, pa);
            yb = inject(b.second.grid, coarse, yb);
            pb = inject(b.second.grid, coarse, pb);
            for (std::size_t k = 0; k < coarse.size(); ++k) {
                ya[k] -= yb[k];
                pa[k] -= pb[k];
            }
            row.psi_distance = std::max(row.psi_distance, std::sqrt(detail::h1_sq(lap, pa)));
            row.y_distance = std::max(row.y_distance, std::sqrt(detail::h1_sq(lap, ya)));
        }
        if (!rep.rows.empty()) {
            const auto& p = rep.rows.back();
            const double ratio = std::log2(static_cast<double>(row.m_fine) / row.m_coarse);
            if (p.psi_distance > 0 && row.psi_distance > 0)
                row.psi_order = std::log2(p.psi_distance / row.psi_distance) / ratio;
            if (p.y_distance > 0 && row.y_distance > 0) row.y_order = std::log2(p.y_distance / row.y_distance) / ratio;
        }
        rep.rows.push_back(row);
    }
    const auto v = rep.verdicts();
    rep.psi_decreasing = v[0].pass;
    rep.y_decreasing = v[1].pass;
    return rep;
}

// ---------------------------------------------------------------------------
// Emission

inline void write_verdicts(std::ostream& os, const std::vector<Verdict>& vs) {
    os << std::setprecision(10);
    for (const auto& v : vs)
        os << v.name << " = " << v.value << " " << v.relation << " " << v.threshold << " : "
           << (v.pass ? "PASS" : "FAIL") << '\n';
}

inline void write_edi_csv(std::ostream& os, const EdiReport& rep) {
    os << "m,t,f_el,f_pf,f_hy,total,hminus_dist,viscous,dt_F_integral,edi_lhs,edi_rhs,det_min,mass\n";
    os << std::setprecision(17);
    for (const auto& r : rep.rows)
        os << r.m << ',' << r.t << ',' << r.energy.f_el << ',' << r.energy.f_pf << ',' << r.energy.f_hy << ','
           << r.energy.total << ',' << r.hminus_dist << ',' << r.viscous << ',' << r.dt_f_integral << ',' << r.lhs
           << ',' << r.rhs << ',' << r.det_min << ',' << r.mass << '\n';
}

inline void write_apriori(std::ostream& os, const AprioriReport& rep) {
    os << std::setprecision(10);
    for (int i = 0; i < 7; ++i) os << kBoundNames[i] << " = " << rep.bounds[i] << '\n';
    os << "det_min = " << rep.det_min << '\n';
    os << "mass_drift = " << rep.mass_drift << '\n';
    os << "gronwall_ratio = " << rep.gronwall_ratio << '\n';
    os << "gronwall_c1 = " << rep.c1 << '\n';
    os << "korn_constant = " << rep.korn_constant << " (advisory)\n";
}

inline void write_refinement_csv(std::ostream& os, const RefinementReport& rep) {
    os << "m_coarse,m_fine,psi_distance,y_distance,psi_order,y_order\n" << std::setprecision(10);
    for (const auto& r : rep.rows)
        os << r.m_coarse << ',' << r.m_fine << ',' << r.psi_distance << ',' << r.y_distance << ',' << r.psi_order
           << ',' << r.y_order << '\n';
}

// ---------------------------------------------------------------------------
// Aggregate report

struct VerifyOptions {
    bool edi = true;
    bool residuals = true;
    bool apriori = true;
    int residual_fields = 20;
    std::uint64_t residual_seed = 7;
    double grad_tol = 1e-8;
    double gronwall_ceiling = 10.0;
    double det_gate = 1e-4;
};

struct VerificationReport {
    std::optional<EdiReport> edi;
    std::optional<ResidualReport> residuals;
    std::optional<AprioriReport> apriori;
    Verdict det_gate;  // min over all states of the nodal det(∇y)

    std::vector<Verdict> verdicts() const {
        std::vector<Verdict> out;
        if (edi) for (const auto& v : edi->verdicts()) out.push_back(v);
        if (residuals) for (const auto& v : residuals->verdicts()) out.push_back(v);
        if (apriori) for (const auto& v : apriori->verdicts()) out.push_back(v);
        out.push_back(det_gate);
        return out;
    }
    bool pass() const { return all_pass(verdicts()); }
};

template <int D>
VerificationReport verify_trajectory(const Trajectory<D>& tr, const Model<D>& model, const VerifyOptions& opt) {
    VerificationReport rep;
    if (opt.edi) rep.edi = check_edi(tr, model);
    if (opt.residuals)
        rep.residuals = check_el_residuals(tr, model, opt.residual_fields, opt.residual_seed, opt.grad_tol);
    if (opt.apriori) rep.apriori = check_apriori(tr, model, opt.gronwall_ceiling);
    double det = kInfinity;
    for (const auto& s : tr.steps) det = std::min(det, s.det_min);
    rep.det_gate = verdict_ge("det_min", det, opt.det_gate);
    return rep;
}

/// Structured text: one key = value block per check, then the overall verdict.
inline void write_report(std::ostream& os, const VerificationReport& rep) {
    if (rep.edi) {
        os << "[edi]\nslack = " << std::setprecision(10) << rep.edi->slack << '\n';
        write_verdicts(os, rep.edi->verdicts());
    }
    if (rep.residuals) {
        os << "\n[residuals]\ntest_fields = " << rep.residuals->fields << '\n';
        write_verdicts(os, rep.residuals->verdicts());
    }
    if (rep.apriori) {
        os << "\n[apriori]\n";
        write_apriori(os, *rep.apriori);
        write_verdicts(os, rep.apriori->verdicts());
    }
    os << "\n[gates]\n";
    write_verdicts(os, {rep.det_gate});
    os << "\noverall = " << (rep.pass() ? "PASS" : "FAIL") << '\n';
}

}  // namespace gelstep
