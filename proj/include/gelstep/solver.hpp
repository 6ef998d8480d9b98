#pragma once

// Per-step minimization of the incremental functional, reconstruction of
// the chemical potential, and time marching with interpolant accessors.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gelstep/energy.hpp"
#include "gelstep/errors.hpp"
#include "gelstep/log.hpp"
#include "gelstep/spectral.hpp"

namespace gelstep {

struct SolverConfig {
    double grad_tol = 1e-8;  // relative: stop when ‖P∇𝔽‖ ≤ grad_tol·(1 + |𝔽|)
    int max_iters = 500;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    int memory = 10;

    void validate() const {
        if (!(grad_tol > 0)) throw ValidationError("solver.grad_tol must be positive");
        if (max_iters <= 0) throw ValidationError("solver.max_iters must be positive");
        if (!(armijo_c > 0 && armijo_c < 0.5)) throw ValidationError("solver.armijo_c must lie in (0, 0.5)");
        if (!(backtrack_factor > 0 && backtrack_factor < 1))
            throw ValidationError("solver.backtrack_factor must lie in (0, 1)");
        if (memory <= 0) throw ValidationError("solver.memory must be positive");
    }
};

template <int D>
struct NodalState {
    double t = 0.0;
    VectorField<D> y;
    ScalarField psi;
    EnergyBreakdown energy;  // ℱ(t, y, ψ)
};

struct StepReport {
    int iterations = 0;
    int evaluations = 0;
    double value_start = 0.0;  // 𝔽 at the previous state, the comparison candidate
    double value_end = 0.0;
    double grad_norm = 0.0;  // ‖P∇𝔽‖₂ at the returned state
    double grad_threshold = 0.0;
    bool converged = false;
    bool budget_exhausted = false;  // best iterate returned after max_iters
    int approximate_steps = 0;      // steps accepted by the roundoff-level rule
    int restarts = 0;               // memory resets after a failed search

    bool descent() const { return value_end <= value_start + 1e-12; }
};

template <int D>
struct StepResult {
    NodalState<D> state;
    IncrementValue value;
    StepReport report;
};

namespace detail {

/// Joint variable [y (D per node), ψ] as one flat vector.
template <int D>
std::vector<double> pack(const VectorField<D>& y, const ScalarField& psi) {
    std::vector<double> x;
    x.reserve(y.size() * (D + 1));
    for (const auto& v : y)
        for (int i = 0; i < D; ++i) x.push_back(v[i]);
    x.insert(x.end(), psi.begin(), psi.end());
    return x;
}

template <int D>
void unpack(const std::vector<double>& x, VectorField<D>& y, ScalarField& psi) {
    const std::size_t n = x.size() / (D + 1);
    y.resize(n);
    psi.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        for (int i = 0; i < D; ++i) y[k][i] = x[D * k + i];
    for (std::size_t k = 0; k < n; ++k) psi[k] = x[D * n + k];
}

inline double dotv(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_inf(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

struct Pair {
    std::vector<double> s, y;
    double rho;
};

/// Two-loop recursion with initial inverse Hessian h0: returns -H g.
inline std::vector<double> two_loop(const std::deque<Pair>& mem, const std::vector<double>& g,
                                    const std::function<std::vector<double>(const std::vector<double>&)>& h0) {
    std::vector<double> q = g;
    std::vector<double> alpha(mem.size());
    for (std::size_t i = mem.size(); i-- > 0;) {
        alpha[i] = mem[i].rho * dotv(mem[i].s, q);
        for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * mem[i].y[j];
    }
    q = h0(q);
    if (!mem.empty()) {
        const auto& last = mem.back();
        const double scale = dotv(last.s, last.y) / dotv(last.y, h0(last.y));
        for (double& v : q) v *= scale;
    }
    for (std::size_t i = 0; i < mem.size(); ++i) {
        const double b = mem[i].rho * dotv(mem[i].y, q);
        for (std::size_t j = 0; j < q.size(); ++j) q[j] += mem[i].s[j] * (alpha[i] - b);
    }
    for (double& v : q) v = -v;
    return q;
}

}  // namespace detail

/// Minimal nodal det(∇y).
template <int D>
double min_det(const Grid<D>& g, const VectorField<D>& y) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& f : grad_field(g, y)) m = std::min(m, det(f));
    return m;
}

/// Initial inverse Hessian for the quasi-Newton iteration: block-diagonal
/// operators that are exactly invertible in the tensor eigenbasis. The
/// y-block models the viscous, elastic and hyperstress stiffness
/// (c₁μ + c₂μ²), the ψ-block the metric, Korteweg and double-well terms
/// (1/(τμ) + bμ + a₊). Coefficients are frozen at the previous state.
template <int D>
class Preconditioner {
public:
    explicit Preconditioner(const Grid<D>& g) : y_(g, true), psi_(g, false) {}

    void calibrate(const Model<D>& model, const NodalState<D>& prev, double t, double tau) {
        const auto& pp = model.params;
        const auto& g = model.grid;
        const auto b = compose_deformation(t, prev.y, model.family, g);
        CompensatedSum el, hy, dw;
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double gk = g_eval(prev.psi[k], pp).value;
            const Mat<D> fe = b.f[k] / gk;
            const double dt = det(fe);
            const double e = pp.alpha * (pp.p - 1) * std::pow(norm(fe), pp.p - 2) +
                             (dt > 0 ? pp.c_det * pp.q * std::pow(dt, -pp.q) : 0.0);
            el.add(g.weight(k) * e / (gk * gk));
            hy.add(g.weight(k) * std::pow(norm(b.grad_f[k]), pp.beta - 2));
            dw.add(g.weight(k) * (3 * prev.psi[k] * prev.psi[k] - 1));
        }
        c1_ = 2 * pp.eta_visc / tau + el.value();
        c2_ = pp.gamma * (pp.beta - 1) * hy.value();
        tau_ = tau;
        b_ = pp.b_kw;
        a_ = std::max(0.0, pp.a_dw * dw.value());
    }

    /// Applies the inverse to a flat [y, ψ] vector.
    std::vector<double> operator()(const std::vector<double>& x) const {
        const std::size_t n = x.size() / (D + 1);
        std::vector<double> out(x.size());
        ScalarField comp(n);
        for (int i = 0; i < D; ++i) {
            for (std::size_t k = 0; k < n; ++k) comp[k] = x[D * k + i];
            const auto r = y_.apply(comp, [&](double mu) { return 1.0 / (c1_ * mu + c2_ * mu * mu); });
            for (std::size_t k = 0; k < n; ++k) out[D * k + i] = r[k];
        }
        for (std::size_t k = 0; k < n; ++k) comp[k] = x[D * n + k];
        const auto r = psi_.apply(comp, [&](double mu) {
            return mu > 0 ? 1.0 / (1.0 / (tau_ * mu) + b_ * mu + a_) : 0.0;
        });
        for (std::size_t k = 0; k < n; ++k) out[D * n + k] = r[k];
        return out;
    }

private:
    TensorSpectrum<D> y_;
    TensorSpectrum<D> psi_;
    double c1_ = 1.0, c2_ = 0.0, tau_ = 1.0, b_ = 0.0, a_ = 0.0;
};

/// Minimizes 𝔽ᵐ starting from the previous state. The returned state never
/// has a larger functional value than the previous state (up to 1e-12).
template <int D>
StepResult<D> minimize_increment(const Model<D>& model, const NodalState<D>& prev, double t_m, double tau,
                                 const SolverConfig& cfg, std::optional<double> reference_mass = std::nullopt,
                                 Preconditioner<D>* shared_precond = nullptr) {
    cfg.validate();
    std::optional<Preconditioner<D>> own;
    if (shared_precond == nullptr) own.emplace(model.grid);
    Preconditioner<D>& precond = shared_precond ? *shared_precond : *own;
    precond.calibrate(model, prev, t_m, tau);
    const auto h0 = [&](const std::vector<double>& q) { return precond(q); };
    const IncrementalFunctional<D> fn(model, t_m, tau, prev.y, prev.psi, reference_mass);
    const auto& grid = model.grid;
    const std::size_t n = grid.size();
    const double mass = fn.reference_mass();

    VectorField<D> y, gy;
    ScalarField psi, gp;
    StepReport rep;

    // Evaluates at x after restoring the exact mean of ψ; returns the
    // projected gradient in `g`.
    auto eval = [&](std::vector<double>& x, std::vector<double>& g) {
        ++rep.evaluations;
        detail::unpack<D>(x, y, psi);
        const double shift = mass - grid.mean(psi);
        for (std::size_t k = 0; k < n; ++k) {
            psi[k] += shift;
            x[D * n + k] = psi[k];
        }
        const IncrementValue v = fn.value_and_gradient(y, psi, gy, gp);
        if (!v.finite()) return v;
        fn.project(gy, gp);
        g = detail::pack<D>(gy, gp);
        return v;
    };

    std::vector<double> x = detail::pack<D>(prev.y, prev.psi);
    std::vector<double> g;
    IncrementValue v = eval(x, g);
    if (!v.finite()) throw InfiniteEnergy("previous state is inadmissible at t = " + std::to_string(t_m));
    rep.value_start = v.total;

    const double f0 = v.total;
    const double drift_cap = f0 + 1e-13 * (1.0 + std::abs(f0));
    std::vector<double> best_x = x;
    IncrementValue best_v = v;
    double best_gn = std::sqrt(detail::dotv(g, g));

    std::deque<detail::Pair> mem;
    double gn = best_gn;
    auto threshold = [&](double f) { return cfg.grad_tol * (1.0 + std::abs(f)); };

    while (true) {
        gn = std::sqrt(detail::dotv(g, g));
        if (gn <= threshold(v.total)) {
            rep.converged = true;
            break;
        }
        if (rep.iterations >= cfg.max_iters) break;
        ++rep.iterations;

        std::vector<double> d = detail::two_loop(mem, g, h0);
        double slope = detail::dotv(g, d);
        if (!(slope < 0) && !mem.empty()) {
            mem.clear();
            d = detail::two_loop(mem, g, h0);
            slope = detail::dotv(g, d);
        }
        if (!(slope < 0)) {
            d = g;
            for (double& e : d) e = -e;
            slope = -gn * gn;
        }
        double alpha = mem.empty() ? std::min(1.0, 0.1 / detail::norm_inf(d)) : 1.0;

        // Backtracking: +∞ (inadmissible) trials are rejected like any
        // Armijo failure. Near the roundoff floor of 𝔽, a step that does not
        // raise 𝔽 beyond noise level and satisfies the approximate Wolfe
        // slope conditions is accepted instead.
        const double noise = 1e-14 * (1.0 + std::abs(v.total));
        std::vector<double> xt(x.size()), gt;
        IncrementValue vt;
        bool accepted = false;
        while (alpha >= 1e-16) {
            for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + alpha * d[i];
            vt = eval(xt, gt);
            if (vt.finite()) {
                if (vt.total <= v.total + cfg.armijo_c * alpha * slope) {
                    accepted = true;
                    break;
                }
                const double slope_t = detail::dotv(gt, d);
                if (vt.total <= v.total + noise && vt.total <= drift_cap && slope_t >= 0.9 * slope &&
                    slope_t <= -0.8 * slope) {
                    ++rep.approximate_steps;
                    accepted = true;
                    break;
                }
            }
            alpha *= cfg.backtrack_factor;
        }
        if (!accepted) {
            if (!mem.empty()) {
                mem.clear();
                ++rep.restarts;
                continue;
            }
            std::ostringstream os;
            os << "no admissible step above 1e-16 at t = " << t_m << " (iteration " << rep.iterations
               << ", |Pg| = " << gn << ", threshold " << threshold(v.total) << ")";
            throw LineSearchFailure(os.str());
        }

        detail::Pair pr{std::vector<double>(x.size()), std::vector<double>(x.size()), 0.0};
        for (std::size_t i = 0; i < x.size(); ++i) {
            pr.s[i] = xt[i] - x[i];
            pr.y[i] = gt[i] - g[i];
        }
        const double sy = detail::dotv(pr.s, pr.y);
        if (sy > 1e-12 * std::sqrt(detail::dotv(pr.s, pr.s) * detail::dotv(pr.y, pr.y))) {
            pr.rho = 1.0 / sy;
            mem.push_back(std::move(pr));
            if (static_cast<int>(mem.size()) > cfg.memory) mem.pop_front();
        }
        x.swap(xt);
        g.swap(gt);
        v = vt;
        if (v.total < best_v.total) {
            best_x = x;
            best_v = v;
            best_gn = std::sqrt(detail::dotv(g, g));
        }
    }

    if (!rep.converged) {
        rep.budget_exhausted = true;
        if (!(v.total <= f0 + 1e-12)) {
            x = best_x;
            v = best_v;
            gn = best_gn;
        }
        if (!(v.total <= f0 + 1e-12))
            throw IterationBudgetExceeded("iteration budget exhausted without descent at t = " + std::to_string(t_m));
        std::ostringstream os;
        os << "iteration budget exhausted at t = " << t_m << ": |Pg| = " << gn << " > " << threshold(v.total)
           << ", returning best iterate";
        log_warn(os.str());
    }
    rep.value_end = v.total;
    rep.grad_norm = gn;
    rep.grad_threshold = threshold(v.total);

    StepResult<D> out;
    detail::unpack<D>(x, out.state.y, out.state.psi);
    out.state.t = t_m;
    out.state.energy = v.energy;
    out.value = v;
    out.report = rep;
    return out;
}

/// Nodal ∂ψW (elastic coupling through g plus double well) at a state.
template <int D>
ScalarField psi_derivative_field(const Model<D>& model, double t, const VectorField<D>& y, const ScalarField& psi) {
    const auto& g = model.grid;
    const Kinematics<D> kin = kinematics(g, y, psi);
    ScalarField out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto lt = local_terms(model.family.jet(t, y[k]), kin.gy[k], kin.hy[k], psi[k], kin.gpsi[k],
                                    model.params, model.options.det_floor);
        if (!lt.admissible) throw InfiniteEnergy("chemical potential requested at an inadmissible state");
        out[k] = lt.s_psi;
    }
    return out;
}

struct ChemicalPotential {
    ScalarField mu;
    double lambda = 0.0;
};

/// μ = -(-Δ)⁻¹((ψ_new - ψ_prev)/τ) + λ with λ the mean of ∂ψW at the new state.
template <int D>
ChemicalPotential chemical_potential(const Model<D>& model, const NodalState<D>& next, const NodalState<D>& prev,
                                     double tau) {
    const auto& g = model.grid;
    ScalarField rate(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) rate[k] = (next.psi[k] - prev.psi[k]) / tau;
    if (std::abs(g.mean(rate)) * tau > 1e-10) throw MassMismatch("phase-field mass changed across the step");
    const ScalarField u = model.laplacian.solve_poisson_meanfree(remove_mean(g, rate), model.options.poisson_tol);
    ChemicalPotential cp;
    cp.lambda = g.mean(psi_derivative_field(model, next.t, next.y, next.psi));
    cp.mu.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) cp.mu[k] = -u[k] + cp.lambda;
    return cp;
}

struct StepRecord {
    StepReport solver;
    IncrementValue value;  // 𝔽ᵐ at the accepted state, split by term
    double lambda = 0.0;
    double det_min = 0.0;
    double mass = 0.0;
};

/// States m = 0..M at tᵐ = mτ. mu[m] and steps[m] refer to step m ≥ 1;
/// index 0 holds the initial mass/det data and an empty μ.
template <int D>
struct Trajectory {
    double tau = 0.0;
    double horizon = 0.0;
    std::vector<NodalState<D>> states;
    std::vector<ScalarField> mu;
    std::vector<StepRecord> steps;

    int steps_count() const { return static_cast<int>(states.size()) - 1; }

    /// Index of the piecewise-constant interpolant continuous from the left:
    /// tᵐ ↦ m, t ∈ (tᵐ⁻¹, tᵐ] ↦ m.
    int overline_index(double t) const {
        const int m = static_cast<int>(std::ceil(t / tau - 1e-9));
        return std::clamp(m, 0, steps_count());
    }
    /// Index of the piecewise-constant interpolant continuous from the right:
    /// t ∈ [tᵐ⁻¹, tᵐ) ↦ m - 1, so the left limit at tᵐ is state m - 1.
    int underline_index(double t) const {
        const int m = static_cast<int>(std::floor(t / tau + 1e-9));
        return std::clamp(m, 0, steps_count());
    }
    const NodalState<D>& overline(double t) const { return states[overline_index(t)]; }
    const NodalState<D>& underline(double t) const { return states[underline_index(t)]; }

    /// Piecewise-linear interpolant in time.
    std::pair<VectorField<D>, ScalarField> hat(double t) const {
        const int m = std::max(1, overline_index(t));
        const auto& a = states[m - 1];
        const auto& b = states[m];
        const double s = std::clamp((t - a.t) / tau, 0.0, 1.0);
        if (s > 1.0 - 1e-9) return {b.y, b.psi};
        if (s < 1e-9) return {a.y, a.psi};
        std::pair<VectorField<D>, ScalarField> r{a.y, a.psi};
        for (std::size_t k = 0; k < a.y.size(); ++k) {
            r.first[k] = (1.0 - s) * a.y[k] + s * b.y[k];
            r.second[k] = (1.0 - s) * a.psi[k] + s * b.psi[k];
        }
        return r;
    }
};

/// Checks membership of (y, ψ) in the admissible set: y = id exactly on Γ_D,
/// finite energy, positive nodal det(∇y).
template <int D>
void check_admissible(const Model<D>& model, double t, const VectorField<D>& y, const ScalarField& psi) {
    const auto& g = model.grid;
    if (y.size() != g.size() || psi.size() != g.size()) throw ValidationError("initial data has the wrong node count");
    for (std::size_t k : g.dirichlet_nodes())
        if (y[k].v != g.coord(k).v) throw ValidationError("initial deformation differs from identity on the Dirichlet part");
    if (!(min_det(g, y) > 0)) throw NonpositiveDeterminant("initial deformation has nonpositive det");
    if (!free_energy(model, t, y, psi).finite()) throw InfiniteEnergy("initial state has infinite energy");
}

using StepObserver = std::function<void(int, const StepRecord&)>;

/// Runs M steps of size T/M from (y⁰, ψ⁰). Errors raised in step m are
/// rethrown as StepError(m, ...).
template <int D>
Trajectory<D> run_simulation(const Model<D>& model, const VectorField<D>& y0, const ScalarField& psi0, double horizon,
                             int steps, const SolverConfig& cfg, const StepObserver& observer = {}) {
    if (!(horizon > 0)) throw ValidationError("time horizon must be positive");
    if (steps < 1) throw ValidationError("number of time steps must be at least 1");
    cfg.validate();
    check_admissible(model, 0.0, y0, psi0);
    const auto& g = model.grid;
    Preconditioner<D> precond(g);

    Trajectory<D> tr;
    tr.tau = horizon / steps;
    tr.horizon = horizon;
    const double mass = g.mean(psi0);
    tr.states.push_back({0.0, y0, psi0, free_energy(model, 0.0, y0, psi0)});
    tr.mu.emplace_back();
    StepRecord first;
    first.det_min = min_det(g, y0);
    first.mass = mass;
    first.value.energy = tr.states[0].energy;
    first.value.total = tr.states[0].energy.total;
    tr.steps.push_back(first);

    for (int m = 1; m <= steps; ++m) {
        const double t = m * horizon / steps;
        try {
            auto res = minimize_increment(model, tr.states[m - 1], t, tr.tau, cfg, mass, &precond);
            const auto cp = chemical_potential(model, res.state, tr.states[m - 1], tr.tau);
            StepRecord rec;
            rec.solver = res.report;
            rec.value = res.value;
            rec.lambda = cp.lambda;
            rec.det_min = min_det(g, res.state.y);
            rec.mass = g.mean(res.state.psi);
            tr.states.push_back(std::move(res.state));
            tr.mu.push_back(cp.mu);
            tr.steps.push_back(rec);
            if (observer) observer(m, rec);
        } catch (const StepError&) {
            throw;
        } catch (const Error& e) {
            throw StepError(m, e.what());
        }
    }
    return tr;
}

/// Rebuilds the per-step records of a trajectory from its stored states
/// (e.g. snapshots of an earlier run). The solver reports carry the
/// comparison values, the projected gradient and its threshold but no
/// iteration counts.
template <int D>
Trajectory<D> rebuild_trajectory(const Model<D>& model, double horizon,
                                 const std::vector<std::pair<VectorField<D>, ScalarField>>& states,
                                 const SolverConfig& cfg) {
    if (states.size() < 2) throw ValidationError("a trajectory needs at least two states");
    cfg.validate();
    const auto& g = model.grid;
    const int steps = static_cast<int>(states.size()) - 1;
    check_admissible(model, 0.0, states[0].first, states[0].second);
    Trajectory<D> tr;
    tr.tau = horizon / steps;
    tr.horizon = horizon;
    const double mass = g.mean(states[0].second);
    tr.states.push_back({0.0, states[0].first, states[0].second, free_energy(model, 0.0, states[0].first, states[0].second)});
    tr.mu.emplace_back();
    StepRecord first;
    first.det_min = min_det(g, states[0].first);
    first.mass = mass;
    first.value.energy = tr.states[0].energy;
    first.value.total = tr.states[0].energy.total;
    tr.steps.push_back(first);
    for (int m = 1; m <= steps; ++m) {
        const double t = m * horizon / steps;
        const auto& prev = tr.states[m - 1];
        const auto& [y, psi] = states[m];
        if (y.size() != g.size() || psi.size() != g.size()) throw ValidationError("state has the wrong node count");
        const IncrementalFunctional<D> fn(model, t, tr.tau, prev.y, prev.psi, mass);
        StepRecord rec;
        rec.solver.value_start = fn.value(prev.y, prev.psi).total;
        VectorField<D> gy;
        ScalarField gp;
        rec.value = fn.value_and_gradient(y, psi, gy, gp);
        if (!rec.value.finite()) throw StepError(m, "stored state has infinite energy");
        fn.project(gy, gp);
        double s = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) s += dot(gy[k], gy[k]) + gp[k] * gp[k];
        rec.solver.value_end = rec.value.total;
        rec.solver.grad_norm = std::sqrt(s);
        rec.solver.grad_threshold = cfg.grad_tol * (1.0 + std::abs(rec.value.total));
        rec.solver.converged = rec.solver.grad_norm <= rec.solver.grad_threshold;
        tr.states.push_back({t, y, psi, rec.value.energy});
        const auto cp = chemical_potential(model, tr.states[m], prev, tr.tau);
        rec.lambda = cp.lambda;
        rec.det_min = min_det(g, y);
        rec.mass = g.mean(psi);
        tr.mu.push_back(cp.mu);
        tr.steps.push_back(rec);
    }
    return tr;
}

}  // namespace gelstep
