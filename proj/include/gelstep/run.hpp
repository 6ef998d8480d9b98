#pragma once

// Run orchestration: builds the model and initial data from a RunConfig,
// runs the scheme, and produces verification and refinement reports with
// their output files.

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gelstep/config.hpp"
#include "gelstep/io.hpp"
#include "gelstep/log.hpp"
#include "gelstep/verification.hpp"

namespace gelstep {

/// Collects run-log lines; each line is also forwarded to the stderr logger.
class RunLog {
public:
    void info(const std::string& s) {
        lines_.push_back(s);
        log_info(s);
    }
    void warn(const std::string& s) {
        lines_.push_back("warning: " + s);
        warnings_.push_back(s);
        log_warn(s);
    }
    void debug(const std::string& s) {
        lines_.push_back(s);
        log_debug(s);
    }
    const std::vector<std::string>& lines() const { return lines_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    void write(std::ostream& os) const {
        for (const auto& l : lines_) os << l << '\n';
    }

private:
    std::vector<std::string> lines_;
    std::vector<std::string> warnings_;
};

template <int D>
DirichletFamily<D> make_family(const RunConfig& c) {
    auto mat = [](const std::vector<double>& v, const Mat<D>& fallback) {
        if (v.empty()) return fallback;
        Mat<D> m;
        for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] = v[i];
        return m;
    };
    auto vec = [](const std::vector<double>& v) {
        Vec<D> r;
        for (std::size_t i = 0; i < v.size() && i < static_cast<std::size_t>(D); ++i) r[static_cast<int>(i)] = v[i];
        return r;
    };
    DirichletFamily<D> fam = DirichletFamily<D>::identity();
    if (c.family == "affine")
        fam = DirichletFamily<D>::affine(mat(c.a0, Mat<D>::identity()), mat(c.a1, Mat<D>{}), vec(c.b0), vec(c.b1),
                                         c.horizon);
    else if (c.family == "gentle_bend")
        fam = DirichletFamily<D>::gentle_bend(c.bend_amplitude, c.bend_frequency, c.horizon);
    if (c.rotation != 0.0) {
        if constexpr (D == 2) {
            Mat<D> r;
            r(0, 0) = std::cos(c.rotation);
            r(0, 1) = -std::sin(c.rotation);
            r(1, 0) = std::sin(c.rotation);
            r(1, 1) = std::cos(c.rotation);
            fam = fam.rotated(r);
        } else {
            throw ValidationError("family.rotation is only supported for d = 2");
        }
    }
    return fam;
}

template <int D>
Model<D> make_model(const RunConfig& c, int n) {
    AssemblyOptions opt;
    opt.det_floor = c.det_floor;
    opt.rate = c.rate;
    opt.poisson_tol = c.poisson_tol;
    opt.threads = c.threads;
    return Model<D>(Grid<D>(n, parse_dirichlet_faces(c.dirichlet)), make_family<D>(c), c.params, opt);
}

template <int D>
ScalarField initial_psi(const RunConfig& c, const Grid<D>& g) {
    switch (c.psi_init) {
        case PsiInit::Constant:
            return ScalarField(g.size(), c.psi_value);
        case PsiInit::Noise: {
            ScalarField f = smooth_random_field(g, c.seed, c.kmax, c.psi_amplitude);
            for (double& v : f) v += c.psi_value;
            return f;
        }
        case PsiInit::Stripe:
            return g.sample_scalar([&](const Vec<D>& x) {
                return c.psi_value + c.psi_amplitude * std::cos(std::numbers::pi * c.stripe_mode * x[0]);
            });
    }
    return {};
}

template <int D>
VectorField<D> initial_y(const RunConfig& c, const Grid<D>& g) {
    if (c.y_init == YInit::Identity) return g.identity_field();
    const auto snap = read_snapshot<D>(c.y_file);
    if (snap.n != g.n())
        throw ValidationError("initial.y_file has n=" + std::to_string(snap.n) + ", config has n=" + std::to_string(g.n()));
    return snap.y;
}

struct Preflight {
    SmallnessReport smallness;
    DiagnosticReport diagnostics;
};

/// Logs the applied defaults, the boundary-data smallness quantity and the
/// sampled structural diagnostics. A failed smallness check is a warning.
template <int D>
Preflight preflight(const RunConfig& c, const Model<D>& model, RunLog& log) {
    for (const auto& d : c.defaults_applied) log.info("default " + d);
    std::vector<Vec<D>> points;
    for (std::size_t k = 0; k < model.grid.size(); ++k) points.push_back(model.grid.coord(k));
    Preflight p;
    p.smallness = smallness_check(model.family, c.params, c.horizon, points, c.delta0);
    std::ostringstream os;
    os << "smallness lhs = " << p.smallness.lhs << " (delta0 = " << p.smallness.delta0
       << ", sup |hess vD| = " << p.smallness.sup_hessian << ")";
    log.info(os.str());
    if (!p.smallness.pass()) {
        std::ostringstream w;
        w << "smallness condition not met: lhs " << p.smallness.lhs << " >= delta0 " << p.smallness.delta0
          << "; the energy estimates are not guaranteed for this boundary data";
        log.warn(w.str());
    }
    p.diagnostics = check_assumptions<D>(c.params, c.assumption_samples, c.assumption_seed, model.viscosity);
    std::ostringstream d;
    d << "assumption diagnostics over " << p.diagnostics.samples
      << " samples: static_wel = " << p.diagnostics.static_wel_residual
      << ", static_why = " << p.diagnostics.static_why_residual
      << ", dynamic_visc = " << p.diagnostics.dynamic_visc_residual
      << ", stress_control = " << p.diagnostics.stress_control_constant << " : "
      << (p.diagnostics.pass() ? "PASS" : "FAIL");
    log.info(d.str());
    if (!p.diagnostics.pass()) log.warn("structural diagnostics exceed the frame-indifference tolerance");
    return p;
}

template <int D>
struct Simulation {
    Model<D> model;
    Trajectory<D> traj;
};

/// Runs the scheme for the config with step count M on an n-grid.
template <int D>
Simulation<D> simulate(const RunConfig& c, int steps, int n, RunLog& log) {
    Model<D> model = make_model<D>(c, n);
    const auto y0 = initial_y<D>(c, model.grid);
    const auto psi0 = initial_psi<D>(c, model.grid);
    std::ostringstream os;
    os << "simulate d=" << D << " n=" << n << " T=" << c.horizon << " M=" << steps << " family=" << c.family;
    log.info(os.str());
    const auto observer = [&](int m, const StepRecord& r) {
        std::ostringstream s;
        s << "step " << m << ": iterations " << r.solver.iterations << ", |Pg| " << r.solver.grad_norm << " (threshold "
          << r.solver.grad_threshold << "), value " << r.value.total << ", det_min " << r.det_min;
        log.debug(s.str());
        if (!r.solver.converged) log.warn("step " + std::to_string(m) + " stopped above the gradient tolerance");
    };
    auto tr = run_simulation(model, y0, psi0, c.horizon, steps, c.solver, observer);
    return {std::move(model), std::move(tr)};
}

inline VerifyOptions verify_options(const RunConfig& c) {
    VerifyOptions o;
    o.edi = c.verify_edi;
    o.residuals = c.verify_residuals;
    o.apriori = c.verify_apriori;
    o.residual_fields = c.residual_fields;
    o.residual_seed = c.residual_seed;
    o.grad_tol = c.solver.grad_tol;
    o.gronwall_ceiling = c.gronwall_ceiling;
    o.det_gate = c.det_gate;
    return o;
}

/// Gates of a plain simulation: per-step descent, determinant and mass.
template <int D>
std::vector<Verdict> simulation_verdicts(const Simulation<D>& s, const RunConfig& c) {
    double worst_desc = -kInfinity, det = kInfinity, drift = 0.0;
    const double mass0 = s.traj.steps[0].mass;
    for (int m = 1; m <= s.traj.steps_count(); ++m) {
        const auto& r = s.traj.steps[m];
        worst_desc = std::max(worst_desc, r.solver.value_end - r.solver.value_start);
        drift = std::max(drift, std::abs(r.mass - mass0));
    }
    for (const auto& r : s.traj.steps) det = std::min(det, r.det_min);
    return {verdict_le("step_descent", worst_desc, 1e-12), verdict_ge("det_min", det, c.det_gate),
            verdict_le("mass_drift", drift, 1e-10)};
}

template <int D>
void write_trajectory(const Simulation<D>& s, const RunConfig& c, const std::string& dir) {
    if (c.snapshots == SnapshotMode::None) return;
    const std::string snap_dir = dir + "/snapshots";
    ensure_directory(snap_dir);
    const int steps = s.traj.steps_count();
    for (int m = (c.snapshots == SnapshotMode::All ? 0 : steps); m <= steps; ++m) {
        Snapshot<D> snap;
        snap.n = s.model.grid.n();
        snap.t = s.traj.states[m].t;
        snap.steps = steps;
        snap.step = m;
        snap.y = s.traj.states[m].y;
        snap.psi = s.traj.states[m].psi;
        snap.mu = s.traj.mu[m];
        write_snapshot(snap_dir + "/" + snapshot_name(m), snap);
    }
}

/// Loads every snapshot of a run from `dir`/snapshots and rebuilds the
/// trajectory under the config's model.
template <int D>
Simulation<D> load_checkpoint(const RunConfig& c, const std::string& dir, RunLog& log) {
    Model<D> model = make_model<D>(c, c.n);
    std::vector<std::pair<VectorField<D>, ScalarField>> states;
    for (int m = 0; m <= c.steps; ++m) {
        const std::string path = dir + "/snapshots/" + snapshot_name(m);
        const auto snap = read_snapshot<D>(path);
        if (snap.step != m) throw ValidationError(path + ": header step " + std::to_string(snap.step) + " expected " + std::to_string(m));
        check_snapshot_matches(snap, c.n, c.steps, c.horizon);
        states.emplace_back(snap.y, snap.psi);
    }
    log.info("loaded " + std::to_string(states.size()) + " snapshots from " + dir);
    auto tr = rebuild_trajectory(model, c.horizon, states, c.solver);
    return {std::move(model), std::move(tr)};
}

struct RefinementOutcome {
    RefinementReport report;
    std::array<double, 7> spread{};
    std::vector<Verdict> verdicts;
};

template <int D>
RefinementOutcome run_refinement(const RunConfig& c, RunLog& log) {
    std::vector<int> n_list = c.refine_n.empty() ? std::vector<int>{c.n} : c.refine_n;
    const auto run = [&](int m, int n) {
        auto s = simulate<D>(c, m, n, log);
        return std::make_pair(std::move(s.traj), std::move(s.model));
    };
    RefinementOutcome out;
    out.report = refinement_study<D>(run, c.refine_m, n_list);
    out.spread = bound_spread(out.report.bounds);
    out.verdicts = out.report.verdicts();
    for (int i = 0; i < 7; ++i)
        out.verdicts.push_back(verdict_lt(std::string(kBoundNames[i]) + "_spread", out.spread[i], c.spread_limit));
    for (std::size_t i = 0; i < out.report.bounds.size(); ++i) {
        const auto& b = out.report.bounds[i];
        out.verdicts.push_back(
            verdict_le("gronwall_ratio_M" + std::to_string(c.refine_m[i]), b.gronwall_ratio, c.gronwall_ceiling));
    }
    return out;
}

/// "name=value" list of failed verdicts, for one-line summaries.
inline std::string failed_list(const std::vector<Verdict>& vs) {
    std::ostringstream os;
    os << std::setprecision(6);
    bool first = true;
    for (const auto& v : vs)
        if (!v.pass) {
            os << (first ? "" : ",") << v.name << '=' << v.value;
            first = false;
        }
    return os.str();
}

}  // namespace gelstep
