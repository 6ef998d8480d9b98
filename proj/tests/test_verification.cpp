#include <gtest/gtest.h>

#include <sstream>

#include "gelstep/run.hpp"
#include "oracles.hpp"

using namespace gelstep;

namespace {

Simulation<2> canonical(const std::string& name, int steps) {
    RunConfig c = parse_config(canonical_config_text(name));
    RunLog log;
    return simulate<2>(c, steps, c.n, log);
}

// Shared runs: the scheme is deterministic, so computing each once is enough.
const Simulation<2>& equilibrium() {
    static const auto s = canonical("equilibrium", 8);
    return s;
}
const Simulation<2>& spinodal() {
    static const auto s = canonical("spinodal", 16);
    return s;
}
const Simulation<2>& stretch() {
    static const auto s = canonical("affine_stretch", 16);
    return s;
}

}  // namespace

TEST(Edi, EquilibriumLedgerIsFlat) {
    const auto& s = equilibrium();
    const auto rep = check_edi(s.traj, s.model);
    const double f0 = s.traj.states[0].energy.total;
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.lhs, f0);
        EXPECT_EQ(r.rhs, f0);
        EXPECT_EQ(r.hminus_dist, 0.0);
        EXPECT_EQ(r.viscous, 0.0);
        EXPECT_EQ(r.dt_f_integral, 0.0);
    }
    EXPECT_TRUE(rep.pass());
}

TEST(Edi, SpinodalRhsConstantLhsNonIncreasing) {
    const auto& s = spinodal();
    const auto rep = check_edi(s.traj, s.model);
    const double f0 = s.traj.states[0].energy.total;
    for (std::size_t m = 1; m < rep.rows.size(); ++m) {
        EXPECT_EQ(rep.rows[m].dt_f_integral, 0.0);
        EXPECT_EQ(rep.rows[m].rhs, f0);
        EXPECT_LE(rep.rows[m].lhs, rep.rows[m - 1].lhs + 1e-13) << "m = " << m;
        EXPECT_GT(rep.rows[m].hminus_dist, 0.0);
    }
    EXPECT_LT(rep.rows.back().energy.total, f0);
    for (const auto& v : rep.verdicts()) EXPECT_TRUE(v.pass) << v.name << " = " << v.value;
}

TEST(Edi, AffineStretchLedgerTermsRecomputed) {
    const auto& s = stretch();
    const auto& g = s.model.grid;
    const auto rep = check_edi(s.traj, s.model);
    const double tau = s.traj.tau;
    double power = 0.0, diss = 0.0;
    for (int m = 1; m <= s.traj.steps_count(); ++m) {
        const auto& prev = s.traj.states[m - 1];
        const auto& cur = s.traj.states[m];
        // Dissipation terms from the states alone.
        ScalarField dpsi(g.size());
        VectorField<2> rate(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            dpsi[k] = cur.psi[k] - prev.psi[k];
            rate[k] = (cur.y[k] - prev.y[k]) / tau;
        }
        const double hm = s.model.laplacian.hminus_norm_sq(remove_mean(g, dpsi), 1e-13) / (2 * tau);
        const double vi = tau * viscous_dissipation(s.model, cur.t, prev.y, rate, prev.psi);
        EXPECT_NEAR(rep.rows[m].hminus_dist, hm, 1e-10 * (1 + hm));
        EXPECT_NEAR(rep.rows[m].viscous, vi, 1e-10 * (1 + vi));
        // Power term: exact difference of ℱ at the frozen previous state.
        const double exact = free_energy(s.model, cur.t, prev.y, prev.psi).total - prev.energy.total;
        EXPECT_NEAR(rep.rows[m].dt_f_integral, exact, 1e-9);
        power += exact;
        diss += hm + vi;
        EXPECT_NEAR(rep.rows[m].lhs, cur.energy.total + diss, 1e-9);
        EXPECT_NEAR(rep.rows[m].rhs, s.traj.states[0].energy.total + power, 1e-9);
    }
    EXPECT_GT(power, 0.01);
    for (const auto& v : rep.verdicts()) EXPECT_TRUE(v.pass) << v.name << " = " << v.value;
}

TEST(Edi, TelescopingMatchesCumulativeMargin) {
    const auto rep = check_edi(stretch().traj, stretch().model);
    double sum = 0.0;
    for (std::size_t m = 1; m < rep.rows.size(); ++m) sum += rep.rows[m].step_slack;
    EXPECT_NEAR(sum, rep.rows.back().rhs - rep.rows.back().lhs, 1e-12);
    EXPECT_TRUE(rep.telescoping.pass);
}

TEST(Edi, DetectsEnergyIncrease) {
    auto s = spinodal();
    // Swap in a state of much higher energy at step 5: the ledger must break.
    auto& st = s.traj.states[5];
    for (std::size_t k = 0; k < st.psi.size(); ++k) st.psi[k] += 0.4 * std::sin(7.0 * static_cast<double>(k));
    st.energy = free_energy(s.model, st.t, st.y, st.psi);
    s.traj.steps[5].value.energy = st.energy;
    s.traj.steps[5].value.total = st.energy.total;
    const auto rep = check_edi(s.traj, s.model);
    EXPECT_FALSE(rep.inequality.pass);
    EXPECT_FALSE(rep.pass());
}

TEST(Residuals, ConstantTestField) {
    const auto& s = spinodal();
    const auto& g = s.model.grid;
    const double tau = s.traj.tau;
    for (int m = 1; m <= s.traj.steps_count(); ++m) {
        const auto& prev = s.traj.states[m - 1];
        const auto& cur = s.traj.states[m];
        const ScalarField one(g.size(), 1.0);
        // Time identity with ζ ≡ 1: mass conservation, ∇1 = 0.
        double lhs = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) lhs += g.weight(k) * (cur.psi[k] - prev.psi[k]) / tau;
        EXPECT_NEAR(lhs, 0.0, 1e-12);
        EXPECT_NEAR(s.model.laplacian.dirichlet_form(s.traj.mu[m], one), 0.0, 1e-10);
        // Chemical identity with ζ ≡ 1: ∫μ = λ|Ω| = ∫∂ψW.
        const IncrementalFunctional<2> fn(s.model, cur.t, tau, prev.y, prev.psi);
        const auto tt = fn.tangent_terms(cur.y, cur.psi, VectorField<2>(g.size()), one);
        EXPECT_NEAR(g.integrate(s.traj.mu[m]), s.traj.steps[m].lambda, 1e-10);
        EXPECT_NEAR(tt.chem_psi, s.traj.steps[m].lambda, 1e-8);
        EXPECT_EQ(tt.chem_grad, 0.0);
    }
}

TEST(Residuals, CanonicalRunsBelowThreshold) {
    for (const auto* s : {&equilibrium(), &spinodal(), &stretch()}) {
        const auto rep = check_el_residuals(s->traj, s->model, 20, 7, 1e-8);
        EXPECT_EQ(rep.fields, 1 + 2 + 3 + 20);
        EXPECT_DOUBLE_EQ(rep.threshold, 1e-6);
        for (const auto& v : rep.verdicts()) EXPECT_TRUE(v.pass) << v.name << " = " << v.value;
    }
    const auto eq = check_el_residuals(equilibrium().traj, equilibrium().model, 20, 7, 1e-8);
    EXPECT_LE(eq.weak_elast, 1e-12);
    EXPECT_LE(eq.weak_time, 1e-12);
}

TEST(Residuals, DetectPerturbedChemicalPotential) {
    auto s = spinodal();
    const auto& g = s.model.grid;
    for (int m = 1; m <= s.traj.steps_count(); ++m) {
        const auto bump = g.sample_scalar([](const Vec<2>& x) { return 1e-3 * std::cos(3.0 * x[0]) * x[1]; });
        for (std::size_t k = 0; k < g.size(); ++k) s.traj.mu[m][k] += bump[k];
    }
    const auto rep = check_el_residuals(s.traj, s.model, 20, 7, 1e-8);
    EXPECT_GT(rep.weak_time, rep.threshold);
    EXPECT_GT(rep.weak_chem, rep.threshold);
    EXPECT_FALSE(rep.pass());
}

TEST(Residuals, BatteryComposition) {
    const Grid<2> g(9);
    const auto b = test_field_battery(g, 4, 3);
    ASSERT_EQ(b.size(), 10u);
    for (double v : b[0]) EXPECT_EQ(v, 1.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto x = g.coord(k);
        EXPECT_EQ(b[1][k], x[0]);
        EXPECT_EQ(b[2][k], x[1]);
        EXPECT_EQ(b[3][k], x[0] * x[0]);
        EXPECT_EQ(b[4][k], x[0] * x[1]);
        EXPECT_EQ(b[5][k], x[1] * x[1]);
    }
    EXPECT_EQ(b[6], smooth_random_field(g, 3, 3, 1.0));
    EXPECT_EQ(b, test_field_battery(g, 4, 3));
}

TEST(Apriori, EquilibriumTrivialValues) {
    const auto rep = check_apriori(equilibrium().traj, equilibrium().model);
    EXPECT_EQ(rep.bounds[2], 1.0);  // det-inverse sup at y = id
    EXPECT_EQ(rep.bounds[3], 0.0);
    EXPECT_EQ(rep.bounds[5], 0.0);
    EXPECT_EQ(rep.bounds[6], 0.0);
    EXPECT_EQ(rep.det_min, 1.0);
    EXPECT_EQ(rep.mass_drift, 0.0);
    EXPECT_EQ(rep.c1, 0.0);
    const double f0 = equilibrium().traj.states[0].energy.total;
    EXPECT_DOUBLE_EQ(rep.gronwall_ratio, f0 / (f0 + 1));
    EXPECT_TRUE(rep.pass());
}

TEST(Apriori, NormsAgainstDirectFormulas) {
    const auto& s = stretch();
    const auto& g = s.model.grid;
    const auto rep = check_apriori(s.traj, s.model);
    // L∞ in time of ‖ψ‖_{H¹}, from the stiffness and weights.
    double psi_h1 = 0.0;
    for (const auto& st : s.traj.states) {
        double l2 = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) l2 += g.weight(k) * st.psi[k] * st.psi[k];
        psi_h1 = std::max(psi_h1, std::sqrt(l2 + s.model.laplacian.dirichlet_form(st.psi, st.psi)));
    }
    EXPECT_NEAR(rep.bounds[4], psi_h1, 1e-12 * psi_h1);
    // L² in time of the dual norm of the ψ rate equals Σ 2 τ·(hminus term)/τ².
    double dual = 0.0;
    for (int m = 1; m <= s.traj.steps_count(); ++m) dual += 2.0 * s.traj.steps[m].value.hminus;
    EXPECT_NEAR(rep.bounds[5], std::sqrt(dual), 1e-8 * std::sqrt(dual));
    EXPECT_LE(rep.mass_drift, 1e-10);
    EXPECT_GT(rep.c1, 0.0);
    EXPECT_GT(rep.korn_constant, 0.0);
    EXPECT_TRUE(rep.pass());
}

TEST(Apriori, BoundsUniformAcrossSteps) {
    std::vector<AprioriReport> reps;
    for (int m : {8, 16, 32}) {
        const auto s = canonical("spinodal", m);
        reps.push_back(check_apriori(s.traj, s.model));
    }
    const auto spread = bound_spread(reps);
    for (int i = 0; i < 7; ++i) EXPECT_LT(spread[i], 0.2) << kBoundNames[i];
}

TEST(Apriori, SpreadArithmetic) {
    AprioriReport a, b;
    a.bounds.fill(2.0);
    b.bounds.fill(2.0);
    b.bounds[3] = 4.0;
    a.bounds[6] = 0.0;
    b.bounds[6] = 0.0;
    const auto s = bound_spread({a, b});
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[3], 0.5);
    EXPECT_EQ(s[6], 0.0);
}

TEST(Refinement, InjectionAndNesting) {
    const Grid<2> fine(17), coarse(9), odd(7);
    const auto f = fine.sample_scalar([](const Vec<2>& x) { return x[0] + 3 * x[1]; });
    const auto c = inject(fine, coarse, f);
    for (std::size_t k = 0; k < coarse.size(); ++k) EXPECT_EQ(c[k], coarse.coord(k)[0] + 3 * coarse.coord(k)[1]);
    EXPECT_THROW(inject(fine, odd, f), ValidationError);
}

TEST(Refinement, EquilibriumDistancesVanish) {
    RunConfig c = parse_config(canonical_config_text("equilibrium"));
    RunLog log;
    const auto run = [&](int m, int n) {
        auto s = simulate<2>(c, m, n, log);
        return std::make_pair(std::move(s.traj), std::move(s.model));
    };
    const auto rep = refinement_study<2>(run, {4, 8, 16}, {9});
    ASSERT_EQ(rep.rows.size(), 2u);
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.psi_distance, 0.0);
        EXPECT_EQ(r.y_distance, 0.0);
    }
    EXPECT_TRUE(rep.psi_decreasing);
    EXPECT_TRUE(rep.y_decreasing);
    EXPECT_THROW(refinement_study<2>(run, {4, 6}, {9}), ValidationError);
    EXPECT_THROW(refinement_study<2>(run, {4}, {9}), ValidationError);
}

TEST(Refinement, AffineStretchYDistancesDecrease) {
    RunConfig c = parse_config(canonical_config_text("affine_stretch"));
    RunLog log;
    const auto run = [&](int m, int n) {
        auto s = simulate<2>(c, m, n, log);
        return std::make_pair(std::move(s.traj), std::move(s.model));
    };
    const auto rep = refinement_study<2>(run, {8, 16, 32}, {17});
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_LT(rep.rows[1].y_distance, rep.rows[0].y_distance);
    EXPECT_GT(rep.rows[1].y_distance, 0.0);
    EXPECT_TRUE(rep.y_decreasing);
}

TEST(Report, AggregateAndEmission) {
    const auto& s = spinodal();
    VerifyOptions opt;
    auto rep = verify_trajectory(s.traj, s.model, opt);
    EXPECT_TRUE(rep.pass());
    EXPECT_EQ(rep.verdicts().size(), 5u + 3u + 3u + 1u);

    opt.det_gate = 2.0;  // unattainable: y = id has det 1
    opt.residuals = false;
    rep = verify_trajectory(s.traj, s.model, opt);
    EXPECT_FALSE(rep.pass());
    EXPECT_FALSE(rep.residuals.has_value());
    EXPECT_EQ(failed_list(rep.verdicts()).rfind("det_min=", 0), 0u);

    std::ostringstream os;
    write_report(os, rep);
    EXPECT_NE(os.str().find("overall = FAIL"), std::string::npos);
    EXPECT_NE(os.str().find("det_min = "), std::string::npos);

    std::ostringstream csv;
    write_edi_csv(csv, *rep.edi);
    std::string header;
    std::getline(std::istringstream(csv.str()) >> std::ws, header);
    EXPECT_EQ(header, "m,t,f_el,f_pf,f_hy,total,hminus_dist,viscous,dt_F_integral,edi_lhs,edi_rhs,det_min,mass");
    std::size_t lines = 0;
    for (char ch : csv.str()) lines += ch == '\n';
    EXPECT_EQ(lines, static_cast<std::size_t>(s.traj.steps_count()) + 2);

    std::ostringstream vs;
    write_verdicts(vs, {verdict_le("x", 1.0, 2.0), verdict_ge("y", 1.0, 2.0)});
    EXPECT_EQ(vs.str(), "x = 1 <= 2 : PASS\ny = 1 >= 2 : FAIL\n");
}
