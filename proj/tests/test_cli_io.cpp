#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gelstep/run.hpp"

using namespace gelstep;
namespace fs = std::filesystem;

namespace {

const std::string kMaterial =
    "[params]\nalpha = 1\np = 6\nc_det = 4\nq = 9\ngamma = 0.01\nbeta = 3\n";

std::string minimal(const std::string& extra = "") {
    return "[grid]\nn = 9\n[time]\nT = 0.2\nM = 4\n" + extra;
}

template <typename E>
std::string error_of(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const E& e) {
        return e.what();
    }
    return "<no error>";
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("gelstep_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct CliRun {
    int code;
    std::string out;
};

CliRun run_cli(const std::string& args, const fs::path& dir) {
    const fs::path log = dir / "cli_stdout.txt";
    const std::string cmd = "cd '" + dir.string() + "' && GELSTEP_LOG=quiet '" + std::string(GELSTEP_CLI_PATH) + "' " +
                            args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return {WEXITSTATUS(status), read_text(log.string())};
}

std::string last_line(const std::string& s) {
    std::istringstream is(s);
    std::string line, last;
    while (std::getline(is, line))
        if (!line.empty()) last = line;
    return last;
}

}  // namespace

TEST(Config, MinimalConfigHasInvalidDefaultExponents) {
    const std::string msg = error_of<ValidationError>(minimal());
    EXPECT_NE(msg.find("p >= 2*beta"), std::string::npos) << msg;
}

TEST(Config, ExponentChain) {
    const RunConfig c = parse_config(minimal(kMaterial));
    EXPECT_EQ(c.params.p, 6.0);
    EXPECT_EQ(c.params.beta, 3.0);
    EXPECT_EQ(c.params.q, 9.0);
    // q below βd/(β-d) = 6
    EXPECT_NE(error_of<ValidationError>(minimal("[params]\np = 6\nbeta = 3\nq = 5\n")).find("q >= beta*d/(beta-d)"),
              std::string::npos);
    // β ≤ d
    EXPECT_NE(error_of<ValidationError>(minimal("[params]\np = 6\nbeta = 2\nq = 9\n")).find("beta > d"),
              std::string::npos);
    // In d = 3 the same exponents fail β > d.
    EXPECT_NE(error_of<ValidationError>("[grid]\nd = 3\nn = 5\n[time]\nT = 1\nM = 1\n" + kMaterial).find("beta > d"),
              std::string::npos);
}

TEST(Config, ParseErrorsNameLineOrKey) {
    EXPECT_NE(error_of<ParseError>(minimal(kMaterial + "[solver]\nbogus = 1\n")).find("'solver.bogus'"), std::string::npos);
    EXPECT_NE(error_of<ParseError>(minimal("[nosuch]\nx = 1\n")).find("[nosuch]"), std::string::npos);
    EXPECT_NE(error_of<ParseError>(minimal(kMaterial + "[solver]\nmax_iters = many\n")).find("'solver.max_iters'"),
              std::string::npos);
    EXPECT_NE(error_of<ParseError>(minimal(kMaterial + "[solver]\ngrad_tol = 1e-8x\n")).find("'solver.grad_tol'"),
              std::string::npos);
    EXPECT_NE(error_of<ParseError>("[grid]\nn = 9\nthis line has no separator\n").find("line 3"), std::string::npos);
    EXPECT_NE(error_of<ParseError>("[grid]\nn = 9\nn = 11\n").find("line 3"), std::string::npos);
    EXPECT_NE(error_of<ParseError>("[grid]\nn = 9\n" + kMaterial).find("'time.T'"), std::string::npos);
    EXPECT_NE(error_of<ParseError>("n = 9\n" + minimal(kMaterial)).find("outside"), std::string::npos);
}

TEST(Config, DefaultsRecordedAndCommentsIgnored) {
    const RunConfig c = parse_config("# header comment\n" + minimal(kMaterial) +
                                     "[family]\nkind = identity   # trailing comment\n");
    EXPECT_EQ(c.family, "identity");
    EXPECT_EQ(c.n, 9);
    const auto& d = c.defaults_applied;
    auto has = [&](const std::string& s) { return std::find(d.begin(), d.end(), s) != d.end(); };
    EXPECT_TRUE(has("grid.d = 2"));
    EXPECT_TRUE(has("params.b_kw = 0.01"));
    EXPECT_TRUE(has("solver.grad_tol = 1e-08"));
    EXPECT_TRUE(has("refine.m_list = 8 16 32 64"));
    EXPECT_FALSE(has("grid.n = 17"));
    for (const auto& s : d) EXPECT_NE(s.rfind("params.p ", 0), 0u) << s;
}

TEST(Config, StructuralValidation) {
    EXPECT_NE(error_of<ValidationError>("[grid]\nn = 9\ndirichlet = none\n[time]\nT = 1\nM = 1\n" + kMaterial).find("empty"),
              std::string::npos);
    EXPECT_NE(error_of<ValidationError>("[grid]\nn = 9\n[time]\nT = 0\nM = 1\n" + kMaterial).find("time.T"),
              std::string::npos);
    EXPECT_NE(error_of<ValidationError>(minimal(kMaterial + "[family]\nkind = affine\na1 = 1 2 3\n")).find("family.a1"),
              std::string::npos);
    EXPECT_NE(error_of<ValidationError>(minimal(kMaterial + "[refine]\nm_list = 8 12\n")).find("nested"),
              std::string::npos);
    EXPECT_NE(error_of<ValidationError>(minimal(kMaterial + "[solver]\narmijo_c = 0.7\n")).find("armijo_c"),
              std::string::npos);
}

TEST(Config, DescribeRoundTrips) {
    RunConfig c = parse_config(canonical_config_text("affine_stretch"));
    const RunConfig back = parse_config(describe(c));
    EXPECT_EQ(describe(back), describe(c));
    EXPECT_EQ(back.a1, (std::vector<double>{0.5, 0, 0, 0}));
}

TEST(Config, SampleFilesMatchCanonicalProblems) {
    for (const auto& name : canonical_names()) {
        RunConfig file = parse_config(read_text(std::string(GELSTEP_SOURCE_DIR) + "/configs/" + name + ".ini"));
        RunConfig canon = parse_config(canonical_config_text(name));
        EXPECT_EQ(file.out_dir, "out/" + name);
        file.out_dir = canon.out_dir;
        EXPECT_EQ(describe(file), describe(canon)) << name;
    }
    EXPECT_THROW(canonical_config_text("nothing"), ValidationError);
}

TEST(Snapshot, RoundTripIsBitExact) {
    const Grid<2> g(9);
    Snapshot<2> s;
    s.n = 9;
    s.t = 0.1 * 3;
    s.steps = 7;
    s.step = 3;
    s.y = g.identity_field();
    const auto u = smooth_random_displacement(g, 4, 2, 0.1);
    for (std::size_t k = 0; k < g.size(); ++k) s.y[k] += u[k];
    s.psi = smooth_random_field(g, 5, 3, 0.7);
    s.mu = smooth_random_field(g, 6, 3, 1e-7);
    s.psi[3] = 1.0 / 3.0;
    s.mu[4] = -0.0;
    std::stringstream ss;
    write_snapshot(ss, s);
    const auto r = read_snapshot<2>(ss);
    EXPECT_EQ(r.n, 9);
    EXPECT_EQ(r.t, s.t);
    EXPECT_EQ(r.steps, 7);
    EXPECT_EQ(r.step, 3);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_EQ(r.y[k].v, s.y[k].v);
        EXPECT_EQ(r.psi[k], s.psi[k]);
        EXPECT_EQ(r.mu[k], s.mu[k]);
    }
    // μ is undefined at step 0 and stored as nan.
    s.mu.clear();
    s.step = 0;
    s.t = 0;
    std::stringstream s0;
    write_snapshot(s0, s);
    EXPECT_TRUE(std::isnan(read_snapshot<2>(s0).mu[0]));
}

TEST(Snapshot, MalformedFilesRaiseFormatError) {
    const Grid<2> g(5);
    Snapshot<2> s{5, 0.5, 2, 1, g.identity_field(), ScalarField(g.size(), 0.25), ScalarField(g.size(), 0.0)};
    std::stringstream ss;
    write_snapshot(ss, s);
    const std::string good = ss.str();

    auto fails_with = [](const std::string& text, const std::string& needle) {
        std::istringstream is(text);
        try {
            (void)read_snapshot<2>(is);
        } catch (const FormatError& e) {
            return std::string(e.what()).find(needle) != std::string::npos;
        }
        return false;
    };
    EXPECT_TRUE(fails_with(good.substr(0, good.rfind('\n', good.size() / 2) + 1), "truncated"));
    EXPECT_TRUE(fails_with("", "line 1"));
    EXPECT_TRUE(fails_with("hello\n", "line 1"));
    std::string bad_num = good;
    bad_num.replace(bad_num.find("0.25"), 4, "0.2x");
    EXPECT_TRUE(fails_with(bad_num, "malformed number"));
    std::string bad_d = good;
    bad_d.replace(bad_d.find("d=2"), 3, "d=3");
    EXPECT_TRUE(fails_with(bad_d, "d=3"));
    std::string bad_step = good;
    bad_step.replace(bad_step.find("step=1"), 6, "step=9");
    EXPECT_TRUE(fails_with(bad_step, "out of range"));
    EXPECT_TRUE(fails_with(good + "extra\n", "trailing"));
    EXPECT_THROW(read_snapshot<2>(std::string("/nonexistent/dir/file.csv")), IoError);
}

TEST(Snapshot, HeaderMismatchAgainstConfig) {
    const Grid<2> g(5);
    Snapshot<2> s{5, 0.25, 4, 1, g.identity_field(), ScalarField(g.size(), 0.0), {}};
    EXPECT_NO_THROW(check_snapshot_matches(s, 5, 4, 1.0));
    EXPECT_THROW(check_snapshot_matches(s, 9, 4, 1.0), ValidationError);
    EXPECT_THROW(check_snapshot_matches(s, 5, 8, 1.0), ValidationError);
    EXPECT_THROW(check_snapshot_matches(s, 5, 4, 2.0), ValidationError);
}

TEST(Run, PreflightWarnsOnlyWhenSmallnessFails) {
    RunConfig c = parse_config(canonical_config_text("affine_stretch"));
    RunLog quiet_log;
    const auto p = preflight<2>(c, make_model<2>(c, 9), quiet_log);
    EXPECT_EQ(p.smallness.lhs, 0.0);
    EXPECT_TRUE(quiet_log.warnings().empty());
    auto logged = [](const RunLog& l, const std::string& s) {
        for (const auto& line : l.lines())
            if (line.find(s) != std::string::npos) return true;
        return false;
    };
    EXPECT_TRUE(logged(quiet_log, "smallness lhs = 0"));
    EXPECT_TRUE(logged(quiet_log, "assumption diagnostics over 1000 samples"));
    EXPECT_TRUE(logged(quiet_log, "default run.threads = 1"));

    c = parse_config(canonical_config_text("gentle_bend"));
    c.bend_amplitude = 0.6;
    c.params.gamma = 1.0;
    RunLog loud;
    const auto q = preflight<2>(c, make_model<2>(c, 9), loud);
    // (γ/α)(κπ²)³ at the final time.
    const double expected = std::pow(0.6 * M_PI * M_PI, 3.0);
    EXPECT_NEAR(q.smallness.lhs, expected, 1e-9 * expected);
    ASSERT_EQ(loud.warnings().size(), 1u);
    EXPECT_NE(loud.warnings()[0].find("smallness condition not met"), std::string::npos);
}

TEST(Run, InitialDataKinds) {
    RunConfig c = parse_config(minimal(kMaterial + "[initial]\npsi = stripe\nstripe_mode = 2\namplitude = 0.3\npsi_value = 0.1\n"));
    const Grid<2> g(9);
    const auto s = initial_psi<2>(c, g);
    for (std::size_t k = 0; k < g.size(); ++k)
        EXPECT_NEAR(s[k], 0.1 + 0.3 * std::cos(2 * M_PI * g.coord(k)[0]), 1e-15);
    c.psi_init = PsiInit::Noise;
    c.seed = 42;
    EXPECT_EQ(initial_psi<2>(c, g), [&] {
        auto f = smooth_random_field(g, 42, c.kmax, 0.3);
        for (double& v : f) v += 0.1;
        return f;
    }());
}

TEST(Run, CheckpointRebuildsTrajectory) {
    const fs::path dir = scratch("checkpoint");
    RunConfig c = parse_config(canonical_config_text("affine_stretch"));
    c.n = 9;
    c.steps = 6;
    RunLog log;
    const auto sim = simulate<2>(c, c.steps, c.n, log);
    write_trajectory(sim, c, dir.string());
    const auto back = load_checkpoint<2>(c, dir.string(), log);
    ASSERT_EQ(back.traj.steps_count(), 6);
    for (int m = 0; m <= 6; ++m) {
        EXPECT_EQ(back.traj.states[m].psi, sim.traj.states[m].psi);
        EXPECT_EQ(back.traj.states[m].energy.total, sim.traj.states[m].energy.total);
        if (m == 0) continue;
        const auto& a = back.traj.steps[m];
        const auto& b = sim.traj.steps[m];
        EXPECT_EQ(a.solver.value_start, b.solver.value_start);
        EXPECT_EQ(a.solver.value_end, b.solver.value_end);
        EXPECT_EQ(a.lambda, b.lambda);
        EXPECT_TRUE(a.solver.converged);
        for (std::size_t k = 0; k < back.traj.mu[m].size(); ++k) EXPECT_EQ(back.traj.mu[m][k], sim.traj.mu[m][k]);
    }
    EXPECT_TRUE(verify_trajectory(back.traj, back.model, verify_options(c)).pass());

    RunConfig other = c;
    other.steps = 3;
    EXPECT_THROW(load_checkpoint<2>(other, dir.string(), log), ValidationError);
    fs::remove(dir / "snapshots" / snapshot_name(4));
    EXPECT_THROW(load_checkpoint<2>(c, dir.string(), log), IoError);
    fs::remove_all(dir);
}

TEST(Run, DeterministicEnergyLedger) {
    RunConfig c = parse_config(canonical_config_text("spinodal"));
    c.steps = 4;
    auto ledger = [&](int threads) {
        c.threads = threads;
        RunLog log;
        const auto s = simulate<2>(c, c.steps, c.n, log);
        std::ostringstream os;
        write_edi_csv(os, check_edi(s.traj, s.model));
        return os.str();
    };
    const std::string a = ledger(1);
    EXPECT_EQ(a, ledger(1));
    EXPECT_EQ(ledger(2), ledger(2));
}

TEST(Cli, EndToEnd) {
    const fs::path dir = scratch("cli");
    const std::string cfg = std::string(GELSTEP_SOURCE_DIR) + "/configs/equilibrium.ini";

    auto r = run_cli("selftest", dir);
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(last_line(r.out), "RESULT selftest PASS checks=6");

    r = run_cli("simulate " + cfg + " --out eq", dir);
    EXPECT_EQ(r.code, 0) << r.out;
    // Equilibrium: every ledger row carries the same energy.
    std::istringstream csv(read_text((dir / "eq" / "energy.csv").string()));
    std::string line, first_total;
    std::getline(csv, line);
    int rows = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        ASSERT_EQ(f.size(), 13u);
        if (rows == 0) first_total = f[5];
        EXPECT_EQ(f[5], first_total);
        ++rows;
    }
    EXPECT_EQ(rows, 17);
    EXPECT_TRUE(fs::exists(dir / "eq" / "snapshots" / snapshot_name(16)));
    const std::string runlog = read_text((dir / "eq" / "run.log").string());
    EXPECT_NE(runlog.find("smallness lhs"), std::string::npos);
    EXPECT_NE(runlog.find("assumption diagnostics"), std::string::npos);

    r = run_cli("verify eq", dir);
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(last_line(r.out).rfind("RESULT verify PASS", 0), 0u);
    EXPECT_NE(read_text((dir / "eq" / "verification.txt").string()).find("overall = PASS"), std::string::npos);

    std::ofstream(dir / "bad.ini") << "[grid]\nn = 9\n[time]\nT = 1\nM = 2\n";
    r = run_cli("simulate --config bad.ini", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(last_line(r.out).rfind("RESULT simulate ERROR kind=ValidationError", 0), 0u) << r.out;

    r = run_cli("simulate " + cfg + " --out gated --seed 3", dir);
    EXPECT_EQ(r.code, 0);
    std::ofstream(dir / "strict.ini") << read_text(cfg) << "[verify]\ndet_gate = 2\n";
    r = run_cli("verify --config strict.ini --out strict", dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(last_line(r.out), "RESULT verify FAIL failed=det_min=1");

    r = run_cli("frobnicate", dir);
    EXPECT_EQ(r.code, 2);
    fs::remove_all(dir);
}
