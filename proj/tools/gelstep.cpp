// gelstep: simulate, verify, refine and self-test the incremental scheme.
//
// Exit codes: 0 all gates pass, 1 a gate failed, 2 usage or configuration
// error, 3 runtime error. The last stdout line is always a one-line summary
// "RESULT <command> PASS|FAIL|ERROR ...".

#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "gelstep/gelstep.hpp"

using namespace gelstep;

namespace {

struct Overrides {
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
    if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
    if (dynamic_cast<const IoError*>(&e)) return "IoError";
    if (dynamic_cast<const StepError*>(&e)) return "StepError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    return "Exception";
}

bool is_config_error(const std::exception& e) {
    return dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
           dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IoError*>(&e);
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '"') c = c == '\n' ? ' ' : '\'';
    return s;
}

RunConfig load_config(const std::string& path, const Overrides& o) {
    RunConfig c;
    try {
        c = parse_config(read_text(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    if (o.threads) c.threads = *o.threads;
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out_dir = *o.out;
    validate(c);
    return c;
}

int report(const std::string& cmd, const std::vector<Verdict>& vs) {
    write_verdicts(std::cout, vs);
    if (all_pass(vs)) {
        std::cout << "RESULT " << cmd << " PASS checks=" << vs.size() << '\n';
        return 0;
    }
    std::cout << "RESULT " << cmd << " FAIL failed=" << failed_list(vs) << '\n';
    return 1;
}

void finish_log(const RunLog& log, const std::string& dir, const std::string& name, const std::vector<Verdict>& vs) {
    write_text(dir + "/" + name, [&](std::ostream& os) {
        log.write(os);
        write_verdicts(os, vs);
    });
}

template <int D>
int do_simulate(const RunConfig& c) {
    RunLog log;
    preflight<D>(c, make_model<D>(c, c.n), log);
    const auto sim = simulate<D>(c, c.steps, c.n, log);
    ensure_directory(c.out_dir);
    write_text(c.out_dir + "/config.ini", [&](std::ostream& os) { os << describe(c); });
    const auto edi = check_edi(sim.traj, sim.model);
    write_text(c.out_dir + "/energy.csv", [&](std::ostream& os) { write_edi_csv(os, edi); });
    write_trajectory(sim, c, c.out_dir);
    const auto vs = simulation_verdicts(sim, c);
    finish_log(log, c.out_dir, "run.log", vs);
    return report("simulate", vs);
}

template <int D>
int do_verify(const RunConfig& c, const std::optional<std::string>& checkpoint) {
    RunLog log;
    preflight<D>(c, make_model<D>(c, c.n), log);
    const auto sim = checkpoint ? load_checkpoint<D>(c, *checkpoint, log) : simulate<D>(c, c.steps, c.n, log);
    const auto rep = verify_trajectory(sim.traj, sim.model, verify_options(c));
    ensure_directory(c.out_dir);
    write_text(c.out_dir + "/verification.txt", [&](std::ostream& os) { write_report(os, rep); });
    if (rep.edi) write_text(c.out_dir + "/energy.csv", [&](std::ostream& os) { write_edi_csv(os, *rep.edi); });
    const auto vs = rep.verdicts();
    finish_log(log, c.out_dir, "verify.log", vs);
    return report("verify", vs);
}

template <int D>
int do_refine(const RunConfig& c) {
    RunLog log;
    preflight<D>(c, make_model<D>(c, c.n), log);
    const auto out = run_refinement<D>(c, log);
    ensure_directory(c.out_dir);
    write_text(c.out_dir + "/refinement.csv", [&](std::ostream& os) { write_refinement_csv(os, out.report); });
    write_text(c.out_dir + "/refinement.txt", [&](std::ostream& os) {
        for (std::size_t i = 0; i < out.report.bounds.size(); ++i) {
            os << "[M = " << c.refine_m[i] << "]\n";
            write_apriori(os, out.report.bounds[i]);
            os << '\n';
        }
        os << "[spread]\n" << std::setprecision(10);
        for (int i = 0; i < 7; ++i) os << kBoundNames[i] << " = " << out.spread[i] << '\n';
    });
    finish_log(log, c.out_dir, "refine.log", out.verdicts);
    return report("refine", out.verdicts);
}

template <typename Fn>
int dispatch(const RunConfig& c, Fn&& fn) {
    if (c.d == 2) return fn(std::integral_constant<int, 2>{});
    return fn(std::integral_constant<int, 3>{});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incremental minimization scheme for a swelling viscoelastic gel"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides ov;
    std::string config_path, checkpoint_dir, positional;
    int threads = 0;
    std::uint64_t seed = 0;
    std::string out;
    app.add_option("--threads", threads, "worker threads (0 = hardware concurrency, 1 = deterministic)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "seed of the initial phase-field noise");
    app.add_option("--out", out, "output directory");

    auto* sim = app.add_subcommand("simulate", "run the scheme, write snapshots and the energy ledger");
    sim->add_option("--config", config_path, "run configuration file");
    sim->add_option("path", positional, "run configuration file");

    auto* ver = app.add_subcommand("verify", "run (or load) a trajectory and certify it");
    ver->add_option("--config", config_path, "run configuration file");
    ver->add_option("--checkpoint", checkpoint_dir, "output directory of an earlier simulate run");
    ver->add_option("path", positional, "configuration file or checkpoint directory");

    auto* ref = app.add_subcommand("refine", "time-step refinement study");
    ref->add_option("--config", config_path, "run configuration file");
    ref->add_option("path", positional, "run configuration file");

    auto* self = app.add_subcommand("selftest", "oracle battery: gradients, Poisson solver, frame indifference");

    std::string cmd = "gelstep";
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0) std::cout << "RESULT " << cmd << " ERROR kind=usage message=\"" << one_line(e.what()) << "\"\n";
        return code == 0 ? 0 : 2;
    }
    if (app.count("--threads")) ov.threads = threads;
    if (app.count("--seed")) ov.seed = seed;
    if (app.count("--out")) ov.out = out;

    try {
        if (self->parsed()) {
            cmd = "selftest";
            return report(cmd, run_selftest());
        }
        const CLI::App* sub = sim->parsed() ? sim : ver->parsed() ? ver : ref;
        cmd = sub->get_name();

        std::optional<std::string> checkpoint;
        if (!checkpoint_dir.empty()) checkpoint = checkpoint_dir;
        if (!positional.empty()) {
            if (!config_path.empty()) throw ValidationError("give the configuration either positionally or with --config");
            if (sub == ver && std::filesystem::is_directory(positional)) checkpoint = positional;
            else config_path = positional;
        }
        if (config_path.empty()) {
            if (!checkpoint) throw ValidationError(cmd + " needs a configuration file");
            config_path = *checkpoint + "/config.ini";
        }
        RunConfig cfg = load_config(config_path, ov);
        if (checkpoint && !ov.out) cfg.out_dir = *checkpoint;

        return dispatch(cfg, [&](auto dim) {
            constexpr int D = decltype(dim)::value;
            if (sub == sim) return do_simulate<D>(cfg);
            if (sub == ver) return do_verify<D>(cfg, checkpoint);
            return do_refine<D>(cfg);
        });
    } catch (const std::exception& e) {
        std::cout << "RESULT " << cmd << " ERROR kind=" << error_kind(e) << " message=\"" << one_line(e.what()) << "\"\n";
        return is_config_error(e) ? 2 : 3;
    }
}
