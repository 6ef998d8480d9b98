#pragma once

// Run configuration: sectioned key = value text, parsed with the Boost INI
// reader. Every key has a default except time.T and time.M; applied
// defaults are recorded so the run log can echo them.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdint>
#include <functional>
#include <type_traits>
#include <sstream>
#include <string>
#include <vector>

#include "gelstep/energy.hpp"
#include "gelstep/errors.hpp"
#include "gelstep/potentials.hpp"
#include "gelstep/solver.hpp"

namespace gelstep {

enum class PsiInit { Constant, Noise, Stripe };
enum class YInit { Identity, File };
enum class SnapshotMode { All, Final, None };

struct RunConfig {
    // [grid]
    int d = 2;
    int n = 17;
    std::string dirichlet = "two_faces";
    // [time]
    double horizon = 0.0;
    int steps = 0;
    // [params]
    PotentialParams params;
    // [family]
    std::string family = "identity";
    std::vector<double> a0, a1, b0, b1;  // affine: row-major d×d and d-vectors
    double bend_amplitude = 0.1;
    double bend_frequency = 1.0;
    double rotation = 0.0;  // radians, d = 2 only
    // [initial]
    PsiInit psi_init = PsiInit::Constant;
    double psi_value = 0.0;
    double psi_amplitude = 0.05;
    std::uint64_t seed = 1;
    int kmax = 2;
    int stripe_mode = 1;
    YInit y_init = YInit::Identity;
    std::string y_file;
    // [solver]
    SolverConfig solver;
    // [run]
    int threads = 1;
    RateComposition rate = RateComposition::Composed;
    double poisson_tol = 1e-13;
    double det_floor = 1e-8;
    // [output]
    std::string out_dir = "out";
    SnapshotMode snapshots = SnapshotMode::All;
    // [verify]
    bool verify_edi = true;
    bool verify_residuals = true;
    bool verify_apriori = true;
    int residual_fields = 20;
    std::uint64_t residual_seed = 7;
    double gronwall_ceiling = 10.0;
    double det_gate = 1e-4;
    double delta0 = 0.1;
    int assumption_samples = 1000;
    std::uint64_t assumption_seed = 3;
    // [refine]
    std::vector<int> refine_m{8, 16, 32, 64};
    std::vector<int> refine_n;  // empty: grid.n for every run
    double spread_limit = 0.2;

    std::vector<std::string> defaults_applied;  // "section.key = value"

    double tau() const { return horizon / steps; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& raw) {
    const std::string s = trim(raw);
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw std::invalid_argument("not a number");
    return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
    std::istringstream is(s);
    std::vector<T> out;
    std::string tok;
    while (is >> tok) out.push_back(parse_number<T>(tok));
    return out;
}

inline bool parse_bool(const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw std::invalid_argument("expected true or false");
}

template <typename T>
std::string format_value(T v) {
    if constexpr (std::is_integral_v<T>) {
        return std::to_string(v);
    } else {
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    }
}

template <typename T>
std::string format_list(const std::vector<T>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << format_value(v[i]);
    return os.str();
}

template <typename E>
E parse_choice(const std::string& raw, const std::vector<std::pair<std::string, E>>& choices) {
    const std::string s = trim(raw);
    for (const auto& [name, e] : choices)
        if (s == name) return e;
    std::string msg = "expected one of";
    for (const auto& c : choices) msg += " " + c.first;
    throw std::invalid_argument(msg);
}

template <typename E>
std::string choice_name(E e, const std::vector<std::pair<std::string, E>>& choices) {
    for (const auto& [name, v] : choices)
        if (v == e) return name;
    return "?";
}

inline const std::vector<std::pair<std::string, PsiInit>> kPsiInits = {
    {"constant", PsiInit::Constant}, {"noise", PsiInit::Noise}, {"stripe", PsiInit::Stripe}};
inline const std::vector<std::pair<std::string, YInit>> kYInits = {{"identity", YInit::Identity},
                                                                   {"file", YInit::File}};
inline const std::vector<std::pair<std::string, SnapshotMode>> kSnapshotModes = {
    {"all", SnapshotMode::All}, {"final", SnapshotMode::Final}, {"none", SnapshotMode::None}};
inline const std::vector<std::pair<std::string, RateComposition>> kRates = {{"composed", RateComposition::Composed},
                                                                            {"raw", RateComposition::Raw}};

struct KeyDef {
    std::string section;
    std::string key;
    bool required;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> show;
};

#define GELSTEP_NUM(SEC, KEY, FIELD, TYPE)                                                                 \
    KeyDef {                                                                                               \
        SEC, KEY, false, [](RunConfig& c, const std::string& s) { c.FIELD = parse_number<TYPE>(s); },     \
            [](const RunConfig& c) { return format_value(c.FIELD); }                            \
    }
#define GELSTEP_BOOL(SEC, KEY, FIELD)                                                                      \
    KeyDef {                                                                                               \
        SEC, KEY, false, [](RunConfig& c, const std::string& s) { c.FIELD = parse_bool(s); },             \
            [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); }                     \
    }
#define GELSTEP_CHOICE(SEC, KEY, FIELD, TABLE)                                                             \
    KeyDef {                                                                                               \
        SEC, KEY, false, [](RunConfig& c, const std::string& s) { c.FIELD = parse_choice(s, TABLE); },    \
            [](const RunConfig& c) { return choice_name(c.FIELD, TABLE); }                                 \
    }
#define GELSTEP_STRING(SEC, KEY, FIELD)                                                                    \
    KeyDef {                                                                                               \
        SEC, KEY, false, [](RunConfig& c, const std::string& s) { c.FIELD = trim(s); },                   \
            [](const RunConfig& c) { return c.FIELD; }                                                     \
    }
#define GELSTEP_LIST(SEC, KEY, FIELD, TYPE)                                                                \
    KeyDef {                                                                                               \
        SEC, KEY, false, [](RunConfig& c, const std::string& s) { c.FIELD = parse_list<TYPE>(s); },       \
            [](const RunConfig& c) { return format_list(c.FIELD); }                                        \
    }

inline const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = [] {
        std::vector<KeyDef> t = {
            GELSTEP_NUM("grid", "d", d, int),
            GELSTEP_NUM("grid", "n", n, int),
            GELSTEP_STRING("grid", "dirichlet", dirichlet),
            GELSTEP_NUM("time", "T", horizon, double),
            GELSTEP_NUM("time", "M", steps, int),
            GELSTEP_NUM("params", "alpha", params.alpha, double),
            GELSTEP_NUM("params", "p", params.p, double),
            GELSTEP_NUM("params", "c_det", params.c_det, double),
            GELSTEP_NUM("params", "q", params.q, double),
            GELSTEP_NUM("params", "gamma", params.gamma, double),
            GELSTEP_NUM("params", "beta", params.beta, double),
            GELSTEP_NUM("params", "a_dw", params.a_dw, double),
            GELSTEP_NUM("params", "b_kw", params.b_kw, double),
            GELSTEP_NUM("params", "eta_visc", params.eta_visc, double),
            GELSTEP_NUM("params", "g_slope", params.g_slope, double),
            GELSTEP_NUM("params", "g_lo", params.g_lo, double),
            GELSTEP_NUM("params", "g_hi", params.g_hi, double),
            GELSTEP_NUM("params", "g_delta", params.g_delta, double),
            GELSTEP_STRING("family", "kind", family),
            GELSTEP_LIST("family", "a0", a0, double),
            GELSTEP_LIST("family", "a1", a1, double),
            GELSTEP_LIST("family", "b0", b0, double),
            GELSTEP_LIST("family", "b1", b1, double),
            GELSTEP_NUM("family", "amplitude", bend_amplitude, double),
            GELSTEP_NUM("family", "frequency", bend_frequency, double),
            GELSTEP_NUM("family", "rotation", rotation, double),
            GELSTEP_CHOICE("initial", "psi", psi_init, kPsiInits),
            GELSTEP_NUM("initial", "psi_value", psi_value, double),
            GELSTEP_NUM("initial", "amplitude", psi_amplitude, double),
            GELSTEP_NUM("initial", "seed", seed, std::uint64_t),
            GELSTEP_NUM("initial", "kmax", kmax, int),
            GELSTEP_NUM("initial", "stripe_mode", stripe_mode, int),
            GELSTEP_CHOICE("initial", "y", y_init, kYInits),
            GELSTEP_STRING("initial", "y_file", y_file),
            GELSTEP_NUM("solver", "grad_tol", solver.grad_tol, double),
            GELSTEP_NUM("solver", "max_iters", solver.max_iters, int),
            GELSTEP_NUM("solver", "armijo_c", solver.armijo_c, double),
            GELSTEP_NUM("solver", "backtrack", solver.backtrack_factor, double),
            GELSTEP_NUM("solver", "memory", solver.memory, int),
            GELSTEP_NUM("run", "threads", threads, int),
            GELSTEP_CHOICE("run", "rate", rate, kRates),
            GELSTEP_NUM("run", "poisson_tol", poisson_tol, double),
            GELSTEP_NUM("run", "det_floor", det_floor, double),
            GELSTEP_STRING("output", "dir", out_dir),
            GELSTEP_CHOICE("output", "snapshots", snapshots, kSnapshotModes),
            GELSTEP_BOOL("verify", "edi", verify_edi),
            GELSTEP_BOOL("verify", "residuals", verify_residuals),
            GELSTEP_BOOL("verify", "apriori", verify_apriori),
            GELSTEP_NUM("verify", "residual_fields", residual_fields, int),
            GELSTEP_NUM("verify", "residual_seed", residual_seed, std::uint64_t),
            GELSTEP_NUM("verify", "gronwall_ceiling", gronwall_ceiling, double),
            GELSTEP_NUM("verify", "det_gate", det_gate, double),
            GELSTEP_NUM("verify", "delta0", delta0, double),
            GELSTEP_NUM("verify", "assumption_samples", assumption_samples, int),
            GELSTEP_NUM("verify", "assumption_seed", assumption_seed, std::uint64_t),
            GELSTEP_LIST("refine", "m_list", refine_m, int),
            GELSTEP_LIST("refine", "n_list", refine_n, int),
            GELSTEP_NUM("refine", "spread_limit", spread_limit, double),
        };
        for (auto& k : t)
            if (k.section == "time") k.required = true;
        return t;
    }();
    return table;
}

#undef GELSTEP_NUM
#undef GELSTEP_BOOL
#undef GELSTEP_CHOICE
#undef GELSTEP_STRING
#undef GELSTEP_LIST

}  // namespace detail

/// Defaults of the configuration language. The exponent defaults p = 4,
/// β = 2.5 deliberately fail the exponent chain in d = 2, so runs must
/// state their material exponents.
inline RunConfig default_config() {
    RunConfig c;
    c.params.alpha = 1.0;
    c.params.p = 4.0;
    c.params.c_det = 4.0;
    c.params.q = 9.0;
    c.params.gamma = 0.01;
    c.params.beta = 2.5;
    c.params.a_dw = 1.0;
    c.params.b_kw = 0.01;
    c.params.eta_visc = 1.0;
    c.params.g_slope = 0.1;
    c.params.g_lo = 0.8;
    c.params.g_hi = 1.2;
    c.params.g_delta = 0.5;
    return c;
}

/// Structural checks beyond single values. Throws ValidationError naming
/// the violated constraint.
inline void validate(const RunConfig& c) {
    auto fail = [](const std::string& m) { throw ValidationError(m); };
    if (c.d != 2 && c.d != 3) fail("grid.d must be 2 or 3");
    if (c.n < 5) fail("grid.n must be at least 5");
    if (c.dirichlet == "none") fail("grid.dirichlet: the Dirichlet node set is empty");
    (void)parse_dirichlet_faces(c.dirichlet);
    if (!(c.horizon > 0)) fail("time.T must be positive");
    if (c.steps < 1) fail("time.M must be at least 1");
    validate(c.params, c.d);
    const std::size_t dd = static_cast<std::size_t>(c.d);
    if (c.family != "identity" && c.family != "affine" && c.family != "gentle_bend")
        fail("family.kind must be identity, affine or gentle_bend");
    if (c.family == "affine") {
        if (!c.a0.empty() && c.a0.size() != dd * dd) fail("family.a0 needs d*d entries");
        if (!c.a1.empty() && c.a1.size() != dd * dd) fail("family.a1 needs d*d entries");
        if (!c.b0.empty() && c.b0.size() != dd) fail("family.b0 needs d entries");
        if (!c.b1.empty() && c.b1.size() != dd) fail("family.b1 needs d entries");
    }
    if (c.rotation != 0.0 && c.d != 2) fail("family.rotation is only supported for d = 2");
    if (c.psi_init == PsiInit::Noise && c.kmax < 1) fail("initial.kmax must be at least 1");
    if (c.psi_init == PsiInit::Stripe && c.stripe_mode < 1) fail("initial.stripe_mode must be at least 1");
    if (c.y_init == YInit::File && c.y_file.empty()) fail("initial.y_file is required when initial.y = file");
    c.solver.validate();
    if (c.threads < 0) fail("run.threads must be 0 (auto) or positive");
    if (!(c.poisson_tol > 0)) fail("run.poisson_tol must be positive");
    if (!(c.det_floor > 0)) fail("run.det_floor must be positive");
    if (c.residual_fields < 0) fail("verify.residual_fields must be non-negative");
    if (!(c.gronwall_ceiling > 0)) fail("verify.gronwall_ceiling must be positive");
    if (!(c.det_gate > 0)) fail("verify.det_gate must be positive");
    if (!(c.delta0 > 0)) fail("verify.delta0 must be positive");
    if (c.assumption_samples < 1) fail("verify.assumption_samples must be positive");
    if (c.refine_m.size() < 2) fail("refine.m_list needs at least two entries");
    for (std::size_t i = 0; i < c.refine_m.size(); ++i) {
        if (c.refine_m[i] < 1) fail("refine.m_list entries must be positive");
        if (i > 0 && c.refine_m[i] % c.refine_m[i - 1] != 0) fail("refine.m_list must be nested (each divides the next)");
    }
    if (!c.refine_n.empty() && c.refine_n.size() != 1 && c.refine_n.size() != c.refine_m.size())
        fail("refine.n_list must have one entry or one per m_list entry");
    for (std::size_t i = 0; i < c.refine_n.size(); ++i) {
        if (c.refine_n[i] < 5) fail("refine.n_list entries must be at least 5");
        if (i > 0 && (c.refine_n[i] - 1) % (c.refine_n[0] - 1) != 0)
            fail("refine.n_list must be nested grids");
    }
    if (!(c.spread_limit > 0)) fail("refine.spread_limit must be positive");
}

/// Parses configuration text, applies defaults and validates. ParseError
/// carries the line (syntax) or the key (unknown or malformed entries).
inline RunConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    // '#' starts a comment anywhere on a line; no value contains it.
    std::string stripped;
    {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) stripped += line.substr(0, line.find('#')) + '\n';
    }
    try {
        std::istringstream is(stripped);
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError("line " + std::to_string(e.line()) + ": " + e.message());
    }

    const auto& table = detail::key_table();
    auto known = [&](const std::string& sec, const std::string& key) {
        for (const auto& k : table)
            if (k.section == sec && k.key == key) return &k;
        return static_cast<const detail::KeyDef*>(nullptr);
    };
    for (const auto& [sec, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ParseError("key '" + sec + "' is outside any [section]");
        bool section_known = false;
        for (const auto& k : table) section_known = section_known || k.section == sec;
        if (!section_known) throw ParseError("unknown section [" + sec + "]");
        for (const auto& [key, value] : body)
            if (known(sec, key) == nullptr) throw ParseError("unknown key '" + sec + "." + key + "'");
    }

    RunConfig cfg = default_config();
    for (const auto& k : table) {
        const auto node = tree.get_child_optional(pt::ptree::path_type(k.section + "/" + k.key, '/'));
        if (!node) {
            if (k.required) throw ParseError("missing required key '" + k.section + "." + k.key + "'");
            cfg.defaults_applied.push_back(k.section + "." + k.key + " = " + k.show(cfg));
            continue;
        }
        const std::string raw = node->get_value<std::string>();
        try {
            k.set(cfg, raw);
        } catch (const std::exception& e) {
            throw ParseError("key '" + k.section + "." + k.key + "': invalid value '" + detail::trim(raw) + "' (" +
                             e.what() + ")");
        }
    }
    validate(cfg);
    return cfg;
}

/// Full key = value listing of a config, one section per block.
inline std::string describe(const RunConfig& cfg) {
    std::ostringstream os;
    std::string section;
    for (const auto& k : detail::key_table()) {
        if (k.section != section) {
            os << (section.empty() ? "" : "\n") << '[' << k.section << "]\n";
            section = k.section;
        }
        os << k.key << " = " << k.show(cfg) << '\n';
    }
    return os.str();
}

/// Reference problems shared by the tools, tests and sample configs.
inline std::string canonical_config_text(const std::string& name) {
    const std::string material =
        "[params]\n"
        "alpha = 1\np = 6\nc_det = 4\nq = 9\ngamma = 0.01\nbeta = 3\n"
        "a_dw = 1\nb_kw = 0.01\neta_visc = 1\ng_slope = 0.05\n";
    const std::string grid = "[grid]\nd = 2\nn = 17\ndirichlet = two_faces\n";
    const std::string refine = "[refine]\nm_list = 8 16 32 64\n";
    if (name == "equilibrium")
        return grid + "[time]\nT = 0.5\nM = 16\n" + material + "[family]\nkind = identity\n" +
               "[initial]\npsi = constant\npsi_value = 0\n" + refine;
    if (name == "spinodal")
        return grid + "[time]\nT = 0.5\nM = 16\n" + material + "[family]\nkind = identity\n" +
               "[initial]\npsi = noise\namplitude = 0.05\nseed = 1\nkmax = 2\n" + refine;
    if (name == "affine_stretch")
        return grid + "[time]\nT = 0.5\nM = 16\n" + material +
               "[family]\nkind = affine\na0 = 1 0 0 1\na1 = 0.5 0 0 0\n" +
               "[initial]\npsi = noise\namplitude = 0.05\nseed = 1\nkmax = 2\n" + refine;
    if (name == "gentle_bend")
        return grid + "[time]\nT = 0.5\nM = 16\n" + material +
               "[family]\nkind = gentle_bend\namplitude = 0.05\nfrequency = 1\n" +
               "[initial]\npsi = noise\namplitude = 0.05\nseed = 1\nkmax = 2\n" + refine;
    throw ValidationError("unknown canonical problem '" + name + "'");
}

inline const std::vector<std::string>& canonical_names() {
    static const std::vector<std::string> names = {"equilibrium", "spinodal", "affine_stretch", "gentle_bend"};
    return names;
}

}  // namespace gelstep
