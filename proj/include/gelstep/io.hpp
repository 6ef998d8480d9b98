#pragma once

// Snapshot files: one header line "# gelstep snapshot d=.. n=.. t=.. M=.. step=..",
// one column line, then one CSV row per node (index, coordinates, y, ψ, μ).
// Values use the shortest round-trip representation, so a write/read cycle
// is bit exact. μ is undefined at step 0 and stored as nan.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gelstep/errors.hpp"
#include "gelstep/grid.hpp"

namespace gelstep {

template <int D>
struct Snapshot {
    int n = 0;
    double t = 0.0;
    int steps = 0;  // M of the run
    int step = 0;
    VectorField<D> y;
    ScalarField psi;
    ScalarField mu;
};

struct SnapshotHeader {
    int d = 0;
    int n = 0;
    double t = 0.0;
    int steps = 0;
    int step = 0;
};

namespace detail {

inline std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_field(const std::string& s, int line) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty())
        throw FormatError("line " + std::to_string(line) + ": malformed number '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
}

inline SnapshotHeader parse_header(const std::string& line) {
    std::istringstream is(line);
    std::string hash, tag, kind;
    is >> hash >> tag >> kind;
    if (hash != "#" || tag != "gelstep" || kind != "snapshot") throw FormatError("line 1: not a gelstep snapshot header");
    SnapshotHeader h;
    bool seen[5] = {false, false, false, false, false};
    std::string item;
    while (is >> item) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw FormatError("line 1: malformed header entry '" + item + "'");
        const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
        const double v = parse_field(val, 1);
        if (key == "d") h.d = static_cast<int>(v), seen[0] = true;
        else if (key == "n") h.n = static_cast<int>(v), seen[1] = true;
        else if (key == "t") h.t = v, seen[2] = true;
        else if (key == "M") h.steps = static_cast<int>(v), seen[3] = true;
        else if (key == "step") h.step = static_cast<int>(v), seen[4] = true;
        else throw FormatError("line 1: unknown header entry '" + key + "'");
    }
    for (bool s : seen)
        if (!s) throw FormatError("line 1: header needs d, n, t, M and step");
    if (h.n < 2 || h.d < 1 || h.steps < 1 || h.step < 0 || h.step > h.steps)
        throw FormatError("line 1: header values out of range");
    return h;
}

}  // namespace detail

template <int D>
void write_snapshot(std::ostream& os, const Snapshot<D>& s) {
    const Grid<D> g(s.n);
    if (s.y.size() != g.size() || s.psi.size() != g.size() || (!s.mu.empty() && s.mu.size() != g.size()))
        throw ValidationError("snapshot fields do not match the grid size");
    os << "# gelstep snapshot d=" << D << " n=" << s.n << " t=" << detail::shortest(s.t) << " M=" << s.steps
       << " step=" << s.step << '\n';
    os << "node";
    for (int a = 0; a < D; ++a) os << ",x" << a;
    for (int a = 0; a < D; ++a) os << ",y" << a;
    os << ",psi,mu\n";
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto x = g.coord(k);
        os << k;
        for (int a = 0; a < D; ++a) os << ',' << detail::shortest(x[a]);
        for (int a = 0; a < D; ++a) os << ',' << detail::shortest(s.y[k][a]);
        os << ',' << detail::shortest(s.psi[k]) << ','
           << (s.mu.empty() ? std::string("nan") : detail::shortest(s.mu[k])) << '\n';
    }
}

inline SnapshotHeader read_snapshot_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open snapshot '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("line 1: empty snapshot file");
    return detail::parse_header(line);
}

template <int D>
Snapshot<D> read_snapshot(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("line 1: empty snapshot file");
    const SnapshotHeader h = detail::parse_header(line);
    if (h.d != D) throw FormatError("line 1: snapshot has d=" + std::to_string(h.d) + ", expected " + std::to_string(D));
    if (!std::getline(in, line) || line.rfind("node,", 0) != 0) throw FormatError("line 2: missing column header");
    const Grid<D> g(h.n);
    Snapshot<D> s;
    s.n = h.n;
    s.t = h.t;
    s.steps = h.steps;
    s.step = h.step;
    s.y.resize(g.size());
    s.psi.resize(g.size());
    s.mu.resize(g.size());
    const std::size_t cols = 1 + 2 * D + 2;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const int ln = static_cast<int>(k) + 3;
        if (!std::getline(in, line))
            throw FormatError("line " + std::to_string(ln) + ": truncated snapshot (" + std::to_string(k) + " of " +
                              std::to_string(g.size()) + " nodes)");
        const auto f = detail::split_csv(line);
        if (f.size() != cols) throw FormatError("line " + std::to_string(ln) + ": expected " + std::to_string(cols) + " columns");
        if (detail::parse_field(f[0], ln) != static_cast<double>(k))
            throw FormatError("line " + std::to_string(ln) + ": node index out of order");
        const auto x = g.coord(k);
        for (int a = 0; a < D; ++a)
            if (detail::parse_field(f[1 + a], ln) != x[a])
                throw FormatError("line " + std::to_string(ln) + ": coordinates do not match an n=" +
                                  std::to_string(h.n) + " grid");
        for (int a = 0; a < D; ++a) s.y[k][a] = detail::parse_field(f[1 + D + a], ln);
        s.psi[k] = detail::parse_field(f[1 + 2 * D], ln);
        s.mu[k] = detail::parse_field(f[2 + 2 * D], ln);
    }
    if (std::getline(in, line) && !line.empty())
        throw FormatError("line " + std::to_string(g.size() + 3) + ": trailing data after the last node");
    return s;
}

template <int D>
void write_snapshot(const std::string& path, const Snapshot<D>& s) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write snapshot '" + path + "'");
    write_snapshot(out, s);
    if (!out) throw IoError("write failed for '" + path + "'");
}

template <int D>
Snapshot<D> read_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open snapshot '" + path + "'");
    return read_snapshot<D>(in);
}

/// Throws ValidationError unless the snapshot belongs to a run with this
/// grid size, step count and time step.
template <int D>
void check_snapshot_matches(const Snapshot<D>& s, int n, int steps, double horizon) {
    if (s.n != n) throw ValidationError("snapshot grid n=" + std::to_string(s.n) + " differs from config n=" + std::to_string(n));
    if (s.steps != steps)
        throw ValidationError("snapshot M=" + std::to_string(s.steps) + " differs from config M=" + std::to_string(steps));
    const double expected = horizon * s.step / steps;
    if (std::abs(s.t - expected) > 1e-12 * (1.0 + horizon))
        throw ValidationError("snapshot time t=" + detail::shortest(s.t) + " does not match step " +
                              std::to_string(s.step) + " of the configured partition");
}

inline std::string snapshot_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%05d.csv", step);
    return buf;
}

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

/// Writes a text file produced by `fill`, raising IoError on failure.
inline void write_text(const std::string& path, const std::function<void(std::ostream&)>& fill) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    fill(out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace gelstep
