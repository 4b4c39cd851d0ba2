#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vpatch/diagnostics.hpp"
#include "vpatch/energy_solver.hpp"
#include "vpatch/errors.hpp"

namespace vpatch {

inline constexpr const char* version_string = "0.1.0";

// Plain-text outputs: reports.csv (one row per lambda), one patch CSV of
// (x1, x2, omega) rows per solve, and a key = value manifest that pins the
// configuration and tie-break policy so a run is reproducible byte for byte.
// Floats are serialized shortest-round-trip, so parsing returns the exact
// doubles that were written.

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw io_error("fmt: double serialization failed");
    return std::string(buf, p);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw io_error("parse: bad float field '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string strip(std::string_view s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(a, b - a + 1));
}

} // namespace detail

inline constexpr const char* reports_csv_header =
    "lambda,epsilon,energy,mu,cx1,cy1,cx2,cy2,diam1,diam2,resid1,resid2,resid3,iters,converged";

inline void write_reports_csv(const std::string& path, std::span<const SolveReport> reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << reports_csv_header << "\n";
    for (const SolveReport& r : reports) {
        using detail::fmt;
        out << fmt(r.lambda) << ',' << fmt(r.epsilon) << ',' << fmt(r.energy) << ','
            << fmt(r.mu) << ',' << fmt(r.centroid1.x) << ',' << fmt(r.centroid1.y) << ','
            << fmt(r.centroid2.x) << ',' << fmt(r.centroid2.y) << ',' << fmt(r.diam1) << ','
            << fmt(r.diam2) << ',' << fmt(r.weak_residuals[0]) << ','
            << fmt(r.weak_residuals[1]) << ',' << fmt(r.weak_residuals[2]) << ','
            << r.iterations << ',' << (r.converged ? 1 : 0) << "\n";
    }
    if (!out) throw io_error("write failed for " + path);
}

inline std::vector<SolveReport> parse_reports_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error(path + ": empty file");
    if (detail::strip(line) != reports_csv_header)
        throw io_error(path + ": unexpected header");
    std::vector<SolveReport> out;
    while (std::getline(in, line)) {
        std::string s = detail::strip(line);
        if (s.empty()) continue;
        auto f = detail::split(s, ',');
        if (f.size() != 15) throw io_error(path + ": expected 15 columns");
        SolveReport r;
        r.lambda = detail::parse_double(f[0]);
        r.epsilon = detail::parse_double(f[1]);
        r.energy = detail::parse_double(f[2]);
        r.mu = detail::parse_double(f[3]);
        r.centroid1 = {detail::parse_double(f[4]), detail::parse_double(f[5])};
        r.centroid2 = {detail::parse_double(f[6]), detail::parse_double(f[7])};
        r.diam1 = detail::parse_double(f[8]);
        r.diam2 = detail::parse_double(f[9]);
        r.weak_residuals = {detail::parse_double(f[10]), detail::parse_double(f[11]),
                            detail::parse_double(f[12])};
        r.iterations = static_cast<int>(detail::parse_double(f[13]));
        r.converged = detail::parse_double(f[14]) != 0.0;
        out.push_back(r);
    }
    return out;
}

inline void write_patch_csv(const std::string& path, const DiskGrid& g, const PatchField& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << "x1,x2,omega\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (f.omega[i] == 0.0) continue;
        out << detail::fmt(g.centers[i].x) << ',' << detail::fmt(g.centers[i].y) << ','
            << detail::fmt(f.omega[i]) << "\n";
    }
    if (!out) throw io_error("write failed for " + path);
}

/// Rebuild a PatchField from a patch CSV; coordinates must land on grid cells.
inline PatchField read_patch_csv(const std::string& path, const DiskGrid& g,
                                 const PatchConstraints& pc) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || detail::strip(line) != "x1,x2,omega")
        throw io_error(path + ": unexpected patch header");
    PatchField f;
    f.grid = &g;
    f.constraints = pc;
    f.omega.assign(g.size(), 0.0);
    f.support1 = ball_cells(g, pc.ball1);
    f.support2 = ball_cells(g, pc.ball2);

    // index lookup table (mx,my) -> cell
    std::vector<int> index(static_cast<std::size_t>(g.n) * g.n, -1);
    auto slot = [&g](int m) { return (m + g.n - 1) / 2; };
    for (std::size_t i = 0; i < g.size(); ++i)
        index[static_cast<std::size_t>(slot(g.my[i])) * g.n + slot(g.mx[i])] =
            static_cast<int>(i);

    while (std::getline(in, line)) {
        std::string s = detail::strip(line);
        if (s.empty()) continue;
        auto fields = detail::split(s, ',');
        if (fields.size() != 3) throw io_error(path + ": expected 3 columns");
        double x = detail::parse_double(fields[0]);
        double y = detail::parse_double(fields[1]);
        double w = detail::parse_double(fields[2]);
        int mx = static_cast<int>(std::lround(x * g.n));
        int my = static_cast<int>(std::lround(y * g.n));
        int id = -1;
        if (std::abs(mx) < g.n && std::abs(my) < g.n && (mx & 1) && (my & 1))
            id = index[static_cast<std::size_t>(slot(my)) * g.n + slot(mx)];
        if (id < 0 || g.centers[id].x != x || g.centers[id].y != y)
            throw io_error(path + ": row does not match a grid cell center");
        f.omega[id] = w;
    }
    return f;
}

/// Everything needed to reproduce and re-verify a run.
struct RunManifest {
    std::string version = version_string;
    int grid_n = 0;
    bool symmetric = true;
    double kappa1 = 1.0;
    double kappa2 = -1.0;
    Ball ball1, ball2;
    std::vector<double> lambdas;
    SolverConfig solver;
    std::vector<std::string> patch_files;

    PatchConstraints constraints_for(double lambda) const {
        PatchConstraints pc;
        pc.lambda = lambda;
        pc.kappa1 = kappa1;
        pc.kappa2 = kappa2;
        pc.ball1 = ball1;
        pc.ball2 = ball2;
        pc.symmetric = symmetric;
        return pc;
    }
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    using detail::fmt;
    out << "format = vpatch-run-1\n";
    out << "version = " << m.version << "\n";
    out << "grid_n = " << m.grid_n << "\n";
    out << "class = " << (m.symmetric ? "symmetric" : "general") << "\n";
    out << "kappa1 = " << fmt(m.kappa1) << "\n";
    out << "kappa2 = " << fmt(m.kappa2) << "\n";
    out << "ball1 = " << fmt(m.ball1.center.x) << ',' << fmt(m.ball1.center.y) << ','
        << fmt(m.ball1.radius) << "\n";
    out << "ball2 = " << fmt(m.ball2.center.x) << ',' << fmt(m.ball2.center.y) << ','
        << fmt(m.ball2.radius) << "\n";
    out << "lambdas = ";
    for (std::size_t i = 0; i < m.lambdas.size(); ++i)
        out << (i ? "," : "") << fmt(m.lambdas[i]);
    out << "\n";
    out << "max_iters = " << m.solver.max_iters << "\n";
    out << "energy_tol = " << fmt(m.solver.energy_tol) << "\n";
    out << "init_shift = " << fmt(m.solver.init_shift) << "\n";
    out << "patch_files = ";
    for (std::size_t i = 0; i < m.patch_files.size(); ++i)
        out << (i ? "," : "") << m.patch_files[i];
    out << "\n";
    out << "tie_break = psi desc, |x2| desc, cell index asc; "
           "mu = psi at the last fully filled x1>0 cell\n";
    if (!out) throw io_error("write failed for " + path);
}

inline RunManifest parse_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path);
    RunManifest m;
    std::string line;
    bool format_seen = false;
    while (std::getline(in, line)) {
        std::string s = detail::strip(line);
        if (s.empty()) continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) continue;
        std::string key = detail::strip(s.substr(0, eq));
        std::string val = detail::strip(s.substr(eq + 1));
        if (key == "format") {
            if (val != "vpatch-run-1") throw io_error(path + ": unknown format " + val);
            format_seen = true;
        } else if (key == "version") {
            m.version = val;
        } else if (key == "grid_n") {
            m.grid_n = static_cast<int>(detail::parse_double(val));
        } else if (key == "class") {
            m.symmetric = (val == "symmetric");
        } else if (key == "kappa1") {
            m.kappa1 = detail::parse_double(val);
        } else if (key == "kappa2") {
            m.kappa2 = detail::parse_double(val);
        } else if (key == "ball1" || key == "ball2") {
            auto f = detail::split(val, ',');
            if (f.size() != 3) throw io_error(path + ": bad ball spec");
            Ball b{{detail::parse_double(f[0]), detail::parse_double(f[1])},
                   detail::parse_double(f[2])};
            (key == "ball1" ? m.ball1 : m.ball2) = b;
        } else if (key == "lambdas") {
            for (auto part : detail::split(val, ','))
                m.lambdas.push_back(detail::parse_double(std::string(part)));
        } else if (key == "max_iters") {
            m.solver.max_iters = static_cast<int>(detail::parse_double(val));
        } else if (key == "energy_tol") {
            m.solver.energy_tol = detail::parse_double(val);
        } else if (key == "init_shift") {
            m.solver.init_shift = detail::parse_double(val);
        } else if (key == "patch_files") {
            for (auto part : detail::split(val, ','))
                m.patch_files.push_back(detail::strip(part));
        }
    }
    if (!format_seen) throw io_error(path + ": missing format line");
    return m;
}

/// Write reports.csv, per-solve patch CSVs and the manifest into `dir`.
inline void persist_run(const std::string& dir, const DiskGrid& g, const ClassSpec& spec,
                        const SolverConfig& cfg, std::span<const SolveReport> reports,
                        std::span<const SolveResult> solves) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory " + dir);

    RunManifest m;
    m.grid_n = g.n;
    m.symmetric = spec.symmetric;
    m.kappa1 = spec.kappa1;
    m.kappa2 = spec.kappa2;
    if (!solves.empty()) {
        m.ball1 = solves[0].omega.constraints.ball1;
        m.ball2 = solves[0].omega.constraints.ball2;
    }
    m.solver = cfg;
    for (std::size_t k = 0; k < solves.size(); ++k) {
        m.lambdas.push_back(solves[k].omega.constraints.lambda);
        char name[32];
        std::snprintf(name, sizeof(name), "patch_%03zu.csv", k + 1);
        m.patch_files.emplace_back(name);
        write_patch_csv(dir + "/" + name, g, solves[k].omega);
    }
    write_reports_csv(dir + "/reports.csv", reports);
    write_manifest(dir + "/manifest.txt", m);
}

// Re-derive every report row from its persisted patch and re-assert the run
// invariants.  Logs one line per check; returns false if anything fails.
inline bool verify_run(const std::string& dir, std::ostream& log) {
    bool ok = true;
    auto check = [&](bool cond, const std::string& what) {
        log << (cond ? "ok:   " : "FAIL: ") << what << "\n";
        ok = ok && cond;
        return cond;
    };
    auto close_rel = [](double a, double b, double tol) {
        return std::fabs(a - b) <= tol * std::max({std::fabs(a), std::fabs(b), 1e-300});
    };

    RunManifest m;
    std::vector<SolveReport> reports;
    try {
        m = parse_manifest(dir + "/manifest.txt");
        reports = parse_reports_csv(dir + "/reports.csv");
    } catch (const error& e) {
        log << "FAIL: " << e.what() << "\n";
        return false;
    }
    if (!check(reports.size() == m.lambdas.size() && reports.size() == m.patch_files.size(),
               "report rows match manifest"))
        return false;

    DiskGrid g = build_grid(m.grid_n);
    const KernelEval ker(g);
    std::vector<SolveReport> recomputed;

    for (std::size_t k = 0; k < reports.size(); ++k) {
        const SolveReport& r = reports[k];
        std::string tag = "lambda=" + detail::fmt(r.lambda);
        try {
            PatchConstraints pc = m.constraints_for(m.lambdas[k]);
            PatchField f = read_patch_csv(dir + "/" + m.patch_files[k], g, pc);

            check(r.lambda == m.lambdas[k], tag + ": lambda matches manifest");
            check(r.converged, tag + ": converged");

            ValidationResult v = validate_patch(f);
            check(v.ok, tag + ": class membership (" + (v.ok ? "ok" : v.first_violation) + ")");

            double eps = std::sqrt(pc.kappa1 / (pc.lambda * M_PI));
            check(r.epsilon == eps, tag + ": epsilon formula");

            SolveResult res;
            res.omega = std::move(f);
            res.converged = true;
            res.iterations = r.iterations;
            res.energy = energy(g, res.omega.omega, ker);
            res.mu = patch_threshold(g, res.omega, 1, ker);
            res.mu2 = pc.symmetric ? res.mu : patch_threshold(g, res.omega, 2, ker);
            SolveReport rr = make_report(g, res, 0.0);

            check(close_rel(rr.energy, r.energy, 1e-12), tag + ": energy recomputed");
            check(close_rel(rr.mu, r.mu, 1e-12), tag + ": mu recomputed");
            check(close_rel(rr.centroid1.x, r.centroid1.x, 1e-12) &&
                      close_rel(rr.centroid1.y, r.centroid1.y, 1e-12) &&
                      close_rel(rr.centroid2.x, r.centroid2.x, 1e-12) &&
                      close_rel(rr.centroid2.y, r.centroid2.y, 1e-12),
                  tag + ": centroids recomputed");
            check(rr.diam1 == r.diam1 && rr.diam2 == r.diam2, tag + ": diameters recomputed");
            for (int j = 0; j < 3; ++j)
                check(close_rel(rr.weak_residuals[j], r.weak_residuals[j], 1e-12),
                      tag + ": weak residual " + std::to_string(j + 1) + " recomputed");

            if (pc.symmetric)
                check(rr.centroid2.x == rr.centroid1.x && rr.centroid2.y == -rr.centroid1.y,
                      tag + ": centroid mirror symmetry");
            // per-patch mass sets each patch's area floor
            double eps2 = std::sqrt(-pc.kappa2 / (pc.lambda * M_PI));
            check(rr.diam1 >= 2.0 * eps * (1.0 - 1e-12) && rr.diam2 >= 2.0 * eps2 * (1.0 - 1e-12),
                  tag + ": isodiametric floor diam >= 2 eps");

            recomputed.push_back(rr);
        } catch (const error& e) {
            check(false, tag + ": " + e.what());
        }
    }

    // psi-bound shadow at the largest lambda: psi <= mu off B1 and >= -mu2 off B2
    if (ok && !recomputed.empty()) {
        try {
            PatchConstraints pc = m.constraints_for(m.lambdas.back());
            PatchField f = read_patch_csv(dir + "/" + m.patch_files.back(), g, pc);
            StreamField psi = solve_stream(g, f.omega, ker);
            double tol = 0.0;
            for (double v : psi.values) tol = std::max(tol, std::fabs(v));
            tol *= 1e-9;
            BallCells b1 = ball_cells(g, pc.ball1);
            BallCells b2 = ball_cells(g, pc.ball2);
            std::vector<char> in1(g.size(), 0), in2(g.size(), 0);
            for (int i : b1.cells) in1[i] = 1;
            for (int i : b2.cells) in2[i] = 1;
            bool bound_ok = true;
            double mu1 = patch_threshold(g, f, 1, ker);
            double mu2 = pc.symmetric ? mu1 : patch_threshold(g, f, 2, ker);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!in1[i] && psi.values[i] > mu1 + tol) bound_ok = false;
                if (!in2[i] && psi.values[i] < -mu2 - tol) bound_ok = false;
            }
            check(bound_ok, "psi-bound check at the largest lambda");
        } catch (const error& e) {
            check(false, std::string("psi-bound check: ") + e.what());
        }
    }

    if (ok && reports.size() >= 4) {
        SweepFit fit = fit_sweep(recomputed);
        SweepFit ref = fit_sweep(reports);
        check(close_rel(fit.mu_slope, ref.mu_slope, 1e-9) &&
                  close_rel(fit.energy_slope, ref.energy_slope, 1e-9),
              "sweep fit reproduced");
    }
    return ok;
}

} // namespace vpatch
