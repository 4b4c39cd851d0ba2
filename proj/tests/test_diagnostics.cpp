#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vpatch/diagnostics.hpp"
#include "vpatch/report_io.hpp"

using namespace vpatch;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("vpatch_test_" + tag);
    std::filesystem::remove_all(p);
    return p.string();
}

} // namespace

TEST_CASE("centroid: uniform patch and error paths") {
    DiskGrid g = build_grid(128);
    std::vector<double> omega(g.size(), 0.0);
    std::vector<int> cells;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (norm(g.centers[i] - Vec2{0.0, 0.5}) < 0.1) {
            omega[i] = 2.0;
            cells.push_back(static_cast<int>(i));
        }
    double kappa = integrate(g, omega);
    Vec2 c = centroid(g, cells, omega, kappa);
    CHECK(dist(c, {0.0, 0.5}) < g.spacing);
    CHECK_THROWS_AS(centroid(g, cells, omega, 0.0), contract_error);
}

TEST_CASE("support_diameter conventions") {
    DiskGrid g = build_grid(64);
    std::vector<double> omega(g.size(), 0.0);
    std::vector<int> cells{10, 11, 200};
    omega[10] = 1.0;
    double one_diag = std::sqrt(2.0) * g.spacing;
    CHECK(support_diameter(g, cells, omega) == one_diag);

    omega[200] = 0.5;
    double d = dist(g.centers[10], g.centers[200]);
    CHECK(support_diameter(g, cells, omega) == doctest::Approx(d + one_diag).epsilon(1e-15));

    std::vector<double> zero(g.size(), 0.0);
    CHECK_THROWS_AS(support_diameter(g, cells, zero), contract_error);
}

TEST_CASE("weak_residual: zero field and the radial control") {
    DiskGrid g = build_grid(128);
    std::vector<double> zero(g.size(), 0.0);
    auto r0 = weak_residual(g, zero);
    for (double v : r0) CHECK(v == 0.0);

    // radially symmetric single patch at the origin: exact steady state, all
    // probe residuals cancel to rounding
    std::vector<double> omega(g.size(), 0.0);
    double lam = 1.0 / (M_PI * 0.05 * 0.05);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (norm2(g.centers[i]) < 0.05 * 0.05) omega[i] = lam;
    auto res = weak_residual(g, omega);
    for (double v : res) CHECK(v < 1e-8);
}

TEST_CASE("weak test fields are smooth and compactly supported") {
    auto fields = weak_test_fields();
    for (const auto& f : fields) {
        CHECK(f.eta({0.93, 0.0}) == 0.0);
        Vec2 gout = f.grad({0.0, 0.93});
        CHECK(gout.x == 0.0);
        CHECK(gout.y == 0.0);
        // gradient vs central differences inside the support
        for (Vec2 p : {Vec2{0.2, 0.3}, Vec2{-0.4, 0.1}, Vec2{0.55, -0.6}}) {
            double d = 1e-6;
            Vec2 gr = f.grad(p);
            double fdx = (f.eta({p.x + d, p.y}) - f.eta({p.x - d, p.y})) / (2 * d);
            double fdy = (f.eta({p.x, p.y + d}) - f.eta({p.x, p.y - d})) / (2 * d);
            CHECK(gr.x == doctest::Approx(fdx).epsilon(1e-5));
            CHECK(gr.y == doctest::Approx(fdy).epsilon(1e-5));
        }
    }
}

TEST_CASE("sweep: input contracts") {
    DiskGrid g = build_grid(64);
    ClassSpec spec;
    std::vector<double> too_few{50.0, 100.0, 200.0};
    CHECK_THROWS_AS(sweep(g, spec, too_few), contract_error);
    std::vector<double> not_increasing{50.0, 100.0, 100.0, 200.0};
    CHECK_THROWS_AS(sweep(g, spec, not_increasing), contract_error);
}

TEST_CASE("fit_sweep recovers synthetic slopes exactly") {
    std::vector<SolveReport> reports;
    for (double lam : {50.0, 100.0, 200.0, 400.0, 800.0}) {
        SolveReport r;
        r.lambda = lam;
        r.epsilon = std::sqrt(1.0 / (lam * M_PI));
        r.mu = 0.08 * std::log(lam) + 0.3;
        r.energy = 0.09 * std::log(lam) + 1.0;
        r.diam1 = 2.5 * r.epsilon;
        r.diam2 = 2.5 * r.epsilon;
        r.converged = true;
        reports.push_back(r);
    }
    SweepFit fit = fit_sweep(reports);
    CHECK(fit.mu_slope == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(fit.energy_slope == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(fit.diam_ratio_max == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(fit.points_used == 5);

    reports[2].converged = false;
    fit = fit_sweep(reports);
    CHECK(fit.points_used == 4);
    CHECK(fit.mu_slope == doctest::Approx(0.08).epsilon(1e-12));
}

TEST_CASE("sweep + persist + parse + verify round trip") {
    DiskGrid g = build_grid(96);
    ClassSpec spec; // symmetric, kappa 1
    SolverConfig cfg;
    std::vector<double> lambdas{50.0, 100.0, 200.0, 400.0};
    SweepResult sw = sweep(g, spec, lambdas, cfg);

    for (const SolveReport& r : sw.reports) {
        CHECK(r.converged);
        CHECK(r.epsilon == std::sqrt(1.0 / (r.lambda * M_PI)));
        CHECK(r.diam_over_eps1() >= 2.0);
        CHECK(r.diam_over_eps1() < 6.0);
        // centroid2 is the bitwise mirror of centroid1 in the symmetric class
        CHECK(r.centroid2.x == r.centroid1.x);
        CHECK(r.centroid2.y == -r.centroid1.y);
        CHECK(r.diam2 == r.diam1);
    }
    // centroid error non-increasing across the sweep up to one spacing
    double rho = symmetric_vortex_radius();
    for (std::size_t k = 1; k < sw.reports.size(); ++k) {
        double prev = sw.reports[k - 1].centroid_err1({0.0, rho});
        double cur = sw.reports[k].centroid_err1({0.0, rho});
        CHECK(cur <= prev + g.spacing);
    }
    // growth-law fits land in a loose window at this coarse grid
    double target = 1.0 / (4.0 * M_PI);
    CHECK(std::fabs(sw.fit.mu_slope - target) < 0.5 * target);
    CHECK(std::fabs(sw.fit.energy_slope - target) < 0.5 * target);

    std::string dir = temp_dir("roundtrip");
    persist_run(dir, g, spec, cfg, sw.reports, sw.solves);

    auto parsed = parse_reports_csv(dir + "/reports.csv");
    REQUIRE(parsed.size() == sw.reports.size());
    for (std::size_t k = 0; k < parsed.size(); ++k) {
        CHECK(parsed[k].lambda == sw.reports[k].lambda);
        CHECK(parsed[k].epsilon == sw.reports[k].epsilon);
        CHECK(parsed[k].energy == sw.reports[k].energy);
        CHECK(parsed[k].mu == sw.reports[k].mu);
        CHECK(parsed[k].centroid1.x == sw.reports[k].centroid1.x);
        CHECK(parsed[k].centroid1.y == sw.reports[k].centroid1.y);
        CHECK(parsed[k].centroid2.x == sw.reports[k].centroid2.x);
        CHECK(parsed[k].centroid2.y == sw.reports[k].centroid2.y);
        CHECK(parsed[k].diam1 == sw.reports[k].diam1);
        CHECK(parsed[k].diam2 == sw.reports[k].diam2);
        for (int j = 0; j < 3; ++j)
            CHECK(parsed[k].weak_residuals[j] == sw.reports[k].weak_residuals[j]);
        CHECK(parsed[k].iterations == sw.reports[k].iterations);
        CHECK(parsed[k].converged == sw.reports[k].converged);
    }

    std::ostringstream log;
    CHECK(verify_run(dir, log));

    // identical in-process rerun produces byte-identical outputs
    SweepResult sw2 = sweep(g, spec, lambdas, cfg);
    std::string dir2 = temp_dir("roundtrip2");
    persist_run(dir2, g, spec, cfg, sw2.reports, sw2.solves);
    CHECK(slurp(dir + "/reports.csv") == slurp(dir2 + "/reports.csv"));
    CHECK(slurp(dir + "/manifest.txt") == slurp(dir2 + "/manifest.txt"));

    // tampering with a patch file must fail verification
    {
        std::string patch1 = dir + "/patch_001.csv";
        std::string content = slurp(patch1);
        std::size_t pos = content.rfind("\n", content.size() - 2);
        REQUIRE(pos != std::string::npos);
        std::ofstream out(patch1, std::ios::binary);
        out << content.substr(0, pos + 1); // drop the last row
    }
    std::ostringstream log2;
    CHECK_FALSE(verify_run(dir, log2));

    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("general-class run: persist, verify, and tamper detection") {
    DiskGrid g = build_grid(96);
    ClassSpec spec;
    spec.symmetric = false;
    spec.kappa1 = 1.0;
    spec.kappa2 = -0.5; // smaller second mass exercises the per-patch floors
    SolverConfig cfg;
    std::vector<double> lambdas{60.0, 120.0, 240.0, 480.0};
    SweepResult sw = sweep(g, spec, lambdas, cfg);
    for (const SolveReport& r : sw.reports) CHECK(r.converged);

    std::string dir = temp_dir("general");
    persist_run(dir, g, spec, cfg, sw.reports, sw.solves);
    std::ostringstream log;
    CHECK(verify_run(dir, log));

    // flip one digit of the recorded energy: verify must notice
    std::string csv = slurp(dir + "/reports.csv");
    std::size_t pos = csv.find("\n") + 1;
    pos = csv.find(",", csv.find(",", pos) + 1) + 1; // third field = energy
    csv[pos + 1] = (csv[pos + 1] == '3') ? '4' : '3';
    {
        std::ofstream out(dir + "/reports.csv", std::ios::binary);
        out << csv;
    }
    std::ostringstream log2;
    CHECK_FALSE(verify_run(dir, log2));
    std::filesystem::remove_all(dir);
}

TEST_CASE("reports CSV: empty and single-row shapes") {
    std::string dir = temp_dir("csvshape");
    std::filesystem::create_directories(dir);
    std::vector<SolveReport> empty;
    write_reports_csv(dir + "/empty.csv", empty);
    CHECK(slurp(dir + "/empty.csv") == std::string(reports_csv_header) + "\n");

    SolveReport r;
    r.lambda = 42.0;
    r.epsilon = 0.5;
    r.converged = true;
    std::vector<SolveReport> one{r};
    write_reports_csv(dir + "/one.csv", one);
    std::string text = slurp(dir + "/one.csv");
    std::size_t lines = 0, commas = 0;
    for (char ch : text) {
        if (ch == '\n') ++lines;
    }
    std::string second = text.substr(text.find('\n') + 1);
    for (char ch : second)
        if (ch == ',') ++commas;
    CHECK(lines == 2);
    CHECK(commas == 14); // 15 columns
    std::filesystem::remove_all(dir);
}
