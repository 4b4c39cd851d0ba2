// Command-line front end: kr-min, solve, sweep, verify.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vpatch/diagnostics.hpp"
#include "vpatch/energy_solver.hpp"
#include "vpatch/kirchhoff_routh.hpp"
#include "vpatch/report_io.hpp"

namespace {

// Flat key = value config support: the file mirrors the subcommand's flags
// (kappa = 1 stands for --kappa 1).  Explicit flags win over the file.
std::vector<std::string> merge_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::string config_path;
    for (std::size_t i = 1; i < args.size();) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + i);
        } else {
            ++i;
        }
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw vpatch::io_error("cannot read config file " + config_path);

    auto strip = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return std::string();
        std::size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    };
    std::vector<std::string> injected;
    std::string line;
    while (std::getline(in, line)) {
        std::string s = strip(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw vpatch::io_error("config line is not key = value: " + s);
        std::string key = strip(s.substr(0, eq));
        std::string val = strip(s.substr(eq + 1));
        std::string flag = "--" + key;
        bool overridden = false;
        for (std::size_t i = 1; i < args.size(); ++i)
            if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) overridden = true;
        if (!overridden) injected.push_back(flag + "=" + val);
    }
    // inject right after the subcommand name
    std::size_t pos = args.size() > 1 ? 2 : 1;
    args.insert(args.begin() + pos, injected.begin(), injected.end());
    return args;
}

void print_report(const vpatch::SolveReport& r) {
    using vpatch::detail::fmt;
    std::cout << "lambda      = " << fmt(r.lambda) << "\n"
              << "epsilon     = " << fmt(r.epsilon) << "\n"
              << "energy      = " << fmt(r.energy) << "\n"
              << "mu          = " << fmt(r.mu) << "\n"
              << "centroid1   = (" << fmt(r.centroid1.x) << ", " << fmt(r.centroid1.y) << ")\n"
              << "centroid2   = (" << fmt(r.centroid2.x) << ", " << fmt(r.centroid2.y) << ")\n"
              << "diam1       = " << fmt(r.diam1) << "  (diam/eps = " << fmt(r.diam_over_eps1())
              << ")\n"
              << "diam2       = " << fmt(r.diam2) << "  (diam/eps = " << fmt(r.diam_over_eps2())
              << ")\n"
              << "residuals   = " << fmt(r.weak_residuals[0]) << ", " << fmt(r.weak_residuals[1])
              << ", " << fmt(r.weak_residuals[2]) << "\n"
              << "iterations  = " << r.iterations << "\n"
              << "converged   = " << (r.converged ? "yes" : "no") << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady vortex patch pairs in the unit disk by energy maximization"};
    app.require_subcommand(1);

    // kr-min
    double gamma = 1.0, kappa1_kr = 1.0;
    CLI::App* krmin = app.add_subcommand("kr-min", "minimize the two-vortex interaction energy");
    krmin->add_option("--gamma", gamma, "circulation ratio -kappa2/kappa1")->required();
    krmin->add_option("--kappa1", kappa1_kr, "circulation of the positive vortex");

    // shared solve/sweep options
    struct RunOpts {
        double kappa = 1.0;
        double kappa2 = 0.0; // 0: defaulted to -kappa
        int grid_n = 256;
        std::string cls = "symmetric";
        double delta = 0.0;
        std::string out;
        int max_iters = 500;
        double init_shift = 0.0;
    };
    RunOpts so, wo;
    double lambda_single = 400.0;
    std::vector<double> lambdas;

    CLI::App* solve_cmd = app.add_subcommand("solve", "solve one vorticity-strength value");
    solve_cmd->add_option("--kappa", so.kappa, "patch-1 mass")->required();
    solve_cmd->add_option("--lambda", lambda_single, "vorticity bound")->required();
    solve_cmd->add_option("--grid-n", so.grid_n, "cells per axis")->required();
    solve_cmd->add_option("--class", so.cls, "symmetric|general")
        ->check(CLI::IsMember({"symmetric", "general"}));
    solve_cmd->add_option("--kappa2", so.kappa2, "patch-2 mass (general class)");
    solve_cmd->add_option("--delta", so.delta, "support ball radius override");
    solve_cmd->add_option("--out", so.out, "output directory");
    solve_cmd->add_option("--max-iters", so.max_iters, "ascent iteration cap");
    solve_cmd->add_option("--init-shift", so.init_shift,
                          "x2 offset of the starting disk from the ball center");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "solve an increasing list of lambdas");
    sweep_cmd->add_option("--kappa", wo.kappa, "patch-1 mass")->required();
    sweep_cmd->add_option("--lambdas", lambdas, "comma-separated lambdas")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--grid-n", wo.grid_n, "cells per axis")->required();
    sweep_cmd->add_option("--class", wo.cls, "symmetric|general")
        ->check(CLI::IsMember({"symmetric", "general"}));
    sweep_cmd->add_option("--kappa2", wo.kappa2, "patch-2 mass (general class)");
    sweep_cmd->add_option("--delta", wo.delta, "support ball radius override");
    sweep_cmd->add_option("--out", wo.out, "output directory");
    sweep_cmd->add_option("--max-iters", wo.max_iters, "ascent iteration cap");
    sweep_cmd->add_option("--init-shift", wo.init_shift,
                          "x2 offset of the starting disk from the ball center");

    std::string verify_dir_path;
    CLI::App* verify_cmd = app.add_subcommand("verify", "recompute diagnostics from a run directory");
    verify_cmd->add_option("--in", verify_dir_path, "run directory")->required();

    // consumed before parsing; registered here so it shows up in --help
    std::string config_doc;
    for (CLI::App* sub : {krmin, solve_cmd, sweep_cmd, verify_cmd})
        sub->add_option("--config", config_doc,
                        "flat key = value file mirroring these flags; explicit flags win");

    std::vector<std::string> args;
    try {
        args = merge_config_args(argc, argv);
    } catch (const vpatch::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::vector<char*> argv2;
    for (std::string& s : args) argv2.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv2.size()), argv2.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (krmin->parsed()) {
            vpatch::KrProblem prob{kappa1_kr, -gamma * kappa1_kr};
            vpatch::KrCritPoint cp = vpatch::kr_minimize(prob);
            using vpatch::detail::fmt;
            std::cout << "gamma     = " << fmt(gamma) << "\n"
                      << "rho1      = " << fmt(cp.rho1) << "\n"
                      << "rho2      = " << fmt(cp.rho2) << "\n"
                      << "residuals = " << fmt(cp.f1) << ", " << fmt(cp.f2) << "\n"
                      << "H2        = " << fmt(cp.value) << "\n"
                      << "P         = (" << fmt(cp.point1().x) << ", " << fmt(cp.point1().y)
                      << ")\n"
                      << "Q         = (" << fmt(cp.point2().x) << ", " << fmt(cp.point2().y)
                      << ")\n";
            return 0;
        }

        auto class_spec = [](const RunOpts& o) {
            vpatch::ClassSpec spec;
            spec.kappa1 = o.kappa;
            spec.symmetric = (o.cls == "symmetric");
            spec.kappa2 = spec.symmetric ? -o.kappa : (o.kappa2 != 0.0 ? o.kappa2 : -o.kappa);
            spec.delta = o.delta;
            return spec;
        };

        if (solve_cmd->parsed()) {
            vpatch::DiskGrid grid = vpatch::build_grid(so.grid_n);
            vpatch::ClassSpec spec = class_spec(so);
            vpatch::SolverConfig cfg;
            cfg.max_iters = so.max_iters;
            cfg.init_shift = so.init_shift;
            auto t0 = std::chrono::steady_clock::now();
            vpatch::SolveResult res = vpatch::solve(grid, spec.constraints_for(lambda_single), cfg);
            double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            vpatch::SolveReport rep = vpatch::make_report(grid, res, dt);
            print_report(rep);
            if (!so.out.empty()) {
                std::vector<vpatch::SolveReport> reports{rep};
                std::vector<vpatch::SolveResult> solves;
                solves.push_back(std::move(res));
                vpatch::persist_run(so.out, grid, spec, cfg, reports, solves);
                std::cout << "wrote " << so.out << "\n";
            }
            return rep.converged ? 0 : 1;
        }

        if (sweep_cmd->parsed()) {
            vpatch::DiskGrid grid = vpatch::build_grid(wo.grid_n);
            vpatch::ClassSpec spec = class_spec(wo);
            vpatch::SolverConfig cfg;
            cfg.max_iters = wo.max_iters;
            cfg.init_shift = wo.init_shift;
            vpatch::SweepResult sw = vpatch::sweep(grid, spec, lambdas, cfg);
            bool all_converged = true;
            for (const auto& r : sw.reports) {
                print_report(r);
                std::cout << "----\n";
                all_converged = all_converged && r.converged;
            }
            using vpatch::detail::fmt;
            std::cout << "mu_slope      = " << fmt(sw.fit.mu_slope) << "\n"
                      << "energy_slope  = " << fmt(sw.fit.energy_slope) << "\n"
                      << "diam_ratio_max= " << fmt(sw.fit.diam_ratio_max) << "\n";
            if (!wo.out.empty()) {
                vpatch::persist_run(wo.out, grid, spec, cfg, sw.reports, sw.solves);
                std::cout << "wrote " << wo.out << "\n";
            }
            return all_converged ? 0 : 1;
        }

        if (verify_cmd->parsed()) {
            bool ok = vpatch::verify_run(verify_dir_path, std::cout);
            std::cout << (ok ? "verify: PASS" : "verify: FAIL") << "\n";
            return ok ? 0 : 1;
        }
    } catch (const vpatch::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
