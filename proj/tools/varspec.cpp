#include <iostream>

#include <CLI11.hpp>

#include "varspec/cli.hpp"

namespace cli = varspec::cli;

int main(int argc, char** argv) {
    CLI::App app{"Spectral law of MANOVA variance-component estimators"};
    app.require_subcommand(1);

    cli::SolveOptions solve;
    std::vector<double> grid;
    auto* s = app.add_subcommand("solve", "density of the limiting spectral law on a grid");
    s->add_option("config", solve.config, "JSON config")->required();
    s->add_option("--grid", grid, "xmin xmax count (automatic grid when omitted)")->expected(3);
    s->add_option("--eps", solve.epsilon, "imaginary offset of the spectral parameter")->capture_default_str();
    s->add_option("--out", solve.out, "density CSV")->required();
    s->add_flag("--general", solve.force_general, "skip the closed form even when the design has one");

    cli::SimulateOptions sim;
    int target = 0;
    auto* m = app.add_subcommand("simulate", "eigenvalues of simulated estimators");
    m->add_option("config", sim.config, "JSON config")->required();
    m->add_option("--seed", sim.seed)->capture_default_str();
    m->add_option("--reps", sim.reps)->capture_default_str();
    m->add_option("--target", target, "component index (default: config target)");
    m->add_option("--out", sim.out, "output directory")->required();

    cli::CompareOptions cmp;
    auto* c = app.add_subcommand("compare", "KS distance and moment gaps between a density and a spectrum");
    c->add_option("--density", cmp.density)->required();
    c->add_option("--eigs", cmp.eigs)->required();
    c->add_option("--trim", cmp.trim, "extreme eigenvalues to drop")->capture_default_str();
    c->add_option("--rep", cmp.rep, "replicate to read (default: first in file)");
    c->add_option("--out", cmp.out, "report JSON")->required();

    cli::CheckOptions chk;
    auto* k = app.add_subcommand("check", "run the invariant suite");
    k->add_option("config", chk.config, "JSON config")->required();
    k->add_option("--z-samples", chk.z_samples)->capture_default_str();
    k->add_option("--out", chk.out, "ledger JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kInvalidInput;
    }

    try {
        if (*s) {
            if (!grid.empty()) {
                solve.xmin = grid[0];
                solve.xmax = grid[1];
                solve.count = static_cast<int>(grid[2]);
                if (solve.count < 1 || grid[2] != solve.count) {
                    std::cerr << "error: --grid count must be a positive integer\n";
                    return cli::kInvalidInput;
                }
            }
            return cli::cmd_solve(solve, std::cout, std::cerr);
        }
        if (*m) {
            if (target > 0) sim.target = target;
            return cli::cmd_simulate(sim, std::cout, std::cerr);
        }
        if (*c) return cli::cmd_compare(cmp, std::cout, std::cerr);
        if (*k) return cli::cmd_check(chk, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kInvalidInput;
    }
    return cli::kInvalidInput;
}
