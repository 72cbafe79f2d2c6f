#include "wbary/acceptance.hpp"
#include "wbary/parallel.hpp"
#include "wbary/problem.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"p-Wasserstein barycenters, semi-discrete maps and integrability checks"};
    app.set_version_flag("--version", std::string(wbary::kToolVersion));
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: WBARY_THREADS, else all cores)")
        ->check(CLI::NonNegativeNumber);

    auto* run = app.add_subcommand("run", "run a problem file");
    std::string problem, out = "out";
    wbary::Overrides ov;
    double p = 0.0, tol = 0.0;
    std::vector<double> q;
    int grid = 0;
    std::uint64_t seed = 0;
    std::size_t cap = 0;
    run->add_option("problem", problem, "problem JSON file")->required();
    run->add_option("--out", out, "output directory")->capture_default_str();
    auto* p_opt = run->add_option("--p", p, "override p");
    auto* q_opt = run->add_option("--q", q, "override the integrability exponent(s)");
    auto* grid_opt = run->add_option("--grid", grid, "override the grid resolution per axis");
    auto* tol_opt = run->add_option("--tol", tol, "override the solver tolerance");
    auto* seed_opt = run->add_option("--seed", seed, "override the seed");
    auto* cap_opt = run->add_option("--cap", cap, "override the MMOT tensor cap");
    run->add_option("--threads", threads, "worker threads")->check(CLI::NonNegativeNumber);

    auto* self = app.add_subcommand("selftest", "run the acceptance suite at reduced scale");
    bool p2_only = false;
    self->add_flag("--p2-only", p2_only, "only the p = 2 criteria");
    self->add_option("--threads", threads, "worker threads")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : wbary::exit_validation;
    }
    wbary::set_thread_count(threads);

    if (*run) {
        if (*p_opt) ov.p = p;
        if (*q_opt) ov.q = q;
        if (*grid_opt) ov.grid = grid;
        if (*tol_opt) ov.tol = tol;
        if (*seed_opt) ov.seed = seed;
        if (*cap_opt) ov.cap = cap;
        return wbary::run_problem_file(problem, ov, out, std::cerr);
    }
    wbary::AcceptanceOptions opts;
    opts.reduced = true;
    opts.p2_only = p2_only;
    return wbary::acceptance_exit_code(wbary::run_acceptance(opts, std::cout));
}
