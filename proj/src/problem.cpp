#include "wbary/problem.hpp"

#include "wbary/bounds.hpp"
#include "wbary/error.hpp"
#include "wbary/semidiscrete.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace wbary {

namespace {

SolverOptions solver_options(const ProblemFile& pf) {
    SolverOptions so;
    so.tol = pf.tol;
    return so;
}

MmotOptions mmot_options(const ProblemFile& pf) {
    MmotOptions mo;
    mo.cap = pf.cap;
    mo.solver = solver_options(pf);
    return mo;
}

DiracConfiguration dirac_configuration(const ProblemFile& pf) {
    DiracConfiguration dc;
    dc.p = pf.p;
    dc.weights = pf.weights;
    for (std::size_t i = 1; i < pf.marginals.size(); ++i) dc.anchors.push_back(pf.marginals[i].discrete.atoms.front());
    return dc;
}

double ball_volume(int d, double r) { return std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(r, d); }

DensityFn ball_indicator(const MarginalSpec& m) {
    const double value = 1.0 / ball_volume(m.dim(), m.radius);
    return [c = m.center, r = m.radius, value](const Vec& x) { return (x - c).norm() <= r ? value : 0.0; };
}

std::vector<double> blowup_radii(double scale) {
    std::vector<double> r;
    for (int k = 16; k <= 36; ++k) r.push_back(scale * std::pow(2.0, -k));
    return r;
}

Json fit_json(const BlowupFit& fit) {
    Json verdicts = Json::array();
    for (const auto& [q, v] : fit.verdicts) verdicts.push_back({{"q", q}, {"verdict", to_string(v)}});
    return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}, {"q0", number(fit.q0)},
            {"annuli", fit.radii.size()}, {"verdicts", verdicts}};
}

void append_fit_rows(std::ostringstream& os, std::size_t point, const BlowupFit& fit) {
    for (std::size_t k = 0; k < fit.radii.size(); ++k) os << point << "," << fit.radii[k] << "," << fit.means[k] << "\n";
}

std::string to_text(const std::function<void(std::ostream&)>& write) {
    std::ostringstream os;
    os << std::setprecision(17);
    write(os);
    return os.str();
}

RunArtifacts run_point_bary(const ProblemFile& pf) {
    WeightedPointConfig cfg{pf.points, pf.weights, pf.p};
    auto sol = pbary_solve(cfg, solver_options(pf));
    RunArtifacts a;
    Json& s = a.summary;
    s["z"] = to_json(sol.z);
    s["objective"] = pbary_objective(cfg, sol.z);
    s["residual_norm"] = sol.residual_norm;
    s["iterations"] = sol.iterations;
    s["coincident_set"] = sol.coincident_set;
    s["borderline"] = sol.borderline;
    try {
        auto cb = curvature_blocks(cfg, sol.z);
        Json lambda = Json::array();
        for (double l : cb.Lambda) lambda.push_back(number(l));
        s["curvature"] = {{"Lambda", lambda}, {"singular", cb.singular}};
        if (!cb.has_singular()) s["curvature"]["Hbar_min_eigenvalue"] = min_sym_eigenvalue(cb.Hbar);
    } catch (const DegenerateError& e) {
        s["curvature"] = nullptr;
        s["curvature_note"] = e.what();
    }
    return a;
}

RunArtifacts run_semidiscrete(const ProblemFile& pf) {
    const MarginalSpec& m1 = pf.marginals.front();
    const int d = m1.dim();
    GridDensity f1 = m1.density(pf.grid);
    SemidiscreteMap map(dirac_configuration(pf), solver_options(pf));
    PushforwardOptions po;
    po.res.assign(d, pf.grid);
    PushforwardResult push = pushforward_density(map, f1, po);

    RunArtifacts a;
    Json& s = a.summary;
    s["alpha"] = map.alpha();
    s["fixed_point"] = to_json(map.fixed_point());
    Json sing = Json::array();
    for (const auto& z : map.singular_points()) sing.push_back(to_json(z));
    s["singular_points"] = sing;
    s["pushforward"] = {{"mass", push.mass},
                        {"source_mass", push.source_mass},
                        {"mass_error", push.mass_error},
                        {"coarse_warning", push.coarse_warning},
                        {"refined_cells", push.refined_cells},
                        {"grid", pf.grid}};
    Json lq = Json::array();
    for (double q : pf.q) {
        Json e{{"q", q}, {"f1_norm", std::pow(f1.lq_power(q), 1.0 / q)}, {"grid_norm", lq_norm(push.g, q)}};
        LqEstimate cv = lq_via_changevar(map, f1, q, 3);
        e["changevar_norm"] = cv.finite ? number(std::pow(cv.value, 1.0 / q)) : Json(nullptr);
        e["changevar_finite"] = cv.finite;
        if (is_p_two(pf.p))
            e["p2_prediction"] = std::pow(pf.weights.front(), d * (1.0 - q) / q) * std::pow(f1.lq_power(q), 1.0 / q);
        lq.push_back(e);
    }
    s["lq"] = lq;

    std::ostringstream fits;
    fits << std::setprecision(17) << "point,radius,mean\n";
    Json blowup = Json::array();
    const auto points = map.singular_points();
    const DensityFn ball = ball_indicator(m1);
    for (std::size_t k = 0; k < points.size(); ++k) {
        Json e{{"point", to_json(points[k])}};
        try {
            auto fit = blowup_exponent(map, ball, points[k], blowup_radii(std::max(1.0, map.anchor_diameter())), pf.q);
            e["fit"] = fit_json(fit);
            append_fit_rows(fits, k, fit);
        } catch (const InsufficientDataError& err) {
            e["fit"] = nullptr;
            e["note"] = err.what();
        }
        blowup.push_back(e);
    }
    s["blowup"] = blowup;
    a.files.emplace_back("density.csv", to_text([&](std::ostream& os) { write_grid_csv(os, push.g); }));
    a.files.emplace_back("fits.csv", fits.str());
    return a;
}

RunArtifacts run_counterexample(const ProblemFile& pf) {
    const MarginalSpec& m1 = pf.marginals.front();
    SemidiscreteMap map(dirac_configuration(pf), solver_options(pf));
    const DensityFn ball = ball_indicator(m1);
    std::optional<Vec> point;
    for (const auto& z : map.singular_points()) {
        if (ball(map.inverse(z)) > 0.0) {
            point = z;
            break;
        }
    }
    if (!point)
        throw DegenerateError(pf.p > 2.0 ? "the reduced barycenter does not lie in the support of the first marginal"
                                         : "no anchor lies in the image of the support of the first marginal");
    BlowupFit fit = blowup_exponent(map, ball, *point, blowup_radii(std::max(1.0, map.anchor_diameter())), pf.q);
    const double predicted = pf.p > 2.0 ? (pf.p - 1.0) / (pf.p - 2.0) : 1.0 / (2.0 - pf.p);
    RunArtifacts a;
    Json& s = a.summary;
    s["singular_point"] = to_json(*point);
    s["singular_kind"] = pf.p > 2.0 ? "fixed_point" : "anchor";
    s["fit"] = fit_json(fit);
    s["q0"] = number(fit.q0);
    s["q0_predicted"] = predicted;
    s["q0_match"] = std::abs(fit.q0 - predicted) <= 0.2;
    s["slope_predicted"] = pf.p > 2.0 ? -m1.dim() * alpha_p(pf.p) : -m1.dim() * (2.0 - pf.p);
    std::ostringstream fits;
    fits << std::setprecision(17) << "point,radius,mean\n";
    append_fit_rows(fits, 0, fit);
    a.files.emplace_back("fits.csv", fits.str());
    return a;
}

RunArtifacts run_bounds(const ProblemFile& pf) {
    RunArtifacts a;
    Json& s = a.summary;
    const MmotOptions mo = mmot_options(pf);
    std::vector<DiscreteMeasure> measures;
    for (const auto& m : pf.marginals) measures.push_back(m.measure(pf.grid));
    SupportGeometry g = support_geometry(measures, pf.weights, pf.p, mo);
    s["geometry"] = {{"D", g.D}, {"m", g.m}, {"M", g.M_diam}};

    if (pf.marginals.front().type == MarginalType::uniform_ball) {
        const int d = pf.marginals.front().dim();
        GridDensity f1 = pf.marginals.front().density(pf.grid);
        DiracConfiguration dc = dirac_configuration(pf);
        SemidiscreteMap map(dc, solver_options(pf));
        GeneralLqOptions go;
        go.solver = solver_options(pf);
        Json rows = Json::array();
        for (std::size_t k = 0; k < pf.q.size(); ++k) {
            const double q = pf.q[k];
            Json e{{"q", q}};
            const double f1q = std::pow(f1.lq_power(q), 1.0 / q);
            LqEstimate cv = lq_via_changevar(map, f1, q, 3);
            e["measured_norm"] = cv.finite ? number(std::pow(cv.value, 1.0 / q)) : Json(nullptr);
            try {
                e["integrability_bound_unit_constant"] = integrability_bound(f1q, g, q, pf.p, dc.lambda1(), d);
            } catch (const DegenerateError& err) {
                e["integrability_bound_unit_constant"] = nullptr;
                e["integrability_note"] = err.what();
            }
            go.keep_cells = k == 0;
            GeneralLqReport r = general_lq_bound(f1, dc.anchors, pf.weights, pf.p, q, go);
            e["general_bound"] = {{"value", number(r.value)},
                                  {"value_half_prefactor", number(r.value_half_prefactor)},
                                  {"diagonal_part", number(r.diagonal_part)},
                                  {"ratio_part", number(r.ratio_part)},
                                  {"diverging", r.diverging},
                                  {"level_sums", r.level_sums},
                                  {"near_singular", r.near_singular},
                                  {"cells_in_F1", r.cells_in_F1},
                                  {"cells_other", r.cells_other}};
            e["measured_power"] = cv.finite ? number(cv.value) : Json(nullptr);
            if (k == 0) a.files.emplace_back("general_cells.csv", to_text([&](std::ostream& os) { write_cells_csv(r, os); }));
            rows.push_back(e);
        }
        s["lq"] = rows;
        return a;
    }

    TransportPlan plan = solve_mmot(measures, pf.weights, pf.p, mo);
    InjectivityOptions io;
    io.seed = pf.seed;
    std::ostringstream csv;
    csv << std::setprecision(17) << "entry,pass,vacuous,k0,radius,constant,S,pairs,worst_margin\n";
    bool all = true;
    int max_k0 = 0;
    std::size_t vacuous = 0;
    for (std::size_t e = 0; e < plan.entries.size(); ++e) {
        InjectivityReport r = local_injectivity_check(plan, e, io);
        all = all && r.pass;
        max_k0 = std::max(max_k0, r.k0);
        vacuous += r.vacuous;
        csv << e << "," << r.pass << "," << r.vacuous << "," << r.k0 << "," << r.radius << "," << r.constant << ","
            << r.S << "," << r.pairs_at_k0 << "," << r.worst_margin << "\n";
    }
    s["objective"] = plan.objective;
    s["injectivity"] = {{"entries", plan.entries.size()}, {"pass", all}, {"max_k0", max_k0}, {"vacuous", vacuous}};
    a.files.emplace_back("plan.csv", to_text([&](std::ostream& os) { plan.write_csv(os); }));
    a.files.emplace_back("injectivity.csv", csv.str());
    return a;
}

RunArtifacts run_mmot(const ProblemFile& pf) {
    const MmotOptions mo = mmot_options(pf);
    std::vector<DiscreteMeasure> measures;
    for (const auto& m : pf.marginals) measures.push_back(m.measure(pf.grid));
    TransportPlan plan = solve_mmot(measures, pf.weights, pf.p, mo);
    DiscreteMeasure nu = barycenter_measure(plan);
    RunArtifacts a;
    Json& s = a.summary;
    s["objective"] = plan.objective;
    s["marginal_residual"] = plan.marginal_residual;
    s["support_size"] = plan.entries.size();
    s["alternative_optima"] = plan.alternative_optima;
    s["iterations"] = plan.iterations;
    s["barycenter_atoms"] = nu.size();
    double sum_wp = 0.0;
    for (std::size_t i = 0; i < measures.size(); ++i) sum_wp += pf.weights[i] * ot_two_marginal(measures[i], nu, pf.p, mo).cost;
    const double gap = std::abs(sum_wp - plan.objective);
    s["equivalence"] = {{"sum_wp", sum_wp}, {"gap", gap}, {"pass", gap <= 1e-8 * (1.0 + plan.objective)}};
    MonotoneReport mono = check_cp_monotone(plan);
    s["monotone"] = {{"pass", mono.pass}, {"pairs", mono.pairs}, {"worst", mono.worst}};
    GraphReport graph = check_graph_over_first(plan);
    s["graph_over_first"] = {{"is_graph", graph.is_graph},
                             {"warning_only", graph.warning_only},
                             {"multi_valued_atoms", graph.multi_valued_atoms}};
    DualCheckReport dual = dual_check_potentials(measures, pf.weights, pf.p, mo);
    s["dual_check"] = {{"status", dual.status}, {"spread", dual.spread}, {"variance", dual.variance},
                       {"nonunique", dual.nonunique}};
    a.files.emplace_back("plan.csv", to_text([&](std::ostream& os) { plan.write_csv(os); }));
    a.files.emplace_back("barycenter.csv", to_text([&](std::ostream& os) { write_measure_csv(os, nu); }));
    return a;
}

RunArtifacts run_affine(const ProblemFile& pf) {
    RunArtifacts a;
    Json& s = a.summary;
    Json spectra = Json::array();
    for (const auto& m : pf.maps) {
        try {
            SpectrumVerdict v = spectrum_optimality(m.A);
            spectra.push_back({{"symmetric", true}, {"optimal", v.optimal}, {"zeta", v.zeta}, {"eigenvalues", v.eigenvalues}});
        } catch (const StructureError&) {
            spectra.push_back({{"symmetric", false}, {"optimal", false}});
        }
    }
    s["spectrum"] = spectra;
    MatrixPbaryOptions po;
    po.solver = solver_options(pf);
    AffineBarycenter ab = affine_barycenter(pf.maps, pf.weights, pf.p, po);
    s["barycenter"] = {{"kind", to_string(ab.kind)},
                       {"bar", to_json(ab.bar)},
                       {"transport", to_json(ab.transport)},
                       {"zeta", ab.zeta},
                       {"fast_path", ab.fast_path}};
    const MmotOptions mo = mmot_options(pf);
    AffineMmotReport r = pf.mu->type == MarginalType::discrete
                             ? verify_affine_vs_mmot(pf.mu->discrete, 0.0, pf.maps, pf.weights, pf.p, mo)
                             : verify_affine_vs_mmot(pf.mu->density(pf.grid), pf.maps, pf.weights, pf.p, mo);
    s["mmot_check"] = {{"gap", r.gap}, {"h", r.h}, {"tolerance", r.tolerance}, {"pass", r.pass}, {"objective", r.objective}};
    a.files.emplace_back("barycenter_closed_form.csv",
                         to_text([&](std::ostream& os) { write_measure_csv(os, r.closed_form); }));
    a.files.emplace_back("barycenter_mmot.csv", to_text([&](std::ostream& os) { write_measure_csv(os, r.mmot); }));
    return a;
}

}  // namespace

void apply_overrides(ProblemFile& pf, const Overrides& o) {
    if (o.p) pf.p = *o.p;
    if (o.q) pf.q = *o.q;
    if (o.grid) pf.grid = *o.grid;
    if (o.tol) pf.tol = *o.tol;
    if (o.seed) pf.seed = *o.seed;
    if (o.cap) pf.cap = *o.cap;
    pf.validate();
}

RunArtifacts execute(const ProblemFile& pf) {
    pf.validate();
    RunArtifacts a;
    switch (pf.kind) {
        case ProblemKind::point_bary: a = run_point_bary(pf); break;
        case ProblemKind::semidiscrete: a = run_semidiscrete(pf); break;
        case ProblemKind::counterexample: a = run_counterexample(pf); break;
        case ProblemKind::bounds: a = run_bounds(pf); break;
        case ProblemKind::mmot: a = run_mmot(pf); break;
        case ProblemKind::affine: a = run_affine(pf); break;
    }
    Json head{{"kind", to_string(pf.kind)}, {"p", pf.p}, {"q", pf.q}, {"weights", pf.weights}, {"dim", pf.dim()}};
    head.update(a.summary);
    a.summary = head;
    return a;
}

Json manifest(const ProblemFile& pf, const RunArtifacts& a) {
    Json files = Json::array({"summary.json"});
    for (const auto& f : a.files) files.push_back(f.first);
    files.push_back("manifest.json");
    return {{"tool", "wbary"},
            {"version", kToolVersion},
            {"kind", to_string(pf.kind)},
            {"seed", pf.seed},
            {"tolerances", {{"tol", pf.tol}, {"lp_tol", LpOptions{}.tol}, {"cap", pf.cap}, {"grid", pf.grid}}},
            {"files", files}};
}

int run_problem_file(const std::string& path, const Overrides& o, const std::string& out_dir, std::ostream& err) {
    try {
        ProblemFile pf = load_problem(path);
        apply_overrides(pf, o);
        RunArtifacts a = execute(pf);
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        auto write = [&](const std::string& name, const std::string& content) {
            std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
            out << content;
            if (!out) throw std::runtime_error("cannot write " + (fs::path(out_dir) / name).string());
        };
        write("summary.json", a.summary.dump(2) + "\n");
        for (const auto& [name, content] : a.files) write(name, content);
        write("manifest.json", manifest(pf, a).dump(2) + "\n");
        return exit_ok;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const StructureError& e) {
        err << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const SizeError& e) {
        err << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    }
}

}  // namespace wbary
