#include "iga/cooling.hpp"
#include "iga/markers.hpp"
#include "iga/optimizer.hpp"
#include "iga/validation.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace iga;

namespace {

constexpr const char* kFormatVersion = "1";

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw std::runtime_error("config: unknown key '" + it.key() + "' in " + where);
    }
}

struct RunConfig {
    std::string problem = "validation";
    std::string output_dir = "out";
    long seed = 0;
    int threads = 1;
    std::vector<double> alpha;  // optional explicit design point

    // optimization
    double mu = 1e-4;
    int u_ref = 0;
    double kkt_tol = 1e-6;
    double mu_feas = 1e-6;
    int max_outer_iter = 30;
    std::string basis_mode = "variable";
    int static_cells_x = 12, static_cells_y = 12;
    double warm_eps = 0.05;

    // discretization
    int degree = 3;
    int coarse_cells_x = 7, coarse_cells_y = 7;
    int quad = 8;
    int max_levels = 6;
    double egg_newton_tol = 1e-10;
    double egg_metric_eps = 1e-4;
    double state_tol = 1e-10;
    bool matrix_free = false;

    // problem constants
    double nitsche_c = 1e3;
    CoolingOptions cooling;
    double start_radius = 0.0;  // cooling: 0 = grow until feasible

    // gradient check
    double fd_h = 1e-5;
    bool frozen_basis = true;

    json effective;  // echo for the manifest
};

RunConfig parse_config(const std::string& path) {
    RunConfig c;
    json j;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        in >> j;
    }
    check_keys(j, {"problem", "output_dir", "seed", "threads", "alpha", "optimization", "discretization",
                   "constants", "gradient_check"},
               "top level");
    c.problem = j.value("problem", c.problem);
    if (c.problem != "validation" && c.problem != "cooling")
        throw std::runtime_error("config: problem must be 'validation' or 'cooling'");
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("alpha")) c.alpha = j["alpha"].get<std::vector<double>>();

    if (j.contains("optimization")) {
        const json& o = j["optimization"];
        check_keys(o, {"mu", "u_ref", "kkt_tol", "mu_feas", "max_outer_iter", "basis_mode", "static_cells_x",
                       "static_cells_y", "warm_eps"},
                   "optimization");
        c.mu = o.value("mu", c.mu);
        c.u_ref = o.value("u_ref", c.u_ref);
        c.kkt_tol = o.value("kkt_tol", c.kkt_tol);
        c.mu_feas = o.value("mu_feas", c.mu_feas);
        c.max_outer_iter = o.value("max_outer_iter", c.max_outer_iter);
        c.basis_mode = o.value("basis_mode", c.basis_mode);
        if (c.basis_mode != "variable" && c.basis_mode != "static")
            throw std::runtime_error("config: basis_mode must be 'variable' or 'static'");
        c.static_cells_x = o.value("static_cells_x", c.static_cells_x);
        c.static_cells_y = o.value("static_cells_y", c.static_cells_y);
        c.warm_eps = o.value("warm_eps", c.warm_eps);
    }
    if (j.contains("discretization")) {
        const json& d = j["discretization"];
        check_keys(d, {"degree", "coarse_cells_x", "coarse_cells_y", "quad", "max_levels", "egg_newton_tol",
                       "egg_metric_eps", "state_tol", "matrix_free"},
                   "discretization");
        c.degree = d.value("degree", c.degree);
        c.coarse_cells_x = d.value("coarse_cells_x", c.coarse_cells_x);
        c.coarse_cells_y = d.value("coarse_cells_y", c.coarse_cells_y);
        c.quad = d.value("quad", c.quad);
        c.max_levels = d.value("max_levels", c.max_levels);
        c.egg_newton_tol = d.value("egg_newton_tol", c.egg_newton_tol);
        c.egg_metric_eps = d.value("egg_metric_eps", c.egg_metric_eps);
        c.state_tol = d.value("state_tol", c.state_tol);
        c.matrix_free = d.value("matrix_free", c.matrix_free);
    }
    if (c.problem == "cooling") {
        c.coarse_cells_x = 8;
        c.coarse_cells_y = 4;
        c.kkt_tol = 1e-4;
        c.mu = 0.5e-3;
        c.u_ref = 1;
        c.mu_feas = 1e-6 * c.cooling.t_max * 100.0;
        if (j.contains("discretization")) {
            const json& d = j["discretization"];
            c.coarse_cells_x = d.value("coarse_cells_x", c.coarse_cells_x);
            c.coarse_cells_y = d.value("coarse_cells_y", c.coarse_cells_y);
        }
        if (j.contains("optimization")) {
            const json& o = j["optimization"];
            c.kkt_tol = o.value("kkt_tol", c.kkt_tol);
            c.mu = o.value("mu", c.mu);
            c.u_ref = o.value("u_ref", c.u_ref);
            c.mu_feas = o.value("mu_feas", c.mu_feas);
        }
    }
    if (j.contains("constants")) {
        const json& k = j["constants"];
        check_keys(k, {"nitsche_c", "diffusivity", "dissipation", "n_tot", "t_max", "sigma", "source_x",
                       "source_y", "cooling_coef", "cost_coef", "band_factor", "blend_factor", "corner_margin",
                       "r_min", "r_max", "start_radius"},
                   "constants");
        c.nitsche_c = k.value("nitsche_c", c.nitsche_c);
        c.cooling.diffusivity = k.value("diffusivity", c.cooling.diffusivity);
        c.cooling.dissipation = k.value("dissipation", c.cooling.dissipation);
        c.cooling.n_tot = k.value("n_tot", c.cooling.n_tot);
        c.cooling.t_max = k.value("t_max", c.cooling.t_max);
        c.cooling.sigma = k.value("sigma", c.cooling.sigma);
        c.cooling.source_center[0] = k.value("source_x", c.cooling.source_center[0]);
        c.cooling.source_center[1] = k.value("source_y", c.cooling.source_center[1]);
        c.cooling.cooling_coef = k.value("cooling_coef", c.cooling.cooling_coef);
        c.cooling.cost_coef = k.value("cost_coef", c.cooling.cost_coef);
        c.cooling.band_factor = k.value("band_factor", c.cooling.band_factor);
        c.cooling.blend_factor = k.value("blend_factor", c.cooling.blend_factor);
        c.cooling.corner_margin = k.value("corner_margin", c.cooling.corner_margin);
        c.cooling.r_min = k.value("r_min", c.cooling.r_min);
        c.cooling.r_max = k.value("r_max", c.cooling.r_max);
        c.start_radius = k.value("start_radius", c.start_radius);
    }
    if (j.contains("gradient_check")) {
        const json& g = j["gradient_check"];
        check_keys(g, {"h", "frozen_basis"}, "gradient_check");
        c.fd_h = g.value("h", c.fd_h);
        c.frozen_basis = g.value("frozen_basis", c.frozen_basis);
    }
    const char* env_threads = std::getenv("IGAOPT_THREADS");
    if (env_threads) c.threads = std::atoi(env_threads);

    // effective configuration (every constant affecting results)
    c.effective = {
        {"format_version", kFormatVersion},
        {"problem", c.problem},
        {"output_dir", c.output_dir},
        {"seed", c.seed},
        {"threads", c.threads},
        {"optimization",
         {{"mu", c.mu},
          {"u_ref", c.u_ref},
          {"kkt_tol", c.kkt_tol},
          {"mu_feas", c.mu_feas},
          {"max_outer_iter", c.max_outer_iter},
          {"basis_mode", c.basis_mode},
          {"static_cells_x", c.static_cells_x},
          {"static_cells_y", c.static_cells_y},
          {"warm_eps", c.warm_eps}}},
        {"discretization",
         {{"degree", c.degree},
          {"coarse_cells_x", c.coarse_cells_x},
          {"coarse_cells_y", c.coarse_cells_y},
          {"quad", c.quad},
          {"max_levels", c.max_levels},
          {"egg_newton_tol", c.egg_newton_tol},
          {"egg_metric_eps", c.egg_metric_eps},
          {"state_tol", c.state_tol},
          {"matrix_free", c.matrix_free}}},
        {"constants",
         {{"nitsche_c", c.nitsche_c},
          {"diffusivity", c.cooling.diffusivity},
          {"dissipation", c.cooling.dissipation},
          {"n_tot", c.cooling.n_tot},
          {"t_max", c.cooling.t_max},
          {"sigma", c.cooling.sigma},
          {"source_x", c.cooling.source_center[0]},
          {"source_y", c.cooling.source_center[1]},
          {"cooling_coef", c.cooling.cooling_coef},
          {"cost_coef", c.cooling.cost_coef},
          {"band_factor", c.cooling.band_factor},
          {"blend_factor", c.cooling.blend_factor},
          {"corner_margin", c.cooling.corner_margin},
          {"r_min", c.cooling.r_min},
          {"r_max", c.cooling.r_max},
          {"start_radius", c.start_radius}}},
        {"gradient_check", {{"h", c.fd_h}, {"frozen_basis", c.frozen_basis}}},
    };
    return c;
}

DriverConfig driver_config(const RunConfig& c) {
    DriverConfig d;
    d.degree = c.degree;
    d.coarse_cells_x = c.coarse_cells_x;
    d.coarse_cells_y = c.coarse_cells_y;
    d.mu = c.mu;
    d.u_ref = c.u_ref;
    d.static_basis = c.basis_mode == "static";
    d.static_cells_x = c.static_cells_x;
    d.static_cells_y = c.static_cells_y;
    d.max_levels = c.max_levels;
    d.state_newton_tol = c.state_tol;
    d.egg.newton_tol = c.egg_newton_tol;
    d.egg.metric_eps = c.egg_metric_eps;
    d.egg.quad = c.quad;
    d.adjoint.matrix_free = c.matrix_free;
    d.adjoint.egg = d.egg;
    return d;
}

std::unique_ptr<StateProblem> make_problem(const RunConfig& c) {
    if (c.problem == "validation") {
        ValidationOptions o;
        o.nitsche_c = c.nitsche_c;
        o.quad = c.quad;
        return std::make_unique<ValidationProblem>(o);
    }
    CoolingOptions o = c.cooling;
    o.quad = c.quad;
    return std::make_unique<CoolingProblem>(o);
}

Eigen::VectorXd starting_point(const RunConfig& c, const StateProblem& problem) {
    if (!c.alpha.empty()) {
        Eigen::VectorXd a(c.alpha.size());
        for (std::size_t i = 0; i < c.alpha.size(); ++i) a[i] = c.alpha[i];
        if (a.size() != problem.design_dim()) throw std::runtime_error("config: alpha has the wrong length");
        return a;
    }
    if (c.problem == "validation") return Eigen::VectorXd::Zero(4);
    // cooling: grow the first cooler until the temperature constraint holds
    const auto& cp = dynamic_cast<const CoolingProblem&>(problem);
    if (c.start_radius > 0.0) return cp.default_start(c.start_radius);
    const DriverConfig dc = driver_config(c);
    for (double r1 = 0.5; r1 <= cp.options().r_max + 1e-12; r1 += 0.05) {
        const Eigen::VectorXd a = cp.default_start(std::min(r1, cp.options().r_max));
        const DesignEval ev = evaluate_design(problem, a, dc, false);
        const double margin = ev.result.constraint_values[0];
        if (margin >= 2.0) return a;
    }
    throw std::runtime_error("cooling: no feasible starting design within the radius bounds");
}

void write_manifest(const RunConfig& c, const fs::path& dir, const std::string& subcommand) {
    json m = {
        {"manifest_version", kFormatVersion},
        {"subcommand", subcommand},
        {"config", c.effective},
        {"versions",
         {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__}}},
    };
    std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

/// Uniform 101 x 101 sample grid: xi eta x y detJ [u]; column order is part
/// of the output contract.
void write_samples(const fs::path& file, const GeometryMapping& m, const SplineFunction* u) {
    std::ofstream out(file);
    out << "xi\teta\tx\ty\tdetJ";
    if (u) out << "\tu";
    out << "\n";
    const SplineFunction map = m.spline();
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j) {
            const double xi = i / 100.0, eta = j / 100.0;
            const Eigen::Vector2d x = map.value(xi, eta);
            const Eigen::Matrix2d J = map.jacobian(xi, eta);
            const double det = J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0);
            out << fmt(xi) << "\t" << fmt(eta) << "\t" << fmt(x[0]) << "\t" << fmt(x[1]) << "\t" << fmt(det);
            if (u) out << "\t" << fmt(u->value(xi, eta)[0]);
            out << "\n";
        }
}

/// Versioned coefficient dump: base grid, per-level refined cells, and the
/// coefficient array.
void write_coefficients(const fs::path& file, const GeometryMapping& m) {
    json doc;
    doc["format_version"] = kFormatVersion;
    doc["degree"] = {m.space->degree_x(), m.space->degree_y()};
    doc["base_cells"] = {m.space->cells_x(0), m.space->cells_y(0)};
    json levels = json::array();
    for (int l = 0; l < m.space->num_levels(); ++l) {
        json refined = json::array();
        for (int cy = 0; cy < m.space->cells_y(l); ++cy)
            for (int cx = 0; cx < m.space->cells_x(l); ++cx)
                if (m.space->cell_state({l, cx, cy}) == HierarchicalSpace::Refined)
                    refined.push_back({cx, cy});
        levels.push_back({{"refined_cells", refined}});
    }
    doc["levels"] = levels;
    json coeffs = json::array();
    for (int i = 0; i < m.coeffs.rows(); ++i) coeffs.push_back({m.coeffs(i, 0), m.coeffs(i, 1)});
    doc["coefficients"] = coeffs;
    std::ofstream(file) << doc.dump() << "\n";
}

int run(const std::string& subcommand, const std::string& config_path) {
    const RunConfig c = parse_config(config_path);
    omp_set_num_threads(std::max(1, c.threads));
    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    const std::unique_ptr<StateProblem> problem = make_problem(c);
    const DriverConfig dc = driver_config(c);
    write_manifest(c, dir, subcommand);

    if (subcommand == "parameterize" || subcommand == "solve") {
        const Eigen::VectorXd alpha = starting_point(c, *problem);
        const DesignEval ev = evaluate_design(*problem, alpha, dc, false);
        write_samples(dir / "samples.txt", ev.mapping, subcommand == "solve" ? &ev.state : nullptr);
        write_coefficients(dir / "mapping.json", ev.mapping);
        json rep = {
            {"dof_geometry", ev.dof_geometry},
            {"dof_state", ev.dof_state},
            {"fold_repair_rounds", ev.param_stats.fold_rounds},
            {"newton_iterations", ev.param_stats.newton_iterations_total},
            {"projection_residual", fmt(ev.param_stats.projection.residual_total)},
            {"projection_refinements", ev.param_stats.projection.refinement_rounds},
        };
        if (subcommand == "solve") rep["objective"] = fmt(ev.result.objective_value);
        std::ofstream(dir / "report.json") << rep.dump(2) << "\n";
        std::cout << "wrote " << (dir / "samples.txt").string() << "\n";
        return 0;
    }

    if (subcommand == "optimize") {
        OptimizerConfig oc;
        oc.kkt_tol = c.kkt_tol;
        oc.mu_feas = c.mu_feas;
        oc.max_outer_iter = c.max_outer_iter;
        oc.warm_eps = c.warm_eps;
        oc.driver = dc;
        const Eigen::VectorXd a0 = starting_point(c, *problem);
        const OptimizeResult r = optimize(*problem, a0, oc);

        std::ofstream log(dir / "convergence.txt");
        log << "iter\taccepted\tJ\tkkt\tmax_violation\tdof_geometry\tdof_state\tfold_rounds\twall_s";
        for (int i = 0; i < a0.size(); ++i) log << "\talpha" << i;
        log << "\n";
        for (const IterationRecord& rec : r.history) {
            log << rec.index << "\t" << (rec.accepted ? 1 : 0) << "\t" << fmt(rec.objective) << "\t"
                << fmt(rec.kkt_residual) << "\t" << fmt(rec.max_violation) << "\t" << rec.dof_geometry << "\t"
                << rec.dof_state << "\t" << rec.fold_rounds << "\t" << fmt(rec.wall_seconds);
            for (int i = 0; i < rec.alpha.size(); ++i) log << "\t" << fmt(rec.alpha[i]);
            log << "\n";
        }

        json summary = {
            {"problem", c.problem},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"objective", fmt(r.objective)},
            {"best_objective", fmt(r.best_objective)},
            {"avg_dof_geometry", fmt(r.avg_dof_geometry)},
            {"avg_dof_state", fmt(r.avg_dof_state)},
            {"evaluations", r.history.size()},
        };
        json af = json::array();
        for (int i = 0; i < r.alpha.size(); ++i) af.push_back(fmt(r.alpha[i]));
        summary["alpha"] = af;
        if (c.problem == "validation") {
            const ValidationReference ref;
            summary["reference_objective"] = fmt(ref.J_star());
            summary["objective_error"] = fmt(std::abs(r.best_objective - ref.J_star()));
        }
        if (!r.constraint_values.empty()) {
            double worst = r.constraint_values[0];
            for (double g : r.constraint_values) worst = std::min(worst, g);
            summary["min_constraint"] = fmt(worst);
        }
        std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
        std::cout << "optimize: J = " << fmt(r.best_objective) << " after " << r.iterations
                  << " iterations\n";
        return 0;
    }

    if (subcommand == "check-gradient") {
        Eigen::VectorXd alpha;
        if (!c.alpha.empty()) {
            alpha = starting_point(c, *problem);
        } else if (c.problem == "validation") {
            alpha = Eigen::VectorXd::Constant(4, 0.1);
        } else {
            alpha = starting_point(c, *problem);
        }
        const FdCheckResult r = fd_gradient_check(*problem, alpha, c.fd_h, c.frozen_basis, dc);
        std::ofstream tab(dir / "gradient_check.txt");
        tab << "component\tadjoint\tfinite_difference\trelative_error\n";
        double worst = 0.0;
        for (int j = 0; j < r.adjoint_grad.size(); ++j) {
            tab << j << "\t" << fmt(r.adjoint_grad[j]) << "\t" << fmt(r.fd_grad[j]) << "\t"
                << fmt(r.rel_error[j]) << "\n";
            if (!r.component_errors[j].empty()) tab << "# component " << j << ": " << r.component_errors[j] << "\n";
            worst = std::max(worst, r.rel_error[j]);
        }
        json summary = {{"objective", fmt(r.objective)}, {"max_relative_error", fmt(worst)}};
        std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
        std::cout << "check-gradient: max relative error " << fmt(worst) << "\n";
        return 0;
    }

    throw std::runtime_error("unknown subcommand '" + subcommand + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"planar isogeometric shape optimization with PDE-based parameterization"};
    app.require_subcommand(1);
    std::string config_path;

    for (const char* name : {"parameterize", "solve", "optimize", "check-gradient"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "JSON configuration file");
    }
    CLI11_PARSE(app, argc, argv);

    try {
        return run(app.get_subcommands().front()->get_name(), config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
