// confor: loss-optimal constrained point forecasts and the predictive
// distribution of realized loss around them, driven by JSON scenario files.
//
// Subcommands: solve, loss-dist, sensitivity, abc, condition, sweep.
// Exit codes: 0 success, 2 infeasible constraint, 1 input or runtime error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "confor/analysis.hpp"
#include "confor/conditioning.hpp"
#include "confor/errors.hpp"
#include "confor/io.hpp"
#include "confor/solver.hpp"

namespace fs = std::filesystem;
using confor::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct Scenario {
    json config;          // fully resolved (after --set / --seed)
    fs::path base_dir;    // for relative CSV paths
    std::optional<confor::JointForecast> joint;
    std::vector<confor::MarginalDistribution> margins;
    confor::LossFamily loss;
    confor::SolverOptions solver;
    std::uint64_t seed = 1;
    std::size_t samples = 100000;
};

json parse_scalar(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);  // bare strings stay strings
    }
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("--set expects key=value, got \"" + assignment + "\"");
    const std::string path = assignment.substr(0, eq);
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw std::invalid_argument("--set: empty key in \"" + path + "\"");
        if (dot == std::string::npos) {
            (*node)[key] = parse_scalar(assignment.substr(eq + 1));
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

Scenario load_scenario(const std::string& config_path,
                       const std::vector<std::string>& overrides,
                       std::optional<std::uint64_t> seed_flag) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config: " + config_path);
    Scenario sc;
    try {
        sc.config = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(sc.config, o);
    sc.base_dir = fs::path(config_path).parent_path();

    if (sc.config.contains("joint")) {
        sc.joint = confor::joint_from_json(sc.config["joint"], sc.base_dir);
        sc.margins = sc.joint->margins();
    }
    if (sc.config.contains("margins")) {
        if (sc.joint) throw std::invalid_argument("config: give either \"joint\" or \"margins\"");
        for (const auto& mj : sc.config["margins"])
            sc.margins.push_back(confor::margin_from_json(mj, sc.base_dir));
    }
    if (sc.margins.empty())
        throw std::invalid_argument("config: needs a \"joint\" or \"margins\" entry");

    sc.loss = sc.config.contains("loss") ? confor::loss_from_json(sc.config["loss"])
                                         : confor::LossFamily::ad();
    if (sc.config.contains("solver"))
        sc.solver = confor::solver_options_from_json(sc.config["solver"]);

    if (seed_flag) sc.seed = *seed_flag;
    else if (sc.config.contains("seed")) sc.seed = sc.config["seed"].get<std::uint64_t>();
    else if (const char* env = std::getenv("CONFOR_SEED")) sc.seed = std::strtoull(env, nullptr, 10);
    sc.config["seed"] = sc.seed;

    if (sc.config.contains("samples")) sc.samples = sc.config["samples"].get<std::size_t>();
    return sc;
}

double require_total(const Scenario& sc) {
    if (!sc.config.contains("constraint") || !sc.config["constraint"].contains("total"))
        throw std::invalid_argument("config: needs constraint.total");
    return sc.config["constraint"]["total"].get<double>();
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json result_with_config(const Scenario& sc, json body) {
    body["config"] = sc.config;
    return body;
}

// Plot-ready density lattice for bivariate analytic joints: rows y1,y2,density
// over a quantile-spanned grid, for contour rendering by external tools.
void write_density_grid(const confor::JointForecast& joint, const fs::path& path,
                        int points) {
    const auto* mvln = std::get_if<confor::MvLognormalParams>(&joint.params());
    const auto* mvn = std::get_if<confor::MvNormalParams>(&joint.params());
    const confor::Vector& m = mvln ? mvln->m : mvn->m;
    const confor::Matrix& V = mvln ? mvln->V : mvn->V;
    const double det = V(0, 0) * V(1, 1) - V(0, 1) * V(1, 0);
    if (det <= 0.0) return;  // singular: no two-dimensional density to plot
    const double inv00 = V(1, 1) / det, inv11 = V(0, 0) / det, inv01 = -V(0, 1) / det;
    const double norm = 1.0 / (2.0 * confor::kPi * std::sqrt(det));

    std::ofstream out(path);
    out << "y1,y2,density\n";
    const auto g1 = joint.margin(0), g2 = joint.margin(1);
    const double lo1 = g1.quantile(0.001), hi1 = g1.quantile(0.999);
    const double lo2 = g2.quantile(0.001), hi2 = g2.quantile(0.999);
    for (int i = 0; i < points; ++i) {
        const double y1 = lo1 + (hi1 - lo1) * i / (points - 1);
        for (int j = 0; j < points; ++j) {
            const double y2 = lo2 + (hi2 - lo2) * j / (points - 1);
            const double z1 = (mvln ? std::log(y1) : y1) - m[0];
            const double z2 = (mvln ? std::log(y2) : y2) - m[1];
            double dens = norm * std::exp(-0.5 * (inv00 * z1 * z1 + 2.0 * inv01 * z1 * z2 +
                                                  inv11 * z2 * z2));
            if (mvln) dens /= y1 * y2;
            out << confor::format_double(y1) << "," << confor::format_double(y2) << ","
                << confor::format_double(dens) << "\n";
        }
    }
}

confor::SolveResult run_solve(const Scenario& sc, double F) {
    if (sc.loss.kind == confor::LossKind::WAPE) {
        if (!sc.joint)
            throw std::invalid_argument("WAPE needs an empirical \"joint\" entry");
        return confor::solve_total(sc.loss, *sc.joint, F, sc.solver);
    }
    return confor::solve_total(sc.loss, sc.margins, F, sc.solver);
}

int cmd_solve(const Scenario& sc, const fs::path& out_dir) {
    const auto& cst = sc.config.at("constraint");
    confor::SolveResult res;
    if (cst.contains("A")) {
        confor::Matrix A(sc.margins.size(), cst["A"][0].size());
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) A(i, j) = cst["A"][i][j].get<double>();
        res = confor::solve_linear(sc.loss, sc.margins, A, cst["F"].get<confor::Vector>(),
                                   sc.solver);
    } else {
        res = run_solve(sc, require_total(sc));
    }
    write_json(out_dir / "solve.json", result_with_config(sc, confor::solve_result_to_json(res)));
    if (sc.joint && sc.joint->is_analytic() && sc.joint->dim() == 2)
        write_density_grid(*sc.joint, out_dir / "density_grid.csv",
                           sc.config.value("grid_points", 81));
    if (res.status == confor::SolveStatus::InfeasibleConstraint) {
        std::cerr << "infeasible constraint: " << res.diagnostic << "\n";
        return kExitInfeasible;
    }
    if (!res.converged()) {
        std::cerr << "solve did not converge: " << confor::solve_status_name(res.status) << "\n";
        return kExitError;
    }
    std::cout << "f* = [";
    for (std::size_t i = 0; i < res.f_star.size(); ++i)
        std::cout << (i ? ", " : "") << confor::format_double(res.f_star[i]);
    std::cout << "], residual " << res.residual << "\n";
    return kExitOk;
}

int cmd_loss_dist(const Scenario& sc, const fs::path& out_dir) {
    if (!sc.joint)
        throw std::invalid_argument("loss-dist: needs a \"joint\" entry (sampling)");
    const double F = require_total(sc);
    confor::Vector f;
    if (sc.config.contains("forecast")) {
        f = sc.config["forecast"].get<confor::Vector>();
    } else {
        const auto res = run_solve(sc, F);
        if (res.status == confor::SolveStatus::InfeasibleConstraint) {
            std::cerr << "infeasible constraint: " << res.diagnostic << "\n";
            return kExitInfeasible;
        }
        if (!res.converged()) {
            std::cerr << "solve failed: " << confor::solve_status_name(res.status) << "\n";
            return kExitError;
        }
        f = res.f_star;
    }
    const bool per_dim = sc.config.value("per_dimension", true);
    const bool contrast = sc.config.value("contrast_independent", false);

    json body;
    body["forecast"] = f;
    if (contrast) {
        const auto [with, without] = confor::dependence_contrast(*sc.joint, sc.loss, f,
                                                                 sc.samples, sc.seed, per_dim,
                                                                 true);
        body["loss_distribution"] = confor::summary_to_json(with);
        body["loss_distribution_independent"] = confor::summary_to_json(without);
        confor::write_pairs_csv(out_dir / "loss_samples.csv", "total,loss", with.samples);
        confor::write_pairs_csv(out_dir / "loss_samples_independent.csv", "total,loss",
                                without.samples);
        body["samples_csv"] = "loss_samples.csv";
        body["samples_independent_csv"] = "loss_samples_independent.csv";
    } else {
        const auto sum = confor::loss_distribution(*sc.joint, sc.loss, f, sc.samples, sc.seed,
                                                   per_dim, true);
        body["loss_distribution"] = confor::summary_to_json(sum);
        confor::write_pairs_csv(out_dir / "loss_samples.csv", "total,loss", sum.samples);
        body["samples_csv"] = "loss_samples.csv";
    }
    write_json(out_dir / "lossdist.json", result_with_config(sc, std::move(body)));
    return kExitOk;
}

int cmd_sensitivity(const Scenario& sc, const fs::path& out_dir) {
    const double F = require_total(sc);
    std::vector<double> grid;
    if (sc.config.contains("epsilon_grid"))
        grid = sc.config["epsilon_grid"].get<std::vector<double>>();
    else
        for (int i = -10; i <= 10; ++i) grid.push_back(0.01 * i);

    const auto res = confor::sensitivity(sc.loss, sc.margins, F, grid, sc.solver);
    json pts = json::array();
    std::ofstream env(out_dir / "sensitivity.csv");
    env << "epsilon,F,component,f_exact,f_approx\n";
    for (const auto& p : res.points) {
        pts.push_back({{"epsilon", p.epsilon},
                       {"F", p.F},
                       {"status", confor::solve_status_name(p.status)},
                       {"lambda_exact", p.lambda_exact},
                       {"lambda_approx", p.lambda_approx}});
        for (std::size_t i = 0; i < p.f_approx.size(); ++i) {
            env << confor::format_double(p.epsilon) << "," << confor::format_double(p.F) << ","
                << i << ","
                << (p.f_exact.empty() ? "" : confor::format_double(p.f_exact[i])) << ","
                << confor::format_double(p.f_approx[i]) << "\n";
        }
    }
    json env_json = json::array();
    for (const auto& [lo, hi] : res.envelopes()) env_json.push_back({{"min", lo}, {"max", hi}});
    write_json(out_dir / "sensitivity.json",
               result_with_config(sc, json{{"nominal_F", res.nominal_F},
                                           {"lambda_star", res.lambda_star},
                                           {"qdot", res.qdot},
                                           {"f_star", res.f_star},
                                           {"points", std::move(pts)},
                                           {"envelopes", std::move(env_json)},
                                           {"envelope_csv", "sensitivity.csv"}}));
    return kExitOk;
}

int cmd_abc(const Scenario& sc, const fs::path& out_dir) {
    if (!sc.joint) throw std::invalid_argument("abc: needs a \"joint\" entry");
    const double F = require_total(sc);
    const double tau = sc.config.value("tau_pct", 0.5);
    const auto res = confor::abc_condition(*sc.joint, F, tau, sc.samples, sc.seed);

    std::vector<std::string> names;
    for (std::size_t i = 0; i < sc.joint->dim(); ++i) names.push_back("y" + std::to_string(i + 1));
    confor::write_sample_csv(out_dir / "accepted.csv", names, res.accepted);

    json hists = json::array();
    const int bins = sc.config.value("bins", 64);
    for (std::size_t i = 0; i < sc.joint->dim(); ++i) {
        confor::Vector col(res.accepted.rows());
        for (std::size_t r = 0; r < res.accepted.rows(); ++r) col[r] = res.accepted(r, i);
        const auto h = confor::histogram(col, bins);
        hists.push_back({{"series", names[i]}, {"edges", h.edges}, {"counts", h.counts}});
    }
    write_json(out_dir / "abc.json",
               result_with_config(sc, json{{"acceptance_rate", res.acceptance_rate},
                                           {"tau_pct", res.tau_pct},
                                           {"drawn", res.drawn},
                                           {"accepted_csv", "accepted.csv"},
                                           {"histograms", std::move(hists)}}));
    std::cout << "acceptance rate " << res.acceptance_rate << " at tau " << tau << "%\n";
    return kExitOk;
}

int cmd_condition(const Scenario& sc, const fs::path& out_dir) {
    if (!sc.joint || !std::holds_alternative<confor::MvNormalParams>(sc.joint->params()))
        throw std::invalid_argument("condition: needs a \"joint\" of kind mvnormal");
    const auto& p = std::get<confor::MvNormalParams>(sc.joint->params());
    const double F = require_total(sc);

    json body;
    if (sc.config.contains("dof")) {
        const double dof = sc.config["dof"].get<double>();
        const bool removed = sc.config.value("total_variance_removed", false);
        const auto res = confor::condition_t(dof, p.m, p.V, F,
                                             removed ? confor::TotalVariance::Removed
                                                     : confor::TotalVariance::Added);
        body["kind"] = "t";
        body["dof"] = dof;
        body["scale_factor"] = res.scale_factor;
        body["mean_F"] = res.mean_F;
        json rows = json::array();
        for (std::size_t i = 0; i < res.var_F.rows(); ++i) {
            json r = json::array();
            for (std::size_t j = 0; j < res.var_F.cols(); ++j) r.push_back(res.var_F(i, j));
            rows.push_back(std::move(r));
        }
        body["var_F"] = std::move(rows);
    } else {
        const auto res = confor::condition_normal(p.m, p.V, F);
        body["kind"] = "normal";
        body["scale_factor"] = res.scale_factor;
        body["mean_F"] = res.mean_F;
        json rows = json::array();
        for (std::size_t i = 0; i < res.var_F.rows(); ++i) {
            json r = json::array();
            for (std::size_t j = 0; j < res.var_F.cols(); ++j) r.push_back(res.var_F(i, j));
            rows.push_back(std::move(r));
        }
        body["var_F"] = std::move(rows);
    }
    write_json(out_dir / "condition.json", result_with_config(sc, std::move(body)));
    return kExitOk;
}

int cmd_sweep(const Scenario& sc, const fs::path& out_dir) {
    // Grid of (rho, F) scenarios over a bivariate analytic joint.
    if (!sc.joint || !sc.joint->is_analytic() || sc.joint->dim() != 2)
        throw std::invalid_argument("sweep: needs an analytic bivariate \"joint\"");
    const auto totals = sc.config.at("constraint").at("totals").get<std::vector<double>>();
    const auto rhos = sc.config.value("rhos", std::vector<double>{-0.7, 0.0, 0.7});

    const auto* mvln = std::get_if<confor::MvLognormalParams>(&sc.joint->params());
    const auto* mvn = std::get_if<confor::MvNormalParams>(&sc.joint->params());
    const confor::Vector m = mvln ? mvln->m : mvn->m;
    const confor::Matrix V = mvln ? mvln->V : mvn->V;
    const double off_scale = std::sqrt(V(0, 0) * V(1, 1));

    json table = json::array();
    for (const double rho : rhos) {
        confor::Matrix Vr = V;
        Vr(0, 1) = Vr(1, 0) = off_scale * rho;
        const auto joint = mvln ? confor::JointForecast::mv_lognormal(m, Vr)
                                : confor::JointForecast::mv_normal(m, Vr);
        for (const double F : totals) {
            const auto res = confor::solve_total(sc.loss, sc.margins, F, sc.solver);
            json row{{"rho", rho}, {"F", F}, {"status", confor::solve_status_name(res.status)}};
            if (res.converged()) {
                row["f_star"] = res.f_star;
                row["lambda_star"] = res.lambda_star[0];
                const auto sum = confor::loss_distribution(joint, sc.loss, res.f_star,
                                                           sc.samples, sc.seed, true, false);
                row["loss_distribution"] = confor::summary_to_json(sum);
            }
            table.push_back(std::move(row));
        }
    }
    write_json(out_dir / "sweep.json", result_with_config(sc, json{{"grid", std::move(table)}}));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained point forecasting and loss decision analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed_flag;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "scenario JSON file")->required();
        cmd->add_option("--out", out_dir, "output directory (created if missing)");
        cmd->add_option("--set", overrides, "config override key=value (dotted paths)");
        cmd->add_option("--seed", seed_flag, "override the scenario seed");
    };
    auto* solve = app.add_subcommand("solve", "loss-optimal constrained forecasts");
    auto* lossdist = app.add_subcommand("loss-dist", "distribution of realized loss at f*");
    auto* sens = app.add_subcommand("sensitivity", "perturb F and re-solve, with the first-order shortcut");
    auto* abc = app.add_subcommand("abc", "rejection conditioning on the total");
    auto* cond = app.add_subcommand("condition", "exact normal/T conditioning on the total");
    auto* sweep = app.add_subcommand("sweep", "grid of (rho, F) scenarios");
    for (auto* c : {solve, lossdist, sens, abc, cond, sweep}) add_common(c);

    CLI11_PARSE(app, argc, argv);

    try {
        const Scenario sc = load_scenario(config_path, overrides, seed_flag);
        fs::create_directories(out_dir);
        const fs::path out(out_dir);
        if (solve->parsed()) return cmd_solve(sc, out);
        if (lossdist->parsed()) return cmd_loss_dist(sc, out);
        if (sens->parsed()) return cmd_sensitivity(sc, out);
        if (abc->parsed()) return cmd_abc(sc, out);
        if (cond->parsed()) return cmd_condition(sc, out);
        if (sweep->parsed()) return cmd_sweep(sc, out);
    } catch (const confor::infeasible_multiplier_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
