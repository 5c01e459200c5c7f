// Drives the installed CLI end to end. The binary and fixture paths arrive
// through CONFOR_CLI and CONFOR_FIXTURES (set by ctest).

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() {
    const char* p = std::getenv("CONFOR_CLI");
    REQUIRE_MESSAGE(p != nullptr, "CONFOR_CLI not set");
    return p;
}

fs::path fixtures() {
    const char* p = std::getenv("CONFOR_FIXTURES");
    REQUIRE_MESSAGE(p != nullptr, "CONFOR_FIXTURES not set");
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

json load(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE_MESSAGE(in.good(), ("missing output file " + p.string()));
    return json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("confor_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("solve on the packaged low-total scenario") {
    TempDir tmp("solve");
    const auto cfg = fixtures() / "bivariate_F14p7_rho0p7.json";
    CHECK(run("solve " + cfg.string() + " --out " + tmp.path.string()) == 0);
    const auto out = load(tmp.path / "solve.json");
    CHECK(out["status"] == "converged");
    const double f0 = out["f_star"][0].get<double>();
    const double f1 = out["f_star"][1].get<double>();
    CHECK(std::abs(f0 + f1 - 14.7) <= 1e-8);
    // result embeds the fully resolved config
    CHECK(out["config"]["constraint"]["total"] == 14.7);
    CHECK(out["config"]["seed"] == 20260731);
}

TEST_CASE("infeasible totals exit with code 2 and a range diagnostic") {
    TempDir tmp("infeasible");
    const auto cfg = fixtures() / "bivariate_F14p7_rho0p7.json";
    CHECK(run("solve " + cfg.string() + " --set constraint.total=-5 --out " +
              tmp.path.string()) == 2);
    const auto out = load(tmp.path / "solve.json");
    CHECK(out["status"] == "infeasible_constraint");
    CHECK(out["diagnostic"].get<std::string>().find("attainable") != std::string::npos);
}

TEST_CASE("reruns with the same config and seed are byte-identical") {
    TempDir a("rerun_a"), b("rerun_b");
    const auto cfg = fixtures() / "bivariate_F14p7_rho0p7.json";
    const std::string args = " --set samples=50000 ";
    CHECK(run("loss-dist " + cfg.string() + args + "--out " + a.path.string()) == 0);
    CHECK(run("loss-dist " + cfg.string() + args + "--out " + b.path.string()) == 0);
    CHECK(slurp(a.path / "lossdist.json") == slurp(b.path / "lossdist.json"));
    CHECK(slurp(a.path / "loss_samples.csv") == slurp(b.path / "loss_samples.csv"));
    CHECK(!slurp(a.path / "loss_samples.csv").empty());
}

TEST_CASE("abc subcommand writes rate, histograms and accepted sample") {
    TempDir tmp("abc");
    const auto cfg = fixtures() / "bivariate_F14p7_rho0p7.json";
    CHECK(run("abc " + cfg.string() + " --set samples=200000 --out " + tmp.path.string()) == 0);
    const auto out = load(tmp.path / "abc.json");
    const double rate = out["acceptance_rate"].get<double>();
    CHECK(rate > 0.001);
    CHECK(rate < 0.03);
    CHECK(out["tau_pct"] == 0.5);
    CHECK(out["accepted_csv"] == "accepted.csv");
    CHECK(fs::exists(tmp.path / "accepted.csv"));
    CHECK(out["histograms"].size() == 2);
}

TEST_CASE("sensitivity subcommand emits the envelope table") {
    TempDir tmp("sens");
    const auto cfg = fixtures() / "bivariate_F14p7_rho0p0.json";
    CHECK(run("sensitivity " + cfg.string() + " --out " + tmp.path.string()) == 0);
    const auto out = load(tmp.path / "sensitivity.json");
    CHECK(out["points"].size() == 21);
    const auto csv = slurp(tmp.path / "sensitivity.csv");
    CHECK(csv.rfind("epsilon,F,component,f_exact,f_approx", 0) == 0);
}

TEST_CASE("condition subcommand handles normal and T") {
    TempDir tmp("cond");
    const auto cfg_path = tmp.path / "cond.json";
    {
        std::ofstream f(cfg_path);
        f << R"({"joint":{"kind":"mvnormal","m":[1.0,2.0],"V":[[1.0,0.2],[0.2,1.5]]},
                 "constraint":{"total":4.0},"seed":1})";
    }
    CHECK(run("condition " + cfg_path.string() + " --out " + tmp.path.string()) == 0);
    auto out = load(tmp.path / "condition.json");
    CHECK(out["kind"] == "normal");
    const double m0 = out["mean_F"][0].get<double>();
    const double m1 = out["mean_F"][1].get<double>();
    CHECK(std::abs(m0 + m1 - 4.0) < 1e-12);

    CHECK(run("condition " + cfg_path.string() + " --set dof=5 --out " + tmp.path.string()) == 0);
    out = load(tmp.path / "condition.json");
    CHECK(out["kind"] == "t");
    CHECK(out["scale_factor"].get<double>() > 0.0);
}

TEST_CASE("sweep covers the (rho, F) grid") {
    TempDir tmp("sweep");
    const auto cfg = fixtures() / "bivariate_sweep.json";
    CHECK(run("sweep " + cfg.string() + " --set samples=20000 --out " + tmp.path.string()) == 0);
    const auto out = load(tmp.path / "sweep.json");
    CHECK(out["grid"].size() == 9);
    for (const auto& row : out["grid"]) {
        CHECK(row["status"] == "converged");
        CHECK(row.contains("loss_distribution"));
    }
}

TEST_CASE("CONFOR_SEED provides the default seed") {
    TempDir tmp("envseed");
    const auto cfg_path = tmp.path / "noseed.json";
    {
        std::ofstream f(cfg_path);
        f << R"({"joint":{"kind":"mvlognormal","m":[1.9459101090932196,2.6390573296152584],
                 "V":[[0.04,0.042],[0.042,0.09]]},
                 "loss":{"loss":"AD"},"constraint":{"total":14.7}})";
    }
    const std::string cmd = "CONFOR_SEED=4242 " + cli() + " solve " + cfg_path.string() +
                            " --out " + tmp.path.string() + " >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    const auto out = load(tmp.path / "solve.json");
    CHECK(out["config"]["seed"] == 4242);
}

TEST_CASE("solve emits a density lattice for bivariate analytic joints") {
    TempDir tmp("grid");
    const auto cfg = fixtures() / "bivariate_F14p7_rho0p7.json";
    CHECK(run("solve " + cfg.string() + " --out " + tmp.path.string()) == 0);
    const auto csv = slurp(tmp.path / "density_grid.csv");
    CHECK(csv.rfind("y1,y2,density", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 81 * 81 + 1);
}

TEST_CASE("solve accepts linear constraint systems") {
    TempDir tmp("linear");
    const auto cfg_path = tmp.path / "linear.json";
    {
        std::ofstream f(cfg_path);
        // grand total 22 with component 1 pinned at 6.5
        f << R"({"margins":[{"kind":"lognormal","m":1.9459101090932196,"v":0.04},
                            {"kind":"lognormal","m":2.6390573296152584,"v":0.09},
                            {"kind":"lognormal","m":1.3862943611198906,"v":0.06}],
                 "loss":{"loss":"AD"},
                 "constraint":{"A":[[1,1],[1,0],[1,0]],"F":[22.0,6.5]},
                 "seed":1})";
    }
    CHECK(run("solve " + cfg_path.string() + " --out " + tmp.path.string()) == 0);
    const auto out = load(tmp.path / "solve.json");
    CHECK(out["status"] == "converged");
    const double f0 = out["f_star"][0].get<double>();
    const double f1 = out["f_star"][1].get<double>();
    const double f2 = out["f_star"][2].get<double>();
    CHECK(std::abs(f0 - 6.5) < 1e-7);
    CHECK(std::abs(f0 + f1 + f2 - 22.0) < 1e-7);
    CHECK(out["lambda_star"].is_array());
}

TEST_CASE("bad config files exit with code 1") {
    TempDir tmp("bad");
    const auto cfg_path = tmp.path / "broken.json";
    {
        std::ofstream f(cfg_path);
        f << "{ not json";
    }
    CHECK(run("solve " + cfg_path.string() + " --out " + tmp.path.string()) == 1);
    CHECK(run("solve /nonexistent/nope.json --out " + tmp.path.string()) == 1);
}
