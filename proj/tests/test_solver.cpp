#include <doctest.h>

#include <cmath>
#include <vector>

#include "confor/errors.hpp"
#include "confor/solver.hpp"
#include "support.hpp"

using namespace confor;

namespace {

const double kLog7 = std::log(7.0);
const double kLog14 = std::log(14.0);

std::vector<MarginalDistribution> bivariate_ln() {
    return {MarginalDistribution::lognormal(kLog7, 0.04),
            MarginalDistribution::lognormal(kLog14, 0.09)};
}

double sum(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

TEST_CASE("exponential AD total solve hits the closed form") {
    const std::vector<MarginalDistribution> margins = {MarginalDistribution::exponential(1.0),
                                                       MarginalDistribution::exponential(0.5)};
    const double F = 4.5, M = 3.0;
    const auto res = solve_total(LossFamily::ad(), margins, F);
    REQUIRE(res.converged());
    CHECK(res.f_star[0] == doctest::Approx(1.0 * F / M).epsilon(1e-10));
    CHECK(res.f_star[1] == doctest::Approx(2.0 * F / M).epsilon(1e-10));
    CHECK(res.lambda_star[0] ==
          doctest::Approx(1.0 - 2.0 * std::exp(-F / M)).epsilon(1e-10));
    CHECK(res.steps_to_residual(F, 1e-8) <= 5);
}

TEST_CASE("SE closed form and forced Newton agree") {
    Rng rng(4);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 2 + rng.next_u64() % 4;
        std::vector<MarginalDistribution> margins;
        Vector c;
        double M = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = -2.0 + 8.0 * rng.next_uniform();
            margins.push_back(MarginalDistribution::normal(m, 0.5 + rng.next_uniform()));
            c.push_back(0.5 + 2.0 * rng.next_uniform());
            M += m;
        }
        const double F = M + (-4.0 + 8.0 * rng.next_uniform());
        const auto loss = LossFamily::se(c);
        const auto closed = solve_total(loss, margins, F);
        SolverOptions forced;
        forced.force_newton = true;
        const auto newton = solve_total(loss, margins, F, forced);
        REQUIRE(closed.converged());
        REQUIRE(newton.converged());
        const double scale = std::max(1.0, std::abs(F));
        CHECK(std::abs(closed.lambda_star[0] - newton.lambda_star[0]) < 1e-10 * scale);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(closed.f_star[i] - newton.f_star[i]) < 1e-10 * scale);
    }
}

TEST_CASE("SE with F at the unconstrained sum returns the means") {
    const auto margins = bivariate_ln();
    const double M = std::exp(kLog7 + 0.02) + std::exp(kLog14 + 0.045);
    const auto res = solve_total(LossFamily::se(), margins, M);
    CHECK(res.lambda_star[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(res.f_star[0] == doctest::Approx(std::exp(kLog7 + 0.02)).epsilon(1e-12));
}

TEST_CASE("AD at the sum of medians leaves the medians untouched") {
    const auto res = solve_total(LossFamily::ad(), bivariate_ln(), 21.0);
    REQUIRE(res.converged());
    CHECK(res.lambda_star[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(res.f_star[0] == doctest::Approx(7.0).epsilon(1e-9));
    CHECK(res.f_star[1] == doctest::Approx(14.0).epsilon(1e-9));
}

TEST_CASE("bivariate AD/APE agree with a grid oracle along the constraint line") {
    const auto margins = bivariate_ln();
    const double F = 14.7;
    for (const auto kind : {LossKind::AD, LossKind::APE}) {
        LossFamily loss;
        loss.kind = kind;
        const auto res = solve_total(loss, margins, F);
        REQUIRE(res.converged());
        const auto oracle = testsupport::grid_minimize(
            [&](double f1) {
                return per_component_risk(kind, margins[0], f1) +
                       per_component_risk(kind, margins[1], F - f1);
            },
            0.05, F - 0.05, 100000);
        CHECK(std::abs(res.f_star[0] - oracle.x) <= oracle.step);
    }
}

TEST_CASE("convergence on the lognormal instances takes at most five updates") {
    const auto margins = bivariate_ln();
    for (const double F : {14.7, 21.4, 24.15}) {
        const auto res = solve_total(LossFamily::ad(), margins, F);
        REQUIRE(res.converged());
        CHECK(res.steps_to_residual(F, 1e-8) <= 5);
        CHECK(res.residual <= 1e-8 * std::max(1.0, F));
    }
}

TEST_CASE("total constraint can reverse the APE-below-AD ordering") {
    const auto margins = bivariate_ln();
    const auto ad = solve_total(LossFamily::ad(), margins, 14.7);
    const auto ape = solve_total(LossFamily::ape(), margins, 14.7);
    REQUIRE(ad.converged());
    REQUIRE(ape.converged());
    // unconstrained APE optima sit below the AD medians in both dimensions,
    // yet under the total constraint dimension 1 flips
    CHECK(ape.f_star[0] > ad.f_star[0]);
    CHECK(ape.f_star[1] < ad.f_star[1]);
}

TEST_CASE("constraint satisfied across randomized instances, 100 per family") {
    Rng rng(100);
    for (const auto& loss :
         {LossFamily::ad(), LossFamily::ape(), LossFamily::se(), LossFamily::zape()}) {
        for (int rep = 0; rep < 100; ++rep) {
            const std::size_t n = 2 + rng.next_u64() % 4;
            std::vector<MarginalDistribution> margins;
            for (std::size_t i = 0; i < n; ++i)
                margins.push_back(MarginalDistribution::lognormal(
                    0.5 + 2.0 * rng.next_uniform(), 0.02 + 0.3 * rng.next_uniform()));
            double med = 0.0;
            for (const auto& m : margins) med += m.quantile(0.5);
            const double F = med * (0.55 + 0.9 * rng.next_uniform());
            const auto res = solve_total(loss, margins, F);
            REQUIRE(res.converged());
            CHECK(std::abs(sum(res.f_star) - F) <= 1e-8 * std::max(1.0, std::abs(F)));
        }
    }
}

TEST_CASE("risk at f* beats feasible perturbations along the constraint") {
    const auto margins = bivariate_ln();
    const double F = 14.7;
    const auto res = solve_total(LossFamily::ad(), margins, F);
    REQUIRE(res.converged());
    const auto risk = [&](const Vector& f) {
        return per_component_risk(LossKind::AD, margins[0], f[0]) +
               per_component_risk(LossKind::AD, margins[1], f[1]);
    };
    const double base = risk(res.f_star);
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        const double d = rng.next_uniform() - 0.5;  // direction (d, -d) keeps the sum
        for (const double t : {-0.1, -0.01, 0.01, 0.1}) {
            Vector f = res.f_star;
            f[0] += t * d;
            f[1] -= t * d;
            CHECK(risk(f) >= base - 1e-12);
        }
    }
}

TEST_CASE("infeasible totals are flagged with the attainable range") {
    const auto margins = bivariate_ln();
    const auto res = solve_total(LossFamily::ad(), margins, -3.0);
    CHECK(res.status == SolveStatus::InfeasibleConstraint);
    CHECK(res.diagnostic.find("attainable") != std::string::npos);

    const auto [lo, hi] = attainable_range(LossFamily::ad(), margins);
    CHECK(lo == doctest::Approx(0.0));
    CHECK(std::isinf(hi));

    const auto se_range = attainable_range(LossFamily::se(), margins);
    CHECK(std::isinf(se_range.first));
    CHECK(std::isinf(se_range.second));

    // bounded (empirical) margins: the range is the sum of supports
    const std::vector<MarginalDistribution> emp = {
        MarginalDistribution::empirical({1, 2, 3}), MarginalDistribution::empirical({5, 9})};
    const auto er = attainable_range(LossFamily::ad(), emp);
    CHECK(er.first == 6.0);
    CHECK(er.second == 12.0);
}

TEST_CASE("empirical margins solve through the secant fallback") {
    Rng rng(55);
    std::vector<double> a(400), b(400);
    const auto ln1 = MarginalDistribution::lognormal(kLog7, 0.04);
    const auto ln2 = MarginalDistribution::lognormal(kLog14, 0.09);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = ln1.sample(rng);
        b[i] = ln2.sample(rng);
    }
    const std::vector<MarginalDistribution> margins = {
        MarginalDistribution::empirical(a), MarginalDistribution::empirical(b)};
    const double F = 18.0;
    const auto res = solve_total(LossFamily::ad(), margins, F);
    REQUIRE(res.status != SolveStatus::InfeasibleConstraint);
    // on atoms the total is a step function; the solver lands on the step
    // whose value is the smallest total >= F reachable by the quantile map
    CHECK(std::abs(sum(res.f_star) - F) <= 0.5);
}

TEST_CASE("ZAPE pins heavy zero-mass components at exactly zero") {
    const std::vector<MarginalDistribution> margins = {
        MarginalDistribution::zero_inflated(0.9, MarginalDistribution::lognormal(kLog7, 0.04)),
        MarginalDistribution::lognormal(kLog14, 0.09)};
    const auto res = solve_total(LossFamily::zape(), margins, 10.0);
    REQUIRE(res.converged());
    CHECK(res.f_star[0] == 0.0);
    CHECK(res.f_star[1] == doctest::Approx(10.0).epsilon(1e-8));
}

TEST_CASE("solve_linear with a single total column reduces to solve_total") {
    const auto margins = bivariate_ln();
    Matrix A(2, 1);
    A(0, 0) = A(1, 0) = 1.0;
    for (const auto& loss : {LossFamily::ad(), LossFamily::ape(), LossFamily::se()}) {
        const auto lin = solve_linear(loss, margins, A, {14.7});
        const auto tot = solve_total(loss, margins, 14.7);
        REQUIRE(lin.converged());
        REQUIRE(tot.converged());
        CHECK(std::abs(lin.lambda_star[0] - tot.lambda_star[0]) < 1e-10);
        CHECK(std::abs(lin.f_star[0] - tot.f_star[0]) < 1e-10);
        CHECK(std::abs(lin.f_star[1] - tot.f_star[1]) < 1e-10);
    }
}

TEST_CASE("block-separable constraints decouple into scalar solves") {
    const std::vector<MarginalDistribution> margins = {
        MarginalDistribution::lognormal(kLog7, 0.04),
        MarginalDistribution::lognormal(kLog14, 0.09),
        MarginalDistribution::lognormal(std::log(4.0), 0.06)};
    Matrix A(3, 2);
    A(0, 0) = A(1, 0) = 1.0;  // subtotal over {1,2}
    A(2, 1) = 1.0;            // component {3} on its own
    const Vector F{16.0, 3.4};
    const auto lin = solve_linear(LossFamily::ad(), margins, A, F);
    REQUIRE(lin.converged());
    CHECK(lin.residual < 1e-8);

    const auto part1 = solve_total(
        LossFamily::ad(), {margins[0], margins[1]}, 16.0);
    const auto part2 = solve_total(LossFamily::ad(),
                                   std::vector<MarginalDistribution>{margins[2]}, 3.4);
    REQUIRE(part1.converged());
    REQUIRE(part2.converged());
    CHECK(lin.f_star[0] == doctest::Approx(part1.f_star[0]).epsilon(1e-8));
    CHECK(lin.f_star[1] == doctest::Approx(part1.f_star[1]).epsilon(1e-8));
    CHECK(lin.f_star[2] == doctest::Approx(part2.f_star[0]).epsilon(1e-8));
}

TEST_CASE("overlapping constraints match a one-dimensional grid oracle") {
    const std::vector<MarginalDistribution> margins = {
        MarginalDistribution::lognormal(kLog7, 0.04),
        MarginalDistribution::lognormal(kLog14, 0.09),
        MarginalDistribution::lognormal(std::log(4.0), 0.06)};
    Matrix A(3, 2);
    A(0, 0) = A(1, 0) = A(2, 0) = 1.0;  // grand total
    A(0, 1) = 1.0;                      // component 1 pinned
    const double total = 22.0, pinned = 6.5;
    const auto lin = solve_linear(LossFamily::ad(), margins, A, {total, pinned});
    REQUIRE(lin.converged());
    CHECK(lin.f_star[0] == doctest::Approx(pinned).epsilon(1e-8));
    CHECK(lin.f_star[0] + lin.f_star[1] + lin.f_star[2] == doctest::Approx(total).epsilon(1e-7));

    // feasible set is one-dimensional: f2 free, f3 = total - pinned - f2
    const double rest = total - pinned;
    const auto oracle = testsupport::grid_minimize(
        [&](double f2) {
            return per_component_risk(LossKind::AD, margins[1], f2) +
                   per_component_risk(LossKind::AD, margins[2], rest - f2);
        },
        0.05, rest - 0.05, 100000);
    CHECK(std::abs(lin.f_star[1] - oracle.x) <= oracle.step);
}

TEST_CASE("overlapping subtotals with a two-dimensional feasible set match a grid oracle") {
    const std::vector<MarginalDistribution> margins = {
        MarginalDistribution::lognormal(kLog7, 0.04),
        MarginalDistribution::lognormal(kLog14, 0.09),
        MarginalDistribution::lognormal(std::log(4.0), 0.06),
        MarginalDistribution::lognormal(std::log(9.0), 0.05)};
    Matrix A(4, 2);
    A(0, 0) = A(1, 0) = A(2, 0) = 1.0;  // f1 + f2 + f3
    A(1, 1) = A(2, 1) = A(3, 1) = 1.0;  // f2 + f3 + f4
    const double F1 = 23.0, F2 = 25.0;
    const auto res = solve_linear(LossFamily::ad(), margins, A, {F1, F2});
    REQUIRE(res.converged());
    CHECK(res.residual < 1e-8 * F2);

    // feasible set parameterized by (f2, f3): f1 = F1 - f2 - f3, f4 = F2 - f2 - f3
    const auto risk = [&](double f2, double f3) {
        return per_component_risk(LossKind::AD, margins[0], F1 - f2 - f3) +
               per_component_risk(LossKind::AD, margins[1], f2) +
               per_component_risk(LossKind::AD, margins[2], f3) +
               per_component_risk(LossKind::AD, margins[3], F2 - f2 - f3);
    };
    double best2 = 0.0, best3 = 0.0, best = 1e300;
    const double lo2 = 8.0, hi2 = 18.0, lo3 = 1.0, hi3 = 8.0;
    const int grid = 700;
    for (int i = 0; i <= grid; ++i)
        for (int j = 0; j <= grid; ++j) {
            const double f2 = lo2 + (hi2 - lo2) * i / grid;
            const double f3 = lo3 + (hi3 - lo3) * j / grid;
            const double r = risk(f2, f3);
            if (r < best) {
                best = r;
                best2 = f2;
                best3 = f3;
            }
        }
    CHECK(std::abs(res.f_star[1] - best2) <= (hi2 - lo2) / grid);
    CHECK(std::abs(res.f_star[2] - best3) <= (hi3 - lo3) / grid);
    CHECK(risk(res.f_star[1], res.f_star[2]) <= best + 1e-10);
}

TEST_CASE("linear-constraint optimum beats perturbations in the null space of A'") {
    const std::vector<MarginalDistribution> margins = {
        MarginalDistribution::lognormal(kLog7, 0.04),
        MarginalDistribution::lognormal(kLog14, 0.09),
        MarginalDistribution::lognormal(std::log(4.0), 0.06)};
    Matrix A(3, 2);
    A(0, 0) = A(1, 0) = A(2, 0) = 1.0;
    A(0, 1) = 1.0;
    const auto res = solve_linear(LossFamily::ad(), margins, A, {22.0, 6.5});
    REQUIRE(res.converged());
    const auto risk = [&](const Vector& f) {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            s += per_component_risk(LossKind::AD, margins[i], f[i]);
        return s;
    };
    const double base = risk(res.f_star);
    // null(A') is spanned by (0, 1, -1)
    Rng rng(41);
    for (int i = 0; i < 50; ++i) {
        const double d = (rng.next_u64() % 2 ? 1.0 : -1.0) * (0.2 + rng.next_uniform());
        for (const double t : {-0.1, -0.01, 0.01, 0.1}) {
            Vector f = res.f_star;
            f[1] += t * d;
            f[2] -= t * d;
            CHECK(risk(f) >= base - 1e-12);
        }
    }
}

TEST_CASE("rank-deficient constraint matrices are rejected") {
    const auto margins = bivariate_ln();
    Matrix A(2, 2);
    A(0, 0) = 1.0; A(1, 0) = 1.0;
    A(0, 1) = 2.0; A(1, 1) = 2.0;  // second column is a multiple of the first
    CHECK_THROWS_AS((void)solve_linear(LossFamily::ad(), margins, A, {10.0, 20.0}),
                    std::invalid_argument);
}

TEST_CASE("totals at the edges of an atomic range") {
    const std::vector<MarginalDistribution> margins = {
        MarginalDistribution::empirical({1, 2, 3}), MarginalDistribution::empirical({5, 9})};
    // attainable totals are sums of atoms; the extremes are reached exactly
    const auto top = solve_total(LossFamily::ad(), margins, 12.0);
    REQUIRE(top.converged());
    CHECK(top.f_star[0] == 3.0);
    CHECK(top.f_star[1] == 9.0);
    const auto bottom = solve_total(LossFamily::ad(), margins, 6.0);
    REQUIRE(bottom.converged());
    CHECK(bottom.f_star[0] == 1.0);
    CHECK(bottom.f_star[1] == 5.0);
    // a total between two atom sums has no root: the solver reports failure
    // rather than a false fit
    const auto gap = solve_total(LossFamily::ad(), margins, 11.9);
    CHECK(gap.status == SolveStatus::MaxIterations);
    const auto beyond = solve_total(LossFamily::ad(), margins, 12.5);
    CHECK(beyond.status == SolveStatus::InfeasibleConstraint);
}

TEST_CASE("ZAPE can meet a zero total exactly") {
    const std::vector<MarginalDistribution> margins = {
        MarginalDistribution::zero_inflated(0.4, MarginalDistribution::lognormal(kLog7, 0.04)),
        MarginalDistribution::zero_inflated(0.2, MarginalDistribution::lognormal(kLog14, 0.09))};
    const auto res = solve_total(LossFamily::zape(), margins, 0.0);
    REQUIRE(res.converged());
    CHECK(res.f_star[0] == 0.0);
    CHECK(res.f_star[1] == 0.0);
}

TEST_CASE("an explicit lambda0 pins the Newton start point") {
    const auto margins = bivariate_ln();
    SolverOptions opts;
    opts.lambda0 = 0.0;
    const auto res = solve_total(LossFamily::ad(), margins, 14.7, opts);
    REQUIRE(res.converged());
    CHECK(res.iterations.front().lambda[0] == 0.0);
    CHECK(res.iterations.front().value == doctest::Approx(21.0).epsilon(1e-9));
}

TEST_CASE("WAPE solves through the empirical joint overload") {
    Rng rng(321);
    Matrix s(2000, 2);
    const auto ln1 = MarginalDistribution::lognormal(kLog7, 0.04);
    const auto ln2 = MarginalDistribution::lognormal(kLog14, 0.09);
    for (std::size_t r = 0; r < s.rows(); ++r) {
        s(r, 0) = ln1.sample(rng);
        s(r, 1) = ln2.sample(rng);
    }
    const auto joint = JointForecast::empirical(s);
    const double F = 18.5;
    const auto res = solve_total(LossFamily::wape(), joint, F);
    REQUIRE(res.status != SolveStatus::InfeasibleConstraint);
    CHECK(std::abs(sum(res.f_star) - F) <= 0.5);  // atom-limited resolution
    CHECK_THROWS_AS((void)solve_total(LossFamily::wape(), bivariate_ln(), F, {}),
                    std::invalid_argument);
}
