#include "confor/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "confor/errors.hpp"

namespace confor {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string range_text(double lo, double hi) {
    std::ostringstream os;
    os << "attainable total range (" << lo << ", " << hi << ")";
    return os.str();
}

double secant_step(const MinimizerMap& map, double lambda) {
    const double lo = map.lambda_lo(), hi = map.lambda_hi();
    if (std::isfinite(lo) && std::isfinite(hi)) return 1e-4 * 0.5 * (hi - lo);
    return 1e-4 * std::max(1.0, std::abs(lambda));
}

// q'(lambda), analytic when every source has a density, otherwise a central
// difference on the running total.
double total_slope_or_secant(const MinimizerMap& map, double lambda) {
    if (map.has_analytic_slope()) {
        const double s = map.total_slope(lambda);
        if (std::isfinite(s)) return s;
    }
    double d = secant_step(map, lambda);
    double a = lambda - d, b = lambda + d;
    if (a <= map.lambda_lo()) a = lambda;
    if (b >= map.lambda_hi()) b = lambda;
    if (a == b) return std::numeric_limits<double>::quiet_NaN();
    return (map.total(b) - map.total(a)) / (b - a);
}

SolveResult solve_scalar(const MinimizerMap& map, double F, double lambda_init,
                         const SolverOptions& opts) {
    SolveResult res;
    const double lo = map.lambda_lo(), hi = map.lambda_hi();
    const auto [low, high] = map.attainable_total();
    const double ftol = opts.tol * std::max(1.0, std::abs(F));

    const double slack = 1e-12 * std::max(1.0, std::abs(F));
    if (F < low - slack || F > high + slack) {
        res.status = SolveStatus::InfeasibleConstraint;
        res.diagnostic = "F=" + std::to_string(F) + " outside the " + range_text(low, high) +
                         (F < low ? "; lower multiplier bound binds" : "; upper multiplier bound binds");
        res.lambda_star = {F < low ? lo : hi};
        res.residual = std::abs((F < low ? low : high) - F);
        return res;
    }
    if (F <= low && map.lambda_lo_closed() && std::isfinite(lo)) {
        res.lambda_star = {lo};
        res.f_star = map.evaluate(lo);
        double s = 0.0;
        for (double x : res.f_star) s += x;
        res.residual = std::abs(s - F);
        res.qdot = total_slope_or_secant(map, lo);
        res.iterations.push_back({{lo}, s});
        res.status = res.residual <= ftol ? SolveStatus::Converged : SolveStatus::HitLowerBound;
        return res;
    }

    double lam = lambda_init;
    if (std::isfinite(lo) && std::isfinite(hi))
        lam = std::clamp(lam, lo + 1e-9 * (hi - lo), hi - 1e-9 * (hi - lo));
    double Ft = map.total(lam);
    res.iterations.push_back({{lam}, Ft});

    // Monotone total, so every evaluation tightens a bracket around the root.
    // Bisection only kicks in once both bracket sides come from actual
    // evaluations; until then the plain Newton path runs untouched.
    double br_lo = lo, br_hi = hi;
    bool br_lo_seen = false, br_hi_seen = false;
    const auto note_bracket = [&](double l, double total) {
        if (total < F) { br_lo = l; br_lo_seen = true; }
        else { br_hi = l; br_hi_seen = true; }
    };
    note_bracket(lam, Ft);

    int near_bound_streak = 0;
    double last_bound = 0.0;
    double dx_old = (std::isfinite(lo) && std::isfinite(hi)) ? hi - lo : 1e30;
    for (int t = 1; t <= opts.max_iter; ++t) {
        const double q = Ft - F;
        const double qd = total_slope_or_secant(map, lam);
        double next = lam - q / qd;
        const bool newton_ok = std::isfinite(next) && qd > 0.0;
        const bool bracketed = br_lo_seen && br_hi_seen && br_hi > br_lo;
        // Newton must keep pace with interval halving (steps near a jump of
        // an atomic margin stagnate otherwise); fall back to bisection when
        // it cannot.
        const bool progressing = std::abs(2.0 * q) <= std::abs(dx_old * qd);
        if (!newton_ok || (bracketed && (next <= br_lo || next >= br_hi || !progressing))) {
            if (bracketed) next = 0.5 * (br_lo + br_hi);
            else if (!newton_ok)
                next = lam + (q < 0.0 ? 1.0 : -1.0) * std::max(1.0, std::abs(lam));
        }
        // Keep iterates strictly inside the multiplier interval, shrinking
        // toward the violated bound by halves.
        for (int g = 0; g < 200 && next <= lo && !(map.lambda_lo_closed() && next == lo); ++g)
            next = 0.5 * (lam + lo);
        for (int g = 0; g < 200 && next >= hi; ++g) next = 0.5 * (lam + hi);
        if (next >= hi || (next < lo)) next = lam;  // cannot move closer in floating point

        const double step = std::abs(next - lam);
        dx_old = step;
        lam = next;
        Ft = map.total(lam);
        res.iterations.push_back({{lam}, Ft});
        note_bracket(lam, Ft);

        if (std::abs(Ft - F) <= ftol && step <= opts.lambda_tol) {
            res.status = SolveStatus::Converged;
            break;
        }

        const bool near_lo = std::isfinite(lo) && std::abs(lam - lo) < 1e-12;
        const bool near_hi = std::isfinite(hi) && std::abs(lam - hi) < 1e-12;
        if (near_lo || near_hi) {
            const double bound = near_lo ? lo : hi;
            near_bound_streak = (near_bound_streak > 0 && bound == last_bound)
                                    ? near_bound_streak + 1 : 1;
            last_bound = bound;
            if (near_bound_streak >= 2) {
                res.status = near_lo ? SolveStatus::HitLowerBound : SolveStatus::HitUpperBound;
                res.diagnostic = "multiplier pinned at a bound; F is at the edge of the " +
                                 range_text(low, high);
                break;
            }
        } else {
            near_bound_streak = 0;
        }
        if (t == opts.max_iter) res.status = SolveStatus::MaxIterations;
    }

    res.lambda_star = {lam};
    res.f_star = map.evaluate(lam);
    double s = 0.0;
    for (double x : res.f_star) s += x;
    res.residual = std::abs(s - F);
    res.qdot = total_slope_or_secant(map, lam);
    return res;
}

double initial_lambda(const LossFamily& loss,
                      const std::vector<MarginalDistribution>& margins,
                      const MinimizerMap& map, double F, const SolverOptions& opts) {
    if (opts.lambda0) return *opts.lambda0;
    if (loss.kind == LossKind::SE) return 0.0;
    if (loss.kind == LossKind::ZAPE) {
        const auto printed = lambda_bounds(loss, margins);
        if (printed.lower < printed.upper && printed.contains(0.0)) return 0.0;
        if (printed.lower < printed.upper) return 0.5 * (printed.lower + printed.upper);
        return 0.5 * (map.lambda_lo() + map.lambda_hi());
    }
    return map.warm_start(F);
}

}  // namespace

const char* solve_status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::HitLowerBound: return "hit_lower_bound";
        case SolveStatus::HitUpperBound: return "hit_upper_bound";
        case SolveStatus::MaxIterations: return "max_iterations";
        case SolveStatus::InfeasibleConstraint: return "infeasible_constraint";
    }
    return "?";
}

std::size_t SolveResult::steps_to_residual(double F, double tol) const {
    const double ftol = tol * std::max(1.0, std::abs(F));
    for (std::size_t i = 0; i < iterations.size(); ++i)
        if (std::abs(iterations[i].value - F) <= ftol) return i;
    return static_cast<std::size_t>(-1);
}

SolveResult solve_total(const LossFamily& loss,
                        const std::vector<MarginalDistribution>& margins, double F,
                        const SolverOptions& opts) {
    if (loss.kind == LossKind::WAPE)
        throw std::invalid_argument("solve_total: WAPE requires an empirical joint forecast");
    const Vector c = loss.resolved_weights(margins.size());

    if (loss.kind == LossKind::SE && !opts.force_newton) {
        // Exact: f_i = m_i + (F - M) c_i / C, lambda = 2 (F - M) / C.
        double M = 0.0, C = 0.0;
        Vector means(margins.size());
        for (std::size_t i = 0; i < margins.size(); ++i) {
            const auto m = margins[i].mean();
            if (!m)
                throw undefined_risk_error("SE risk undefined: " + margins[i].describe() +
                                           " has no finite mean");
            means[i] = *m;
            M += *m;
            C += c[i];
        }
        SolveResult res;
        res.lambda_star = {2.0 * (F - M) / C};
        res.f_star.resize(margins.size());
        double s = 0.0;
        for (std::size_t i = 0; i < margins.size(); ++i) {
            res.f_star[i] = means[i] + (F - M) * c[i] / C;
            s += res.f_star[i];
        }
        res.residual = std::abs(s - F);
        res.qdot = 0.5 * C;
        res.iterations.push_back({res.lambda_star, s});
        res.status = SolveStatus::Converged;
        return res;
    }

    const auto map = MinimizerMap::build(loss, margins);
    return solve_scalar(map, F, initial_lambda(loss, margins, map, F, opts), opts);
}

SolveResult solve_total(const LossFamily& loss, const JointForecast& joint, double F,
                        const SolverOptions& opts) {
    if (loss.kind == LossKind::WAPE) {
        const auto* emp = std::get_if<EmpiricalMatrixParams>(&joint.params());
        if (emp == nullptr)
            throw std::invalid_argument("WAPE needs an empirical joint (sampled totals)");
        const auto map = MinimizerMap::build_wape(emp->samples, loss, emp->weights);
        return solve_scalar(map, F, opts.lambda0 ? *opts.lambda0 : map.warm_start(F), opts);
    }
    return solve_total(loss, joint.margins(), F, opts);
}

SolveResult solve_linear(const LossFamily& loss,
                         const std::vector<MarginalDistribution>& margins,
                         const Matrix& A, const Vector& F, const SolverOptions& opts) {
    const std::size_t n = margins.size(), k = A.cols();
    if (A.rows() != n) throw std::invalid_argument("solve_linear: A must have n rows");
    if (k == 0 || k > n) throw std::invalid_argument("solve_linear: need 0 < k <= n constraints");
    if (F.size() != k) throw std::invalid_argument("solve_linear: F must have k entries");
    if (psd_rank(matmul_at_b(A, A)) != k)
        throw std::invalid_argument("solve_linear: A must have full column rank");
    if (loss.kind == LossKind::WAPE)
        throw std::invalid_argument("solve_linear: WAPE is not supported here");

    const auto map = MinimizerMap::build(loss, margins);
    double fnorm = 1.0;
    for (double x : F) fnorm = std::max(fnorm, std::abs(x));
    const double ftol = opts.tol * fnorm;

    Vector lam(k, 0.0);
    if (opts.lambda0) lam.assign(k, *opts.lambda0);

    const auto effective_ok = [&](const Vector& l) {
        const Vector eff = matvec(A, l);
        for (std::size_t i = 0; i < n; ++i) {
            if (eff[i] >= map.component_hi(i)) return false;
            if (eff[i] < map.component_lo(i)) return false;
        }
        return true;
    };
    if (!effective_ok(lam))
        throw infeasible_multiplier_error("solve_linear: initial multiplier infeasible");

    const auto forecast_at = [&](const Vector& l) {
        const Vector eff = matvec(A, l);
        Vector f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = map.component(i, eff[i]);
        return f;
    };
    const auto residual_of = [&](const Vector& f) {
        Vector q = matvec_transposed(A, f);
        double norm = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            q[j] -= F[j];
            norm = std::max(norm, std::abs(q[j]));
        }
        return std::make_pair(q, norm);
    };

    SolveResult res;
    Vector f = forecast_at(lam);
    auto [q, qnorm] = residual_of(f);
    res.iterations.push_back({lam, qnorm});
    res.status = SolveStatus::MaxIterations;

    double last_step = kInf;
    for (int t = 1; t <= opts.max_iter; ++t) {
        if (qnorm <= ftol && last_step <= opts.lambda_tol) {
            res.status = SolveStatus::Converged;
            break;
        }
        // q'(lambda) = A' Q A with Q the diagonal of componentwise
        // sensitivities at the effective multipliers.
        const Vector eff = matvec(A, lam);
        Matrix Q(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            double sl = map.component_slope(i, eff[i]);
            if (!std::isfinite(sl)) {
                const double d = 1e-4 * std::max(1.0, std::abs(eff[i]));
                const double a = std::max(eff[i] - d, map.component_lo(i));
                const double b = std::min(eff[i] + d, map.component_hi(i) - 1e-12);
                sl = (b > a) ? (map.component(i, b) - map.component(i, a)) / (b - a) : 0.0;
            }
            Q(i, i) = sl;
        }
        Matrix J = matmul_at_b(A, matmul(Q, A));
        Vector delta;
        double damping = 0.0;
        for (int attempt = 0; attempt < 6; ++attempt) {
            try {
                Matrix Jd = J;
                for (std::size_t j = 0; j < k; ++j) Jd(j, j) += damping;
                delta = solve_dense(Jd, q);
                break;
            } catch (const std::domain_error&) {
                double scale = 0.0;
                for (std::size_t j = 0; j < k; ++j) scale = std::max(scale, std::abs(J(j, j)));
                damping = (damping == 0.0) ? 1e-8 * std::max(scale, 1.0) : damping * 100.0;
            }
        }
        if (delta.empty()) {
            res.diagnostic = "persistently singular q'(lambda)";
            break;
        }

        double s = 1.0;
        Vector lam_new(k);
        bool moved = false;
        for (int back = 0; back < 60; ++back) {
            for (std::size_t j = 0; j < k; ++j) lam_new[j] = lam[j] - s * delta[j];
            if (effective_ok(lam_new)) {
                const auto [q_new, qnorm_new] = residual_of(forecast_at(lam_new));
                if (qnorm_new < qnorm || s < 1e-8) {
                    moved = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if (!moved) lam_new = lam;  // no feasible descent step at this iterate
        last_step = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            last_step = std::max(last_step, std::abs(lam_new[j] - lam[j]));
        lam = lam_new;
        f = forecast_at(lam);
        std::tie(q, qnorm) = residual_of(f);
        res.iterations.push_back({lam, qnorm});
    }
    if (res.status != SolveStatus::Converged && qnorm <= ftol)
        res.status = SolveStatus::Converged;

    res.lambda_star = lam;
    res.f_star = f;
    res.residual = qnorm;
    if (res.status == SolveStatus::MaxIterations && res.diagnostic.empty())
        res.diagnostic = "no convergence within max_iter";
    return res;
}

std::pair<double, double> attainable_range(const LossFamily& loss,
                                           const std::vector<MarginalDistribution>& margins) {
    if (loss.kind == LossKind::WAPE)
        throw std::invalid_argument("attainable_range: WAPE needs a joint sample");
    return MinimizerMap::build(loss, margins).attainable_total();
}

}  // namespace confor
