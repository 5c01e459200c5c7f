#include "confor/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "confor/errors.hpp"

namespace confor {

namespace {

// Smallest sample value whose cumulative share reaches u (sorted input).
double sorted_quantile(const Vector& sorted, double u) {
    const auto n = static_cast<double>(sorted.size());
    auto idx = static_cast<std::size_t>(std::ceil(u * n));
    idx = (idx == 0) ? 0 : idx - 1;
    return sorted[std::min(idx, sorted.size() - 1)];
}

LossDistributionSummary summarize(Vector&& totals, Vector&& losses, bool per_dimension,
                                  bool keep_samples) {
    LossDistributionSummary s;
    s.per_dimension = per_dimension;
    s.count = losses.size();
    double sum = 0.0, sq = 0.0;
    for (double l : losses) {
        sum += l;
        sq += l * l;
    }
    const auto n = static_cast<double>(losses.size());
    s.mean = sum / n;
    const double var = std::max(0.0, sq / n - s.mean * s.mean);
    s.std_error = std::sqrt(var / n);
    if (keep_samples) {
        s.samples.reserve(losses.size());
        for (std::size_t i = 0; i < losses.size(); ++i)
            s.samples.emplace_back(totals[i], losses[i]);
    }
    Vector sorted = std::move(losses);
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();
    s.median = sorted_quantile(sorted, 0.5);
    s.q05 = sorted_quantile(sorted, 0.05);
    s.q95 = sorted_quantile(sorted, 0.95);
    return s;
}

}  // namespace

LossDistributionSummary loss_distribution(const JointForecast& joint, const LossFamily& loss,
                                          const Vector& f, std::size_t n_samples,
                                          std::uint64_t seed, bool per_dimension,
                                          bool keep_samples) {
    if (f.size() != joint.dim())
        throw std::invalid_argument("loss_distribution: forecast dimension mismatch");
    if (n_samples == 0) throw std::invalid_argument("loss_distribution: need samples");
    loss.resolved_weights(joint.dim());

    const double scale = per_dimension ? 1.0 / static_cast<double>(joint.dim()) : 1.0;
    Vector totals, losses;
    totals.reserve(n_samples);
    losses.reserve(n_samples);
    joint.sample_rows(n_samples, seed, [&](const std::vector<double>& row) {
        double total = 0.0;
        for (double x : row) total += x;
        totals.push_back(total);
        losses.push_back(scale * pointwise_loss(loss, row, f));
    });
    return summarize(std::move(totals), std::move(losses), per_dimension, keep_samples);
}

std::pair<LossDistributionSummary, LossDistributionSummary> dependence_contrast(
    const JointForecast& joint, const LossFamily& loss, const Vector& f,
    std::size_t n_samples, std::uint64_t seed, bool per_dimension, bool keep_samples) {
    if (!joint.is_analytic())
        throw std::invalid_argument(
            "dependence_contrast: empirical joints have no parametric independent form");
    // Both joints consume identical normal draws per row, so the same seed
    // yields common random numbers across the two scenarios.
    auto with = loss_distribution(joint, loss, f, n_samples, seed, per_dimension, keep_samples);
    auto without = loss_distribution(joint.independent_version(), loss, f, n_samples, seed,
                                     per_dimension, keep_samples);
    return {std::move(with), std::move(without)};
}

std::vector<std::pair<double, double>> SensitivityResult::envelopes() const {
    std::vector<std::pair<double, double>> env(f_star.size(),
                                               {std::numeric_limits<double>::infinity(),
                                                -std::numeric_limits<double>::infinity()});
    for (const auto& p : points) {
        if (p.status != SolveStatus::Converged) continue;
        for (std::size_t i = 0; i < p.f_exact.size(); ++i) {
            env[i].first = std::min(env[i].first, p.f_exact[i]);
            env[i].second = std::max(env[i].second, p.f_exact[i]);
        }
    }
    return env;
}

SensitivityResult sensitivity(const LossFamily& loss,
                              const std::vector<MarginalDistribution>& margins,
                              double nominal_F, std::span<const double> epsilon_grid,
                              const SolverOptions& opts) {
    const auto base = solve_total(loss, margins, nominal_F, opts);
    if (!base.converged())
        throw std::runtime_error(std::string("sensitivity: nominal solve did not converge (") +
                                 solve_status_name(base.status) + ")");
    SensitivityResult out;
    out.nominal_F = nominal_F;
    out.lambda_star = base.lambda_star[0];
    out.qdot = base.qdot;
    out.f_star = base.f_star;

    const bool se = loss.kind == LossKind::SE;
    MinimizerMap map = MinimizerMap::build(loss, margins);
    const double lo = map.lambda_lo(), hi = map.lambda_hi();

    for (double eps : epsilon_grid) {
        SensitivityPoint p;
        p.epsilon = eps;
        p.F = nominal_F * (1.0 + eps);
        const auto exact = solve_total(loss, margins, p.F, opts);
        p.status = exact.status;
        if (exact.converged()) {
            p.lambda_exact = exact.lambda_star[0];
            p.f_exact = exact.f_star;
        }
        // first-order shortcut; with a degenerate slope (atomic margins give
        // q' = 0 almost everywhere) fall back to the nominal multiplier
        double shift = 0.0;
        if (eps != 0.0 && std::isfinite(out.qdot) && out.qdot > 0.0)
            shift = eps * nominal_F / out.qdot;
        p.lambda_approx = out.lambda_star + shift;
        double clamped = p.lambda_approx;
        if (!se) {
            const double w = (std::isfinite(lo) && std::isfinite(hi)) ? hi - lo : 1.0;
            clamped = std::clamp(clamped, std::isfinite(lo) ? lo : clamped,
                                 std::isfinite(hi) ? hi - 1e-9 * w : clamped);
        }
        p.f_approx = map.evaluate(clamped);
        out.points.push_back(std::move(p));
    }
    return out;
}

}  // namespace confor
