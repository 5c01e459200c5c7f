#include "confor/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "confor/errors.hpp"

namespace confor {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

const char* loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::SE: return "SE";
        case LossKind::AD: return "AD";
        case LossKind::APE: return "APE";
        case LossKind::ZAPE: return "ZAPE";
        case LossKind::WAPE: return "WAPE";
    }
    return "?";
}

Vector LossFamily::resolved_weights(std::size_t n) const {
    if (weights.empty()) return Vector(n, 1.0);
    if (weights.size() != n)
        throw std::invalid_argument("loss weights do not match the number of margins");
    for (double c : weights)
        if (!(c > 0.0)) throw std::invalid_argument("loss weights must be positive");
    return weights;
}

ZeroDecomposition zero_decompose(const MarginalDistribution& margin) {
    if (const auto* zi = std::get_if<ZeroInflatedParams>(&margin.params()))
        return ZeroDecomposition{zi->pi0, *zi->positive};
    if (const auto* emp = std::get_if<EmpiricalParams>(&margin.params())) {
        double pi0 = 0.0;
        Vector values, weights;
        for (std::size_t i = 0; i < emp->values.size(); ++i) {
            if (emp->values[i] < 0.0)
                throw std::invalid_argument("zero_decompose: negative outcome in sample");
            if (emp->values[i] == 0.0) pi0 += emp->weights[i];
            else {
                values.push_back(emp->values[i]);
                weights.push_back(emp->weights[i]);
            }
        }
        if (values.empty())
            throw std::invalid_argument("zero_decompose: sample has no positive values");
        return ZeroDecomposition{pi0,
                                 MarginalDistribution::empirical(std::move(values), std::move(weights))};
    }
    if (!margin.positive_support())
        throw std::invalid_argument("zero_decompose: margin must have nonnegative support");
    return ZeroDecomposition{0.0, margin};
}

LambdaBounds lambda_bounds(const LossFamily& loss,
                           const std::vector<MarginalDistribution>& margins) {
    const Vector c = loss.resolved_weights(margins.size());
    switch (loss.kind) {
        case LossKind::SE:
            return LambdaBounds{-kInf, kInf, false, false};
        case LossKind::AD: {
            const double r = 1.0 / *std::max_element(c.begin(), c.end());
            return LambdaBounds{-r, r, true, false};
        }
        case LossKind::APE: {
            double max_ck = 0.0;
            for (std::size_t i = 0; i < margins.size(); ++i)
                max_ck = std::max(max_ck, c[i] * size_weighted(margins[i]).normalizer);
            return LambdaBounds{-1.0 / max_ck, 1.0 / max_ck, true, false};
        }
        case LossKind::ZAPE: {
            double s = -kInf, r = kInf;
            for (std::size_t i = 0; i < margins.size(); ++i) {
                const auto dec = zero_decompose(margins[i]);
                const double k = size_weighted(dec.positive).normalizer;
                s = std::max(s, ((k + 1.0) * dec.pi0 - 1.0) / (c[i] * k));
                r = std::min(r, ((k - 1.0) * dec.pi0 + 1.0) / (c[i] * k));
            }
            return LambdaBounds{s, r, true, false};
        }
        case LossKind::WAPE:
            throw std::invalid_argument("lambda_bounds: WAPE needs a joint sample, use wape_lambda_bounds");
    }
    throw std::logic_error("unreachable");
}

MinimizerMap MinimizerMap::build(const LossFamily& loss,
                                 const std::vector<MarginalDistribution>& margins) {
    if (margins.empty()) throw std::invalid_argument("MinimizerMap: no margins");
    const Vector c = loss.resolved_weights(margins.size());
    MinimizerMap map;
    map.rules_.reserve(margins.size());
    for (std::size_t i = 0; i < margins.size(); ++i) {
        switch (loss.kind) {
            case LossKind::SE: {
                const auto m = margins[i].mean();
                if (!m)
                    throw undefined_risk_error("SE risk undefined: " + margins[i].describe() +
                                               " has no finite mean");
                map.rules_.push_back(AffineRule{*m, 0.5 * c[i]});
                break;
            }
            case LossKind::AD:
                map.rules_.push_back(QuantileRule{margins[i], 0.5, 0.5 * c[i], false});
                break;
            case LossKind::APE: {
                const auto sw = size_weighted(margins[i]);
                map.rules_.push_back(
                    QuantileRule{sw.dist, 0.5, 0.5 * c[i] * sw.normalizer, false});
                break;
            }
            case LossKind::ZAPE: {
                const auto dec = zero_decompose(margins[i]);
                const auto sw = size_weighted(dec.positive);
                const double k = sw.normalizer;
                const double alpha = 0.5 * (1.0 - k * dec.pi0 / (1.0 - dec.pi0));
                const double beta = 0.5 * k * c[i] / (1.0 - dec.pi0);
                map.rules_.push_back(QuantileRule{sw.dist, alpha, beta, true});
                break;
            }
            case LossKind::WAPE:
                throw std::invalid_argument("MinimizerMap: WAPE needs a joint sample");
        }
    }
    map.finalize_interval();
    return map;
}

MinimizerMap MinimizerMap::build_wape(const Matrix& samples, const LossFamily& loss,
                                      const Vector& sample_weights) {
    const std::size_t n = samples.cols(), rows = samples.rows();
    if (rows == 0 || n == 0) throw std::invalid_argument("build_wape: empty sample");
    const Vector c = loss.resolved_weights(n);
    Vector w = sample_weights;
    if (w.empty()) w.assign(rows, 1.0);
    if (w.size() != rows) throw std::invalid_argument("build_wape: weight/sample size mismatch");

    double wsum = 0.0;
    for (double x : w) wsum += x;
    Vector tilted(rows);
    double tilted_sum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += samples(r, j);
        if (!(total > 0.0))
            throw non_integrable_error("WAPE: sampled total 1'y must be positive");
        tilted[r] = (w[r] / wsum) / total;
        tilted_sum += tilted[r];
    }
    // tilted_sum estimates E[1/(1'y)]; its reciprocal plays the role of the
    // size-weighting normalizer shared across components.
    const double k = 1.0 / tilted_sum;

    MinimizerMap map;
    map.wape_normalizer_ = k;
    map.rules_.reserve(n);
    Vector col(rows);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t r = 0; r < rows; ++r) col[r] = samples(r, j);
        map.rules_.push_back(QuantileRule{MarginalDistribution::empirical(col, tilted), 0.5,
                                          0.5 * c[j] * k, false});
    }
    map.finalize_interval();
    return map;
}

void MinimizerMap::finalize_interval() {
    bool all_affine = true, any_kink = false;
    for (const auto& r : rules_) {
        if (std::holds_alternative<QuantileRule>(r)) all_affine = false;
        if (const auto* q = std::get_if<QuantileRule>(&r); q && q->zero_below_kink)
            any_kink = true;
    }
    if (all_affine) {
        lo_ = -kInf;
        hi_ = kInf;
        lo_closed_ = false;
        return;
    }
    hi_ = kInf;
    for (std::size_t i = 0; i < rules_.size(); ++i) hi_ = std::min(hi_, component_hi(i));
    if (any_kink) {
        // Below the smallest kink every component is pinned at zero and the
        // total stays constant; iterating below that is pointless.
        double floor = kInf;
        for (const auto& r : rules_) {
            const auto& q = std::get<QuantileRule>(r);
            floor = std::min(floor, -q.alpha / q.beta);
        }
        lo_ = floor;
        lo_closed_ = true;
    } else {
        lo_ = -kInf;
        for (std::size_t i = 0; i < rules_.size(); ++i) lo_ = std::max(lo_, component_lo(i));
        lo_closed_ = true;
    }
}

double MinimizerMap::component_lo(std::size_t i) const {
    if (const auto* q = std::get_if<QuantileRule>(&rules_[i]))
        return q->zero_below_kink ? -kInf : -q->alpha / q->beta;
    return -kInf;
}

double MinimizerMap::component_hi(std::size_t i) const {
    if (const auto* q = std::get_if<QuantileRule>(&rules_[i]))
        return (1.0 - q->alpha) / q->beta;
    return kInf;
}

double MinimizerMap::component(std::size_t i, double lambda_eff) const {
    if (const auto* a = std::get_if<AffineRule>(&rules_[i]))
        return a->mean + a->half_weight * lambda_eff;
    const auto& q = std::get<QuantileRule>(rules_[i]);
    const double u = q.alpha + q.beta * lambda_eff;
    if (q.zero_below_kink && u <= 0.0) return 0.0;
    if (u >= 1.0)
        throw infeasible_multiplier_error("multiplier at or above the upper bound");
    if (u <= 0.0) {
        if (u < -1e-12)
            throw infeasible_multiplier_error("multiplier below the lower bound");
        return q.source.support_lower();
    }
    return q.source.quantile(u);
}

double MinimizerMap::component_slope(std::size_t i, double lambda_eff) const {
    if (const auto* a = std::get_if<AffineRule>(&rules_[i])) return a->half_weight;
    const auto& q = std::get<QuantileRule>(rules_[i]);
    const double u = q.alpha + q.beta * lambda_eff;
    if (q.zero_below_kink && u <= 0.0) return 0.0;
    if (!q.source.has_density()) return kNaN;
    if (u <= 0.0 || u >= 1.0) return kNaN;
    const double dens = q.source.pdf(q.source.quantile(u));
    return q.beta / dens;
}

Vector MinimizerMap::evaluate(double lambda) const {
    Vector f(rules_.size());
    for (std::size_t i = 0; i < rules_.size(); ++i) f[i] = component(i, lambda);
    return f;
}

double MinimizerMap::total(double lambda) const {
    double s = 0.0;
    for (std::size_t i = 0; i < rules_.size(); ++i) s += component(i, lambda);
    return s;
}

double MinimizerMap::total_slope(double lambda) const {
    double s = 0.0;
    for (std::size_t i = 0; i < rules_.size(); ++i) s += component_slope(i, lambda);
    return s;
}

bool MinimizerMap::has_analytic_slope() const {
    for (const auto& r : rules_)
        if (const auto* q = std::get_if<QuantileRule>(&r); q && !q->source.has_density())
            return false;
    return true;
}

std::pair<double, double> MinimizerMap::attainable_total() const {
    double low = 0.0, high = 0.0;
    for (const auto& r : rules_) {
        if (std::holds_alternative<AffineRule>(r)) {
            low = -kInf;
            high = kInf;
            continue;
        }
        const auto& q = std::get<QuantileRule>(r);
        if (std::isfinite(low)) {
            if (q.zero_below_kink) {
                // at the map floor every kinked component is exactly zero
            } else {
                const double u = q.alpha + q.beta * lo_;
                low += (u <= 1e-12) ? q.source.support_lower() : q.source.quantile(u);
            }
        }
        if (std::isfinite(high)) {
            const double u = q.alpha + q.beta * hi_;
            if (u >= 1.0 - 1e-12) high += q.source.support_upper();
            else if (u <= 0.0) high += q.zero_below_kink ? 0.0 : q.source.support_lower();
            else high += q.source.quantile(u);
        }
    }
    return {low, high};
}

double MinimizerMap::warm_start(double target_total) const {
    double u_bar = 0.0, alpha_bar = 0.0, beta_bar = 0.0;
    const double y = target_total / static_cast<double>(rules_.size());
    for (const auto& r : rules_) {
        const auto* q = std::get_if<QuantileRule>(&r);
        if (q == nullptr) return 0.0;
        u_bar += q->source.cdf(y);
        alpha_bar += q->alpha;
        beta_bar += q->beta;
    }
    const double n = static_cast<double>(rules_.size());
    u_bar /= n;
    alpha_bar /= n;
    beta_bar /= n;
    double lambda0 = (u_bar - alpha_bar) / beta_bar;
    const double lo = std::isfinite(lo_) ? lo_ : -1e12;
    const double hi = std::isfinite(hi_) ? hi_ : 1e12;
    const double margin = 5e-4 * (hi - lo);
    return std::clamp(lambda0, lo + margin, hi - margin);
}

const MarginalDistribution& MinimizerMap::source(std::size_t i) const {
    const auto* q = std::get_if<QuantileRule>(&rules_[i]);
    if (q == nullptr) throw std::logic_error("source: affine rule has no quantile source");
    return q->source;
}

Vector componentwise_minimizer(const LossFamily& loss,
                               const std::vector<MarginalDistribution>& margins,
                               double lambda) {
    if (loss.kind == LossKind::WAPE)
        throw std::invalid_argument("componentwise_minimizer: WAPE needs a joint sample");
    if (loss.kind != LossKind::SE && loss.kind != LossKind::ZAPE) {
        const auto bounds = lambda_bounds(loss, margins);
        if (!bounds.contains(lambda))
            throw infeasible_multiplier_error(std::string(loss_kind_name(loss.kind)) +
                                              ": multiplier outside the feasible interval");
    }
    const auto map = MinimizerMap::build(loss, margins);
    if (lambda >= map.lambda_hi())
        throw infeasible_multiplier_error("multiplier at or above the upper bound");
    return map.evaluate(lambda);
}

double expected_absolute_error(const MarginalDistribution& margin, double f) {
    const auto m = margin.mean();
    if (!m)
        throw undefined_risk_error("E|y-f| undefined: " + margin.describe() +
                                   " has no finite mean");
    return f * (2.0 * margin.cdf(f) - 1.0) + *m - 2.0 * partial_expectation(margin, f);
}

double per_component_risk(LossKind kind, const MarginalDistribution& margin, double f,
                          double c, std::span<const double> mc_samples) {
    if (!(c > 0.0)) throw std::invalid_argument("per_component_risk: weight must be positive");
    if (!mc_samples.empty()) {
        double s = 0.0;
        for (double y : mc_samples) {
            switch (kind) {
                case LossKind::SE: s += (y - f) * (y - f) / c; break;
                case LossKind::AD: s += std::abs(y - f) / c; break;
                case LossKind::APE:
                    if (y <= 0.0)
                        throw undefined_risk_error("APE risk: sample contains y <= 0");
                    s += std::abs(y - f) / (y * c);
                    break;
                case LossKind::ZAPE:
                    if (y < 0.0)
                        throw undefined_risk_error("ZAPE risk: sample contains y < 0");
                    s += (y == 0.0) ? f / c : std::abs(y - f) / (y * c);
                    break;
                case LossKind::WAPE:
                    throw std::invalid_argument("per_component_risk: WAPE needs the joint sample");
            }
        }
        return s / static_cast<double>(mc_samples.size());
    }
    switch (kind) {
        case LossKind::SE: {
            const auto m = margin.mean();
            const auto v = margin.variance();
            if (!m || !v)
                throw undefined_risk_error("SE risk undefined: " + margin.describe() +
                                           " has no finite second moment");
            return ((*m - f) * (*m - f) + *v) / c;
        }
        case LossKind::AD:
            return expected_absolute_error(margin, f) / c;
        case LossKind::APE: {
            const auto sw = size_weighted(margin);
            return expected_absolute_error(sw.dist, f) / (c * sw.normalizer);
        }
        case LossKind::ZAPE: {
            const auto dec = zero_decompose(margin);
            const auto sw = size_weighted(dec.positive);
            return (dec.pi0 * f +
                    (1.0 - dec.pi0) * expected_absolute_error(sw.dist, f) / sw.normalizer) /
                   c;
        }
        case LossKind::WAPE:
            throw std::invalid_argument("per_component_risk: WAPE needs the joint sample");
    }
    throw std::logic_error("unreachable");
}

double wape_per_component_risk(const Matrix& samples, std::size_t i, double f, double c,
                               const Vector& sample_weights) {
    const std::size_t rows = samples.rows();
    Vector w = sample_weights;
    if (w.empty()) w.assign(rows, 1.0);
    double wsum = 0.0, s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t j = 0; j < samples.cols(); ++j) total += samples(r, j);
        if (!(total > 0.0))
            throw non_integrable_error("WAPE risk: sampled total 1'y must be positive");
        s += w[r] * std::abs(samples(r, i) - f) / total;
        wsum += w[r];
    }
    return s / (wsum * c);
}

Vector wape_minimizer(const Matrix& samples, double lambda, const LossFamily& loss,
                      const Vector& sample_weights) {
    const auto map = MinimizerMap::build_wape(samples, loss, sample_weights);
    if (lambda < map.lambda_lo() || lambda >= map.lambda_hi())
        throw infeasible_multiplier_error("WAPE: multiplier outside the feasible interval");
    return map.evaluate(lambda);
}

LambdaBounds wape_lambda_bounds(const Matrix& samples, const LossFamily& loss,
                                const Vector& sample_weights) {
    const auto map = MinimizerMap::build_wape(samples, loss, sample_weights);
    return LambdaBounds{map.lambda_lo(), map.lambda_hi(), true, false};
}

double pointwise_loss(const LossFamily& loss, std::span<const double> y,
                      std::span<const double> f) {
    if (y.size() != f.size()) throw std::invalid_argument("pointwise_loss: size mismatch");
    const Vector c = loss.resolved_weights(y.size());
    double s = 0.0;
    if (loss.kind == LossKind::WAPE) {
        double total = 0.0;
        for (double yi : y) total += yi;
        if (!(total > 0.0))
            throw non_integrable_error("WAPE loss: total outcome must be positive");
        for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - f[i]) / (c[i] * total);
        return s;
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        switch (loss.kind) {
            case LossKind::SE: s += (y[i] - f[i]) * (y[i] - f[i]) / c[i]; break;
            case LossKind::AD: s += std::abs(y[i] - f[i]) / c[i]; break;
            case LossKind::APE:
                if (y[i] <= 0.0)
                    throw pointwise_loss_error("APE loss undefined at y <= 0", i);
                s += std::abs(y[i] - f[i]) / (y[i] * c[i]);
                break;
            case LossKind::ZAPE:
                if (y[i] < 0.0)
                    throw pointwise_loss_error("ZAPE loss undefined at y < 0", i);
                s += (y[i] == 0.0) ? f[i] / c[i] : std::abs(y[i] - f[i]) / (y[i] * c[i]);
                break;
            case LossKind::WAPE: break;  // handled above
        }
    }
    return s;
}

}  // namespace confor
