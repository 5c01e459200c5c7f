#ifndef CONFOR_LOSSES_HPP
#define CONFOR_LOSSES_HPP

#include <span>
#include <variant>
#include <vector>

#include "confor/distributions.hpp"
#include "confor/linalg.hpp"

namespace confor {

enum class LossKind { SE, AD, APE, ZAPE, WAPE };

const char* loss_kind_name(LossKind k);

// Loss family with per-dimension weights c_i > 0 (empty == all ones).
// SE:   (y-f)^2 / c
// AD:   |y-f| / c
// APE:  |y-f| / (y c),        support y > 0
// ZAPE: (f/c) 1{y=0} + |y-f|/(y c) 1{y>0},  allows point mass at zero
// WAPE: sum_i |y_i-f_i| / (c_i 1'y), separable across i for optimization
struct LossFamily {
    LossKind kind = LossKind::AD;
    Vector weights;  // c_i; empty means all ones

    static LossFamily se(Vector c = {}) { return {LossKind::SE, std::move(c)}; }
    static LossFamily ad(Vector c = {}) { return {LossKind::AD, std::move(c)}; }
    static LossFamily ape(Vector c = {}) { return {LossKind::APE, std::move(c)}; }
    static LossFamily zape(Vector c = {}) { return {LossKind::ZAPE, std::move(c)}; }
    static LossFamily wape(Vector c = {}) { return {LossKind::WAPE, std::move(c)}; }

    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
    Vector resolved_weights(std::size_t n) const;
};

struct LambdaBounds {
    double lower, upper;
    bool lower_closed, upper_closed;
    bool contains(double lambda) const {
        return (lower_closed ? lambda >= lower : lambda > lower) &&
               (upper_closed ? lambda <= upper : lambda < upper);
    }
};

// Feasible multiplier interval as printed for the family: SE (-inf,inf);
// AD [-r,r) with r = 1/max c_i; APE the same with c_i k_i; ZAPE [s,r).
// The ZAPE interval can be empty when zero masses are very uneven; the
// componentwise map below stays valid for every lambda < upper regardless.
LambdaBounds lambda_bounds(const LossFamily& loss,
                           const std::vector<MarginalDistribution>& margins);

// The lambda-indexed componentwise minimizer map: component i of f(lambda)
// minimizes R_i(f) - lambda * f. Built once per (loss, margins) pair and
// queried by the solver, including with per-component effective multipliers
// in the multi-constraint case.
class MinimizerMap {
public:
    static MinimizerMap build(const LossFamily& loss,
                              const std::vector<MarginalDistribution>& margins);
    // WAPE: per-component quantile maps of the joint sample reweighted by
    // one over the sampled total, with the common normalizer folded into the
    // effective weights.
    static MinimizerMap build_wape(const Matrix& samples, const LossFamily& loss,
                                   const Vector& sample_weights = {});

    std::size_t dim() const { return rules_.size(); }

    // Solver-feasible interval for a common multiplier. For ZAPE the lower
    // end is the point below which every component is pinned at zero.
    double lambda_lo() const { return lo_; }
    double lambda_hi() const { return hi_; }
    bool lambda_lo_closed() const { return lo_closed_; }

    // Per-component effective-multiplier interval.
    double component_lo(std::size_t i) const;
    double component_hi(std::size_t i) const;

    double component(std::size_t i, double lambda_eff) const;
    // d f_i / d lambda_eff; zero in a pinned region, NaN when the quantile
    // source has no density (solver falls back to a secant).
    double component_slope(std::size_t i, double lambda_eff) const;

    Vector evaluate(double lambda) const;
    double total(double lambda) const;
    double total_slope(double lambda) const;
    bool has_analytic_slope() const;

    // Limits of 1'f(lambda) at the ends of the feasible interval.
    std::pair<double, double> attainable_total() const;

    // Zero-cost Newton warm start: inverts the equal-weight mixture CDF of
    // the quantile sources at F/n. Returns a value strictly inside the
    // interval; 0 when the map is affine.
    double warm_start(double target_total) const;

    const MarginalDistribution& source(std::size_t i) const;
    double wape_normalizer() const { return wape_normalizer_; }

private:
    struct AffineRule {
        double mean, half_weight;  // f = mean + half_weight * lambda
    };
    struct QuantileRule {
        MarginalDistribution source;
        double alpha, beta;     // u(lambda) = alpha + beta * lambda
        bool zero_below_kink;   // pinned at exactly 0 when u <= 0
    };
    using Rule = std::variant<AffineRule, QuantileRule>;

    std::vector<Rule> rules_;
    double lo_ = 0.0, hi_ = 0.0;
    bool lo_closed_ = false;
    double wape_normalizer_ = 1.0;

    void finalize_interval();
};

// f(lambda) for the family; errors with infeasible_multiplier_error when
// lambda falls outside the family's feasible set (ZAPE accepts any lambda
// below the upper bound: components with u_i(lambda) <= 0 come out exactly 0).
Vector componentwise_minimizer(const LossFamily& loss,
                               const std::vector<MarginalDistribution>& margins,
                               double lambda);

// E |y - f| under the margin, via the partial-expectation identity.
double expected_absolute_error(const MarginalDistribution& margin, double f);

// R_i(f) = E L_i(y, f) for one component. Analytic when the margin allows it;
// a Monte Carlo average over mc_samples otherwise (pass the margin's sample).
// Throws undefined_risk_error when the expectation does not exist.
double per_component_risk(LossKind kind, const MarginalDistribution& margin, double f,
                          double c = 1.0, std::span<const double> mc_samples = {});

// WAPE per-component risk E[ |y_i - f| / (c 1'y) ] from a joint sample.
double wape_per_component_risk(const Matrix& samples, std::size_t i, double f,
                               double c = 1.0, const Vector& sample_weights = {});

// WAPE componentwise minimizer at a given multiplier, from a joint sample.
Vector wape_minimizer(const Matrix& samples, double lambda, const LossFamily& loss,
                      const Vector& sample_weights = {});

LambdaBounds wape_lambda_bounds(const Matrix& samples, const LossFamily& loss,
                                const Vector& sample_weights = {});

// Realized loss L(y, f) at one outcome vector.
double pointwise_loss(const LossFamily& loss, std::span<const double> y,
                      std::span<const double> f);

// Decomposition used by ZAPE: point mass at zero plus the renormalized
// positive part.
struct ZeroDecomposition {
    double pi0;
    MarginalDistribution positive;
};
ZeroDecomposition zero_decompose(const MarginalDistribution& margin);

}  // namespace confor

#endif
