#ifndef CONFOR_ANALYSIS_HPP
#define CONFOR_ANALYSIS_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "confor/distributions.hpp"
#include "confor/losses.hpp"
#include "confor/solver.hpp"

namespace confor {

// Predictive distribution of realized loss at a fixed forecast vector,
// summarized with the left-continuous empirical quantile convention.
struct LossDistributionSummary {
    bool per_dimension = false;  // loss divided by n
    double mean = 0.0, median = 0.0, q05 = 0.0, q95 = 0.0;
    double min = 0.0, max = 0.0;
    double std_error = 0.0;  // Monte Carlo standard error of the mean
    std::size_t count = 0;
    std::vector<std::pair<double, double>> samples;  // (total, loss), kept on request
};

LossDistributionSummary loss_distribution(const JointForecast& joint, const LossFamily& loss,
                                          const Vector& f, std::size_t n_samples,
                                          std::uint64_t seed, bool per_dimension,
                                          bool keep_samples = false);

// Loss distributions at the same forecast under the joint and under its
// dependence-free version (diagonal covariance), driven by common random
// numbers (identical pre-correlation normals). Analytic joints only.
std::pair<LossDistributionSummary, LossDistributionSummary> dependence_contrast(
    const JointForecast& joint, const LossFamily& loss, const Vector& f,
    std::size_t n_samples, std::uint64_t seed, bool per_dimension,
    bool keep_samples = false);

struct SensitivityPoint {
    double epsilon = 0.0;
    double F = 0.0;
    SolveStatus status = SolveStatus::Converged;
    double lambda_exact = 0.0, lambda_approx = 0.0;
    Vector f_exact, f_approx;
};

struct SensitivityResult {
    double nominal_F = 0.0;
    double lambda_star = 0.0, qdot = 0.0;
    Vector f_star;
    std::vector<SensitivityPoint> points;

    // Per-component [min, max] of the exact forecasts over converged points.
    std::vector<std::pair<double, double>> envelopes() const;
};

// Re-solves at F(1+eps) across the grid and adds the first-order shortcut
// lambda = lambda* + eps F / q'(lambda*). Infeasible perturbations yield a
// point with its own status rather than failing the sweep.
SensitivityResult sensitivity(const LossFamily& loss,
                              const std::vector<MarginalDistribution>& margins,
                              double nominal_F, std::span<const double> epsilon_grid,
                              const SolverOptions& opts = {});

}  // namespace confor

#endif
