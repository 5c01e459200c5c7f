#ifndef CONFOR_CONDITIONING_HPP
#define CONFOR_CONDITIONING_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "confor/distributions.hpp"
#include "confor/linalg.hpp"

namespace confor {

// Sign convention for the rank-one total-direction term of the T-conditioned
// dispersion: Added keeps V + cc'/q (the printed elliptical form),
// Removed uses V - cc'/q, which matches the normal-case geometry (the total
// becomes deterministic, var * 1 = 0) and the large-dof limit of the normal
// answer.
enum class TotalVariance { Added, Removed };

struct ConditionedNormal {
    Vector mean_F;       // 1'mean_F == F
    Matrix var_F;        // dispersion (already scaled in the T case)
    double scale_factor; // 1 for normal, v_F for T
};

// Exact conditioning of y ~ N(m, V) on 1'y = F.
ConditionedNormal condition_normal(const Vector& m, const Matrix& V, double F);

// Conditioning of y ~ T_dof(m, V) on 1'y = F: same location shift, dispersion
// scaled by v_F = (dof + (F-M)^2/q) / (dof + n).
ConditionedNormal condition_t(double dof, const Vector& m, const Matrix& V, double F,
                              TotalVariance convention = TotalVariance::Added);

struct AbcResult {
    Matrix accepted;         // rows with 100 |1'y - F| / F < tau_pct
    double acceptance_rate;  // accepted / drawn
    double tau_pct;
    std::size_t drawn;
};

// Rejection conditioning of the joint on a percent-tolerance band around the
// total. Deterministic given the seed; zero acceptances is a valid result.
AbcResult abc_condition(const JointForecast& joint, double F, double tau_pct,
                        std::size_t n_samples, std::uint64_t seed);

struct Histogram {
    Vector edges;                     // size bins + 1
    std::vector<std::size_t> counts;  // size bins
};

// Equal-width binned counts spanning [min, max] of the values.
Histogram histogram(std::span<const double> values, int bins = 64);

}  // namespace confor

#endif
