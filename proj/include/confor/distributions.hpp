#ifndef CONFOR_DISTRIBUTIONS_HPP
#define CONFOR_DISTRIBUTIONS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "confor/linalg.hpp"
#include "confor/rng.hpp"

namespace confor {

class MarginalDistribution;

struct NormalParams      { double m, v; };
struct LognormalParams   { double m, v; };
struct ExponentialParams { double rate; };
struct LogTParams        { double dof, m, v; };
struct ZeroInflatedParams {
    double pi0;
    std::shared_ptr<const MarginalDistribution> positive;
};
struct EmpiricalParams {
    Vector values;      // ascending, ties in stable input order
    Vector weights;     // normalized to sum 1
    Vector cum_weights; // running sums, last entry == 1
};

// A univariate predictive law: density/CDF/quantile/sampling surface plus
// optional zero point mass. Immutable after construction; all queries are
// safe to call concurrently.
class MarginalDistribution {
public:
    using Params = std::variant<NormalParams, LognormalParams, ExponentialParams,
                                LogTParams, ZeroInflatedParams, EmpiricalParams>;

    static MarginalDistribution normal(double m, double v);
    static MarginalDistribution lognormal(double m, double v);
    static MarginalDistribution exponential(double rate);
    static MarginalDistribution log_t(double dof, double m, double v);
    static MarginalDistribution zero_inflated(double pi0, MarginalDistribution positive);
    static MarginalDistribution empirical(Vector values, Vector weights = {});

    bool has_density() const;
    double pdf(double y) const;
    double cdf(double y) const;

    // Left-continuous generalized inverse: smallest y with CDF(y) >= u.
    // u must lie in (0,1).
    double quantile(double u) const;

    // nullopt when the moment does not exist (log-T has none of any order).
    std::optional<double> mean() const;
    std::optional<double> variance() const;

    double zero_mass() const;       // point mass at y == 0
    double support_lower() const;
    double support_upper() const;
    bool positive_support() const;  // support contained in [0, inf) with mass only at y >= 0

    double sample(Rng& rng) const;  // inverse-CDF draw

    const Params& params() const { return params_; }
    std::string describe() const;

private:
    explicit MarginalDistribution(Params p) : params_(std::move(p)) {}
    Params params_;
};

// Distribution with density proportional to p(y)/y, plus its normalizer k
// (the reciprocal of the base's mean of 1/y).
struct SizeWeighted {
    MarginalDistribution dist;
    double normalizer;
};

// Throws non_integrable_error when 1/y reweighting does not normalize
// (support touching zero or negative values, density not vanishing at 0+).
SizeWeighted size_weighted(const MarginalDistribution& d);

// Lower partial expectation E[y 1{y <= f}]; building block for absolute-error
// risks. Throws undefined_risk_error when the mean does not exist.
double partial_expectation(const MarginalDistribution& d, double f);

struct MvLognormalParams { Vector m; Matrix V; };
struct MvNormalParams    { Vector m; Matrix V; };
struct EmpiricalMatrixParams {
    Matrix samples;  // N x n
    Vector weights;  // normalized, size N
};

// An n-dimensional predictive law: analytic multivariate lognormal/normal or
// an empirical sample matrix. Immutable; sampling is seed-deterministic and
// generated in independent per-block streams.
class JointForecast {
public:
    using Params = std::variant<MvLognormalParams, MvNormalParams, EmpiricalMatrixParams>;

    static JointForecast mv_lognormal(Vector m, Matrix V);
    static JointForecast mv_normal(Vector m, Matrix V);
    static JointForecast empirical(Matrix samples, Vector weights = {});

    std::size_t dim() const;
    bool is_analytic() const;

    MarginalDistribution margin(std::size_t i) const;
    std::vector<MarginalDistribution> margins() const;

    // Same location/scale with all cross-dependence removed (diagonal V).
    // Throws std::invalid_argument for empirical joints.
    JointForecast independent_version() const;

    Matrix sample(std::size_t count, std::uint64_t seed) const;

    // Streams `count` rows into fn(row_values) without materializing the
    // full matrix. Block b always consumes stream_seed(seed, b), so results
    // are independent of block scheduling.
    template <typename Fn>
    void sample_rows(std::size_t count, std::uint64_t seed, Fn&& fn) const {
        std::vector<double> z, row(dim());
        for_each_block(count, [&](std::size_t block, std::size_t, std::size_t len) {
            Rng rng(stream_seed(seed, block));
            z.resize(len * normals_per_row());
            for (double& x : z) x = draw_source(rng);
            for (std::size_t r = 0; r < len; ++r) {
                transform_row(&z[r * normals_per_row()], row);
                fn(row);
            }
        });
    }

    const Params& params() const { return params_; }

private:
    explicit JointForecast(Params p);

    std::size_t normals_per_row() const;
    double draw_source(Rng& rng) const;
    void transform_row(const double* z, std::vector<double>& out) const;

    Params params_;
    Matrix chol_;  // n x rank factor of V for the analytic kinds
};

}  // namespace confor

#endif
