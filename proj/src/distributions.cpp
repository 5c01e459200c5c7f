#include "confor/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "confor/errors.hpp"
#include "confor/math.hpp"

namespace confor {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

MarginalDistribution MarginalDistribution::normal(double m, double v) {
    require(v > 0.0, "normal: variance must be positive");
    return MarginalDistribution(NormalParams{m, v});
}

MarginalDistribution MarginalDistribution::lognormal(double m, double v) {
    require(v > 0.0, "lognormal: log-scale variance must be positive");
    return MarginalDistribution(LognormalParams{m, v});
}

MarginalDistribution MarginalDistribution::exponential(double rate) {
    require(rate > 0.0, "exponential: rate must be positive");
    return MarginalDistribution(ExponentialParams{rate});
}

MarginalDistribution MarginalDistribution::log_t(double dof, double m, double v) {
    require(dof > 0.0, "log_t: degrees of freedom must be positive");
    require(v > 0.0, "log_t: scale must be positive");
    return MarginalDistribution(LogTParams{dof, m, v});
}

MarginalDistribution MarginalDistribution::zero_inflated(double pi0,
                                                         MarginalDistribution positive) {
    require(pi0 >= 0.0 && pi0 < 1.0, "zero_inflated: pi0 must lie in [0,1)");
    require(positive.positive_support() && positive.zero_mass() == 0.0,
            "zero_inflated: positive part must have support y > 0");
    return MarginalDistribution(ZeroInflatedParams{
        pi0, std::make_shared<const MarginalDistribution>(std::move(positive))});
}

MarginalDistribution MarginalDistribution::empirical(Vector values, Vector weights) {
    require(!values.empty(), "empirical: sample must not be empty");
    if (weights.empty()) weights.assign(values.size(), 1.0);
    require(weights.size() == values.size(), "empirical: weight/value size mismatch");
    for (double w : weights) require(w >= 0.0 && std::isfinite(w), "empirical: weights must be nonnegative");

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    EmpiricalParams p;
    p.values.reserve(values.size());
    p.weights.reserve(values.size());
    double total = 0.0;
    for (std::size_t idx : order) total += weights[idx];
    require(total > 0.0, "empirical: weights must not all be zero");
    double cum = 0.0;
    for (std::size_t idx : order) {
        p.values.push_back(values[idx]);
        p.weights.push_back(weights[idx] / total);
        cum += weights[idx] / total;
        p.cum_weights.push_back(cum);
    }
    p.cum_weights.back() = 1.0;
    return MarginalDistribution(std::move(p));
}

bool MarginalDistribution::has_density() const {
    return std::visit(
        [](const auto& p) -> bool {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, EmpiricalParams>) return false;
            else if constexpr (std::is_same_v<T, ZeroInflatedParams>) return p.positive->has_density();
            else return true;
        },
        params_);
}

double MarginalDistribution::pdf(double y) const {
    return std::visit(
        [y](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NormalParams>) {
                const double s = std::sqrt(p.v);
                return normal_pdf((y - p.m) / s) / s;
            } else if constexpr (std::is_same_v<T, LognormalParams>) {
                if (y <= 0.0) return 0.0;
                const double s = std::sqrt(p.v);
                return normal_pdf((std::log(y) - p.m) / s) / (y * s);
            } else if constexpr (std::is_same_v<T, ExponentialParams>) {
                return (y < 0.0) ? 0.0 : p.rate * std::exp(-p.rate * y);
            } else if constexpr (std::is_same_v<T, LogTParams>) {
                if (y <= 0.0) throw std::domain_error("log_t pdf: y must be positive");
                const double s = std::sqrt(p.v);
                return student_t_pdf((std::log(y) - p.m) / s, p.dof) / (y * s);
            } else if constexpr (std::is_same_v<T, ZeroInflatedParams>) {
                if (y <= 0.0) return 0.0;
                return (1.0 - p.pi0) * p.positive->pdf(y);
            } else {
                throw std::logic_error("empirical margin has no density");
            }
        },
        params_);
}

double MarginalDistribution::cdf(double y) const {
    return std::visit(
        [y](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NormalParams>) {
                return normal_cdf((y - p.m) / std::sqrt(p.v));
            } else if constexpr (std::is_same_v<T, LognormalParams>) {
                if (y <= 0.0) return 0.0;
                return normal_cdf((std::log(y) - p.m) / std::sqrt(p.v));
            } else if constexpr (std::is_same_v<T, ExponentialParams>) {
                return (y < 0.0) ? 0.0 : -std::expm1(-p.rate * y);
            } else if constexpr (std::is_same_v<T, LogTParams>) {
                if (y <= 0.0) return 0.0;
                return student_t_cdf((std::log(y) - p.m) / std::sqrt(p.v), p.dof);
            } else if constexpr (std::is_same_v<T, ZeroInflatedParams>) {
                if (y < 0.0) return 0.0;
                return p.pi0 + (1.0 - p.pi0) * p.positive->cdf(y);
            } else {
                const auto it = std::upper_bound(p.values.begin(), p.values.end(), y);
                if (it == p.values.begin()) return 0.0;
                return p.cum_weights[static_cast<std::size_t>(it - p.values.begin()) - 1];
            }
        },
        params_);
}

double MarginalDistribution::quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile: u must lie in (0,1)");
    return std::visit(
        [u](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NormalParams>) {
                return p.m + std::sqrt(p.v) * normal_quantile(u);
            } else if constexpr (std::is_same_v<T, LognormalParams>) {
                return std::exp(p.m + std::sqrt(p.v) * normal_quantile(u));
            } else if constexpr (std::is_same_v<T, ExponentialParams>) {
                return -std::log1p(-u) / p.rate;
            } else if constexpr (std::is_same_v<T, LogTParams>) {
                return std::exp(p.m + std::sqrt(p.v) * student_t_quantile(u, p.dof));
            } else if constexpr (std::is_same_v<T, ZeroInflatedParams>) {
                if (u <= p.pi0) return 0.0;
                return p.positive->quantile((u - p.pi0) / (1.0 - p.pi0));
            } else {
                const auto it = std::lower_bound(p.cum_weights.begin(), p.cum_weights.end(), u);
                const std::size_t idx =
                    std::min(static_cast<std::size_t>(it - p.cum_weights.begin()),
                             p.values.size() - 1);
                return p.values[idx];
            }
        },
        params_);
}

std::optional<double> MarginalDistribution::mean() const {
    return std::visit(
        [](const auto& p) -> std::optional<double> {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NormalParams>) {
                return p.m;
            } else if constexpr (std::is_same_v<T, LognormalParams>) {
                return std::exp(p.m + 0.5 * p.v);
            } else if constexpr (std::is_same_v<T, ExponentialParams>) {
                return 1.0 / p.rate;
            } else if constexpr (std::is_same_v<T, LogTParams>) {
                return std::nullopt;
            } else if constexpr (std::is_same_v<T, ZeroInflatedParams>) {
                const auto mp = p.positive->mean();
                if (!mp) return std::nullopt;
                return (1.0 - p.pi0) * *mp;
            } else {
                double s = 0.0;
                for (std::size_t i = 0; i < p.values.size(); ++i) s += p.weights[i] * p.values[i];
                return s;
            }
        },
        params_);
}

std::optional<double> MarginalDistribution::variance() const {
    return std::visit(
        [this](const auto& p) -> std::optional<double> {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NormalParams>) {
                return p.v;
            } else if constexpr (std::is_same_v<T, LognormalParams>) {
                return std::expm1(p.v) * std::exp(2.0 * p.m + p.v);
            } else if constexpr (std::is_same_v<T, ExponentialParams>) {
                return 1.0 / (p.rate * p.rate);
            } else if constexpr (std::is_same_v<T, LogTParams>) {
                return std::nullopt;
            } else if constexpr (std::is_same_v<T, ZeroInflatedParams>) {
                const auto mp = p.positive->mean();
                const auto vp = p.positive->variance();
                if (!mp || !vp) return std::nullopt;
                const double second = (1.0 - p.pi0) * (*vp + *mp * *mp);
                const double mu = (1.0 - p.pi0) * *mp;
                return second - mu * mu;
            } else {
                const double mu = *mean();
                double s = 0.0;
                for (std::size_t i = 0; i < p.values.size(); ++i) {
                    const double d = p.values[i] - mu;
                    s += p.weights[i] * d * d;
                }
                return s;
            }
        },
        params_);
}

double MarginalDistribution::zero_mass() const {
    if (const auto* zi = std::get_if<ZeroInflatedParams>(&params_)) return zi->pi0;
    if (const auto* emp = std::get_if<EmpiricalParams>(&params_)) {
        double s = 0.0;
        for (std::size_t i = 0; i < emp->values.size(); ++i)
            if (emp->values[i] == 0.0) s += emp->weights[i];
        return s;
    }
    return 0.0;
}

double MarginalDistribution::support_lower() const {
    return std::visit(
        [](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NormalParams>) return -kInf;
            else if constexpr (std::is_same_v<T, ExponentialParams>) return 0.0;
            else if constexpr (std::is_same_v<T, EmpiricalParams>) return p.values.front();
            else if constexpr (std::is_same_v<T, ZeroInflatedParams>)
                return (p.pi0 > 0.0) ? 0.0 : p.positive->support_lower();
            else return 0.0;  // lognormal, log-T
        },
        params_);
}

double MarginalDistribution::support_upper() const {
    if (const auto* emp = std::get_if<EmpiricalParams>(&params_)) return emp->values.back();
    if (const auto* zi = std::get_if<ZeroInflatedParams>(&params_))
        return zi->positive->support_upper();
    return kInf;
}

bool MarginalDistribution::positive_support() const {
    return support_lower() >= 0.0 && !std::holds_alternative<NormalParams>(params_);
}

double MarginalDistribution::sample(Rng& rng) const {
    return quantile(rng.next_uniform());
}

std::string MarginalDistribution::describe() const {
    return std::visit(
        [](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NormalParams>) return "normal";
            else if constexpr (std::is_same_v<T, LognormalParams>) return "lognormal";
            else if constexpr (std::is_same_v<T, ExponentialParams>) return "exponential";
            else if constexpr (std::is_same_v<T, LogTParams>) return "log_t";
            else if constexpr (std::is_same_v<T, ZeroInflatedParams>)
                return "zero_inflated(" + p.positive->describe() + ")";
            else return "empirical";
        },
        params_);
}

SizeWeighted size_weighted(const MarginalDistribution& d) {
    const auto& params = d.params();
    if (const auto* ln = std::get_if<LognormalParams>(&params)) {
        // 1/y tilts a lognormal to another lognormal with shifted location.
        return SizeWeighted{MarginalDistribution::lognormal(ln->m - ln->v, ln->v),
                            std::exp(ln->m - 0.5 * ln->v)};
    }
    if (const auto* emp = std::get_if<EmpiricalParams>(&params)) {
        Vector values = emp->values, weights(emp->values.size());
        double total = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] <= 0.0)
                throw non_integrable_error(
                    "size_weighted: empirical sample contains values <= 0");
            weights[i] = emp->weights[i] / values[i];
            total += weights[i];
        }
        return SizeWeighted{MarginalDistribution::empirical(std::move(values), std::move(weights)),
                            1.0 / total};
    }
    if (const auto* zi = std::get_if<ZeroInflatedParams>(&params)) {
        if (zi->pi0 == 0.0) return size_weighted(*zi->positive);
        throw non_integrable_error("size_weighted: point mass at zero");
    }
    if (std::holds_alternative<ExponentialParams>(params))
        throw non_integrable_error(
            "size_weighted: exponential density is positive at 0, p(y)/y is not integrable");
    if (std::holds_alternative<LogTParams>(params))
        throw non_integrable_error(
            "size_weighted: log_t density has a pole at 0, p(y)/y is not integrable");
    throw non_integrable_error("size_weighted: support must be y > 0");
}

double partial_expectation(const MarginalDistribution& d, double f) {
    const auto& params = d.params();
    if (const auto* n = std::get_if<NormalParams>(&params)) {
        const double s = std::sqrt(n->v);
        const double z = (f - n->m) / s;
        return n->m * normal_cdf(z) - s * normal_pdf(z);
    }
    if (const auto* ln = std::get_if<LognormalParams>(&params)) {
        if (f <= 0.0) return 0.0;
        const double s = std::sqrt(ln->v);
        const double z = (std::log(f) - ln->m) / s;
        return std::exp(ln->m + 0.5 * ln->v) * normal_cdf(z - s);
    }
    if (const auto* e = std::get_if<ExponentialParams>(&params)) {
        if (f <= 0.0) return 0.0;
        return 1.0 / e->rate - std::exp(-e->rate * f) * (f + 1.0 / e->rate);
    }
    if (const auto* zi = std::get_if<ZeroInflatedParams>(&params)) {
        if (f < 0.0) return 0.0;
        return (1.0 - zi->pi0) * partial_expectation(*zi->positive, f);
    }
    if (const auto* emp = std::get_if<EmpiricalParams>(&params)) {
        double s = 0.0;
        for (std::size_t i = 0; i < emp->values.size() && emp->values[i] <= f; ++i)
            s += emp->weights[i] * emp->values[i];
        return s;
    }
    throw undefined_risk_error("partial_expectation: " + d.describe() + " has no finite mean");
}

JointForecast::JointForecast(Params p) : params_(std::move(p)) {
    const Matrix* v = nullptr;
    if (const auto* mvln = std::get_if<MvLognormalParams>(&params_)) v = &mvln->V;
    if (const auto* mvn = std::get_if<MvNormalParams>(&params_)) v = &mvn->V;
    if (v != nullptr) {
        const auto pc = pivoted_cholesky(*v);
        // Reject indefinite inputs: the factor must reproduce V.
        double scale = 1e-300, err = 0.0;
        for (std::size_t i = 0; i < v->rows(); ++i)
            for (std::size_t j = 0; j < v->cols(); ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < pc.rank; ++k)
                    s += pc.factor(i, k) * pc.factor(j, k);
                err = std::max(err, std::abs(s - (*v)(i, j)));
                scale = std::max(scale, std::abs((*v)(i, j)));
            }
        if (err > 1e-8 * scale)
            throw std::domain_error("JointForecast: covariance is not positive semi-definite");
        chol_ = pc.factor;
    }
}

JointForecast JointForecast::mv_lognormal(Vector m, Matrix V) {
    require(V.rows() == m.size() && V.cols() == m.size(), "mv_lognormal: dimension mismatch");
    return JointForecast(MvLognormalParams{std::move(m), std::move(V)});
}

JointForecast JointForecast::mv_normal(Vector m, Matrix V) {
    require(V.rows() == m.size() && V.cols() == m.size(), "mv_normal: dimension mismatch");
    return JointForecast(MvNormalParams{std::move(m), std::move(V)});
}

JointForecast JointForecast::empirical(Matrix samples, Vector weights) {
    require(samples.rows() > 0 && samples.cols() > 0, "empirical joint: sample must not be empty");
    if (weights.empty()) weights.assign(samples.rows(), 1.0);
    require(weights.size() == samples.rows(), "empirical joint: weight/sample size mismatch");
    double total = 0.0;
    for (double w : weights) {
        require(w >= 0.0 && std::isfinite(w), "empirical joint: weights must be nonnegative");
        total += w;
    }
    require(total > 0.0, "empirical joint: weights must not all be zero");
    Vector cum(weights.size());
    double running = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] /= total;
        running += weights[i];
        cum[i] = running;
    }
    cum.back() = 1.0;
    EmpiricalMatrixParams p{std::move(samples), std::move(weights)};
    JointForecast out(std::move(p));
    out.chol_ = Matrix(cum.size(), 1);
    for (std::size_t i = 0; i < cum.size(); ++i) out.chol_(i, 0) = cum[i];
    return out;
}

std::size_t JointForecast::dim() const {
    return std::visit(
        [](const auto& p) -> std::size_t {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, EmpiricalMatrixParams>) return p.samples.cols();
            else return p.m.size();
        },
        params_);
}

bool JointForecast::is_analytic() const {
    return !std::holds_alternative<EmpiricalMatrixParams>(params_);
}

MarginalDistribution JointForecast::margin(std::size_t i) const {
    if (const auto* mvln = std::get_if<MvLognormalParams>(&params_))
        return MarginalDistribution::lognormal(mvln->m[i], mvln->V(i, i));
    if (const auto* mvn = std::get_if<MvNormalParams>(&params_))
        return MarginalDistribution::normal(mvn->m[i], mvn->V(i, i));
    const auto& p = std::get<EmpiricalMatrixParams>(params_);
    Vector col(p.samples.rows());
    for (std::size_t r = 0; r < p.samples.rows(); ++r) col[r] = p.samples(r, i);
    return MarginalDistribution::empirical(std::move(col), p.weights);
}

std::vector<MarginalDistribution> JointForecast::margins() const {
    std::vector<MarginalDistribution> out;
    out.reserve(dim());
    for (std::size_t i = 0; i < dim(); ++i) out.push_back(margin(i));
    return out;
}

JointForecast JointForecast::independent_version() const {
    if (const auto* mvln = std::get_if<MvLognormalParams>(&params_)) {
        Matrix v0(mvln->V.rows(), mvln->V.cols());
        for (std::size_t i = 0; i < v0.rows(); ++i) v0(i, i) = mvln->V(i, i);
        return mv_lognormal(mvln->m, std::move(v0));
    }
    if (const auto* mvn = std::get_if<MvNormalParams>(&params_)) {
        Matrix v0(mvn->V.rows(), mvn->V.cols());
        for (std::size_t i = 0; i < v0.rows(); ++i) v0(i, i) = mvn->V(i, i);
        return mv_normal(mvn->m, std::move(v0));
    }
    throw std::invalid_argument(
        "independent_version: empirical joints have no parametric independent form");
}

Matrix JointForecast::sample(std::size_t count, std::uint64_t seed) const {
    Matrix out(count, dim());
    std::size_t r = 0;
    sample_rows(count, seed, [&](const std::vector<double>& row) {
        std::copy(row.begin(), row.end(), out.row(r));
        ++r;
    });
    return out;
}

std::size_t JointForecast::normals_per_row() const {
    // Analytic joints always consume dim() draws per row so that common
    // random numbers line up across joints of different factor rank.
    return is_analytic() ? dim() : 1;
}

double JointForecast::draw_source(Rng& rng) const {
    return is_analytic() ? rng.next_normal() : rng.next_uniform();
}

void JointForecast::transform_row(const double* z, std::vector<double>& out) const {
    if (const auto* p = std::get_if<EmpiricalMatrixParams>(&params_)) {
        const double u = z[0];
        std::size_t lo = 0, hi = p->samples.rows() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (chol_(mid, 0) < u) lo = mid + 1;
            else hi = mid;
        }
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = p->samples(lo, j);
        return;
    }
    const bool log_scale = std::holds_alternative<MvLognormalParams>(params_);
    const Vector& m = log_scale ? std::get<MvLognormalParams>(params_).m
                                : std::get<MvNormalParams>(params_).m;
    const std::size_t rank = chol_.cols();
    for (std::size_t i = 0; i < m.size(); ++i) {
        double s = m[i];
        const double* li = chol_.row(i);
        for (std::size_t k = 0; k < rank; ++k) s += li[k] * z[k];
        out[i] = log_scale ? std::exp(s) : s;
    }
}

}  // namespace confor
