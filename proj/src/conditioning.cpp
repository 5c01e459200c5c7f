#include "confor/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace confor {

namespace {

struct TotalStats {
    Vector c;   // V 1
    double q;   // 1' V 1
    double M;   // 1' m
};

TotalStats total_stats(const Vector& m, const Matrix& V) {
    if (V.rows() != m.size() || V.cols() != m.size())
        throw std::invalid_argument("conditioning: dimension mismatch");
    TotalStats s;
    s.c.assign(m.size(), 0.0);
    s.q = 0.0;
    s.M = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) s.c[i] += V(i, j);
        s.q += s.c[i];
        s.M += m[i];
    }
    if (!(s.q > 0.0))
        throw std::domain_error("conditioning: total variance 1'V1 must be positive");
    return s;
}

}  // namespace

ConditionedNormal condition_normal(const Vector& m, const Matrix& V, double F) {
    const auto s = total_stats(m, V);
    ConditionedNormal out;
    out.scale_factor = 1.0;
    out.mean_F.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        out.mean_F[i] = m[i] + s.c[i] * (F - s.M) / s.q;
    out.var_F = V;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            out.var_F(i, j) -= s.c[i] * s.c[j] / s.q;
    return out;
}

ConditionedNormal condition_t(double dof, const Vector& m, const Matrix& V, double F,
                              TotalVariance convention) {
    if (!(dof > 0.0)) throw std::domain_error("condition_t: dof must be positive");
    const auto s = total_stats(m, V);
    const double n = static_cast<double>(m.size());
    const double v_F = (dof + (F - s.M) * (F - s.M) / s.q) / (dof + n);

    ConditionedNormal out;
    out.scale_factor = v_F;
    out.mean_F.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        out.mean_F[i] = m[i] + s.c[i] * (F - s.M) / s.q;
    out.var_F = V;
    const double sign = (convention == TotalVariance::Added) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            out.var_F(i, j) = (out.var_F(i, j) + sign * s.c[i] * s.c[j] / s.q) * v_F;
    return out;
}

AbcResult abc_condition(const JointForecast& joint, double F, double tau_pct,
                        std::size_t n_samples, std::uint64_t seed) {
    if (!(F > 0.0)) throw std::domain_error("abc_condition: percent tolerance needs F > 0");
    if (!(tau_pct > 0.0)) throw std::domain_error("abc_condition: tau_pct must be positive");
    if (n_samples == 0) throw std::invalid_argument("abc_condition: need at least one sample");

    const std::size_t n = joint.dim();
    std::vector<double> kept;
    std::size_t accepted = 0;
    joint.sample_rows(n_samples, seed, [&](const std::vector<double>& row) {
        double total = 0.0;
        for (double x : row) total += x;
        if (100.0 * std::abs(total - F) / F < tau_pct) {
            kept.insert(kept.end(), row.begin(), row.end());
            ++accepted;
        }
    });

    AbcResult out;
    out.tau_pct = tau_pct;
    out.drawn = n_samples;
    out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(n_samples);
    out.accepted = Matrix(accepted, n);
    std::copy(kept.begin(), kept.end(), out.accepted.data().begin());
    return out;
}

Histogram histogram(std::span<const double> values, int bins) {
    if (bins < 1) throw std::invalid_argument("histogram: need at least one bin");
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    h.edges.assign(static_cast<std::size_t>(bins) + 1, 0.0);
    if (values.empty()) return h;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn, hi = *mx;
    if (lo == hi) hi = lo + 1.0;
    const double w = (hi - lo) / bins;
    for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + b * w;
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / w);
        if (b >= h.counts.size()) b = h.counts.size() - 1;
        ++h.counts[b];
    }
    return h;
}

}  // namespace confor
