#ifndef CONFOR_SOLVER_HPP
#define CONFOR_SOLVER_HPP

#include <optional>
#include <string>
#include <vector>

#include "confor/losses.hpp"

namespace confor {

// Either a scalar total 1'f = F or a full-column-rank linear system A'f = F.
struct ConstraintSpec {
    static ConstraintSpec total(double F) { return {std::nullopt, {}, {F}}; }
    static ConstraintSpec linear(Matrix A, Vector F) {
        return {std::move(A), std::move(F), {}};
    }

    bool is_total() const { return !A.has_value(); }

    std::optional<Matrix> A;  // n x k when present
    Vector F_vec;             // size k (linear case)
    Vector F_total;           // size 1 (total case)
};

enum class SolveStatus {
    Converged,
    HitLowerBound,
    HitUpperBound,
    MaxIterations,
    InfeasibleConstraint,
};

const char* solve_status_name(SolveStatus s);

struct SolverOptions {
    double tol = 1e-8;          // constraint residual, relative to max(1,|F|)
    int max_iter = 100;
    std::optional<double> lambda0;  // default: warm start (see solve_total)
    double lambda_tol = 1e-10;  // multiplier step at convergence
    bool force_newton = false;  // skip the SE closed form (diagnostics)
};

struct IterationRecord {
    Vector lambda;  // multiplier iterate (size 1 for total constraints)
    double value;   // running total F^t (scalar) or residual norm (linear)
};

struct SolveResult {
    Vector f_star;
    Vector lambda_star;
    std::vector<IterationRecord> iterations;  // first entry is the initial point
    SolveStatus status = SolveStatus::Converged;
    double residual = 0.0;  // |1'f-F| resp. max |A'f-F|
    double qdot = 0.0;      // scalar case: q'(lambda*), for the sensitivity shortcut
    std::string diagnostic;

    bool converged() const { return status == SolveStatus::Converged; }
    // Newton updates taken before the running total first met the given
    // residual tolerance (relative to max(1,|F|)); 0 if already satisfied at
    // the initial point, npos if never.
    std::size_t steps_to_residual(double F, double tol) const;
};

// Minimize expected loss subject to 1'f = F by safeguarded Newton-Raphson on
// the Lagrange multiplier. SE dispatches to the exact closed form unless
// force_newton is set. F outside the attainable total range reports
// InfeasibleConstraint with the range in the diagnostic.
SolveResult solve_total(const LossFamily& loss,
                        const std::vector<MarginalDistribution>& margins, double F,
                        const SolverOptions& opts = {});

// Same, with margins taken from a joint. WAPE requires an empirical joint
// (the reweighting needs sampled totals) and is only available through this
// overload.
SolveResult solve_total(const LossFamily& loss, const JointForecast& joint, double F,
                        const SolverOptions& opts = {});

// Minimize expected loss subject to A'f = F (A full column rank, k < n) by
// multivariate Newton-Raphson on the multiplier vector; component i of the
// forecast solves the scalar subproblem at effective multiplier (A lambda)_i.
SolveResult solve_linear(const LossFamily& loss,
                         const std::vector<MarginalDistribution>& margins,
                         const Matrix& A, const Vector& F,
                         const SolverOptions& opts = {});

// Limits of the attainable total 1'f(lambda) as the multiplier approaches
// its bounds; (-inf, inf) for SE.
std::pair<double, double> attainable_range(const LossFamily& loss,
                                           const std::vector<MarginalDistribution>& margins);

}  // namespace confor

#endif
