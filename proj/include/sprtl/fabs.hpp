#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sprtl/objective.hpp"
#include "sprtl/survival_data.hpp"

namespace sprtl {

struct FabsConfig {
    double step_eps = 0.01;
    double lambda_min_ratio = 0.05;
    int max_steps = 20000;
    // Backward steps must improve the penalized objective by more than this;
    // <= 0 means use the step_eps^2 default.
    double backward_slack = -1.0;

    double xi() const { return backward_slack > 0.0 ? backward_slack : step_eps * step_eps; }
    void validate() const;
};

struct PathPoint {
    CoefficientVector beta;  // raw path iterate, never normalized here
    double lambda = 0.0;
    double loss = 0.0;       // minimized objective value (negative smoothed concordance for SPR fits)
    int df = 0;              // exact nonzero count, from integer step bookkeeping
};

enum class PathTermination { LambdaMin, MaxSteps, Stationary };

struct SolutionPath {
    std::vector<PathPoint> points;
    PathTermination termination = PathTermination::LambdaMin;
    double lambda_max = 0.0;            // ||gradient at 0||_inf
    double lipschitz_estimate = 0.0;    // running max of ||grad change||_inf / step
    int backward_steps = 0;

    const PathPoint& back() const { return points.back(); }
};

// Forward-backward stagewise minimization of loss(beta) + lambda * ||beta||_1.
// Starts at beta = 0; each step moves one coordinate by +-step_eps; lambda
// only decreases. Runs until lambda <= lambda_max * lambda_min_ratio or the
// step budget is exhausted. Every visited iterate is emitted.
SolutionPath fabs_solve(const SmoothObjective& loss, const FabsConfig& config);

// Same mechanics on delta with the objective evaluated at w_fixed + delta;
// the L1 penalty applies to delta alone. The returned path is in delta.
SolutionPath fabs_solve_offset(const SmoothObjective& loss,
                               const Eigen::VectorXd& w_fixed,
                               const FabsConfig& config);

// BIC over the path: argmin of 3 n loss / |null_loss| + df log(n), where
// null_loss is the loss at zero total coefficients. The concordance loss
// lives on a mean-over-pairs scale whose magnitude depends on the censoring
// level, so the fit term is standardized by its null value before it is
// weighed against the complexity penalty; the weight is calibrated so that
// selection at n in the low hundreds keeps both support recovery and
// sparsity. Ties prefer smaller df, then larger lambda. A nonnegative
// null_loss (no comparable pairs) selects the first point.
const PathPoint& select_bic(const SolutionPath& path, int n, double null_loss);

// Theory-rate alternative: the first path point whose lambda falls to
// rate_constant * sqrt(log(p)/n) or below; the last point when none does.
const PathPoint& select_rate(const SolutionPath& path, double rate_constant,
                             int n, int p);

// Max relative error between the analytic gradient and a central finite
// difference at `point`. Used by tests and the optional solver self-check.
double gradient_fd_error(const SmoothObjective& loss, const Eigen::VectorXd& point,
                         double h = 1e-6);

// Subgradient certificate at one path point: inactive coordinates need
// |g_j| <= lambda + tol, active ones |g_j + lambda sign(beta_j)| <= tol.
// Returns the worst violation (<= 0 means the certificate holds).
double subgradient_violation(const SmoothObjective& loss, const PathPoint& point);

}  // namespace sprtl
