#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sprtl/spr_core.hpp"
#include "sprtl/survival_data.hpp"

namespace sprtl {

struct PrecisionEstimate {
    Eigen::MatrixXd theta;         // symmetrized estimate of the inverse curvature
    double gamma = 0.0;            // constraint level used
    double feasibility_gap = 0.0;  // ||Theta_raw H - I||_max before symmetrization
    double symmetrized_gap = 0.0;  // same norm for the symmetrized matrix
};

struct CoordinateInterval {
    double lo = 0.0;
    double hi = 0.0;
    double half_width = 0.0;
    bool clamped = false;  // variance form went negative and was clamped to 0
};

struct InferenceResult {
    CoefficientVector beta_tilde;
    Eigen::MatrixXd g_hat;
    std::vector<CoordinateInterval> intervals;
    double alpha = 0.05;
};

// Inverse of the standard normal CDF. Rational approximation polished with
// one Newton step against erfc; accurate to ~1e-13 over (0, 1).
double normal_quantile(double prob);

// Column-wise constrained-L1 estimate of H^{-1}: each column solves
// min ||theta||_1 subject to ||H theta - e_j||_inf <= gamma, and the
// assembled matrix is symmetrized by keeping the smaller-magnitude entry.
PrecisionEstimate clime_inverse(const Eigen::MatrixXd& h, double gamma);

// Log-spaced default grid for the constraint level, from 0.01 * ||H||_max
// up to ||I - H / ||H||_max ||_max (a level that is always feasible).
std::vector<double> default_gamma_grid(const Eigen::MatrixXd& h, int size = 20);

// Cross-validated choice of the constraint level: per fold, the precision
// matrix is fit on the training folds' curvature and scored by the Stein
// loss trace(Theta H_valid) - log det Theta on the held-out fold's
// curvature, which averages validation noise and is minimized in
// expectation at the true inverse. Both fold curvatures use the
// full-sample bandwidth so they estimate the same smoothed matrix. Grid
// values infeasible (or yielding a non-positive-definite estimate) on any
// fold are excluded; ties go to the larger gamma. radial_ridge > 0 applies
// the same scale-direction regularization as the pipeline to every fold
// curvature.
double select_gamma(const SurvivalDataset& target,
                    const CoefficientVector& beta_hat,
                    const SmoothingRule& rule, int folds = 5,
                    std::vector<double> grid = {}, std::uint64_t seed = 0,
                    double radial_ridge = 0.0);

// One-step correction: beta_hat + Theta * gradient-at-beta_hat.
CoefficientVector desparsify(const SurvivalDataset& target,
                             const CoefficientVector& beta_hat,
                             const PrecisionEstimate& theta,
                             const SmoothingRule& rule);

// Empirical second moment of the per-observation projected-kernel rows:
// G = n0^{-1} sum_l grad_tau_l grad_tau_l^T, where grad_tau_l averages the
// two-term comparable-pair kernel over the cohort. Symmetric PSD.
Eigen::MatrixXd variance_sandwich(const SurvivalDataset& target,
                                  const CoefficientVector& beta_hat,
                                  const SmoothingRule& rule);

// Symmetric per-coordinate intervals around beta_tilde with half-width
// sqrt(Theta_j^T G Theta_j) * q_{1-alpha/2} / sqrt(n0).
InferenceResult confidence_intervals(const CoefficientVector& beta_tilde,
                                     const PrecisionEstimate& theta,
                                     const Eigen::MatrixXd& g, int n0,
                                     double alpha);

struct InferenceConfig {
    // The two smoothing jobs pull in opposite directions. The score and its
    // sandwich variance keep the estimation bandwidth n^{-1/2}: widening them
    // adds an O(sigma^2) smoothing bias that shifts the corrected center off
    // large coordinates. The curvature matrix cannot run that narrow: the
    // second-derivative kernel has variance of order 1/(n sigma^3) and comes
    // out indefinite at realistic n, so it smooths at n^{-1/3}.
    SmoothingRule score_smoothing = SmoothingRule::root_n();
    SmoothingRule curvature_smoothing = SmoothingRule::cube_root();
    double alpha = 0.05;
    int gamma_folds = 5;
    std::vector<double> gamma_grid;  // empty = default grid
    double fixed_gamma = -1.0;       // > 0 skips cross-validation
    // The rank objective is flat along the scale direction, so the curvature
    // at a unit-norm estimate has a near-null eigenvalue there. Before
    // inversion the pipeline adds radial_ridge * mean-eigenvalue along
    // beta_hat, pinning the scale convention where the model does not
    // identify one. 0 disables.
    double radial_ridge = 3.0;
    std::uint64_t seed = 0;
};

struct InferencePipelineResult {
    Eigen::VectorXd eta;       // gradient at beta_hat
    Eigen::MatrixXd h_hat;     // minus-signed curvature at beta_hat
    PrecisionEstimate precision;
    InferenceResult result;
};

// The full interval-construction pipeline: curvature and gradient at the
// supplied estimate, precision matrix (cross-validated gamma unless fixed),
// one-step correction, sandwich variance, and per-coordinate intervals.
// h_hat stores the raw curvature; the inversion runs on a copy regularized
// along the scale direction per config.radial_ridge.
InferencePipelineResult run_inference_pipeline(const SurvivalDataset& target,
                                               const CoefficientVector& beta_hat,
                                               const InferenceConfig& config);

// CSV with columns (coordinate, estimate, lo, hi, half_width, clamped_flag);
// coordinates are 1-based to match covariate naming.
void write_inference_csv(const std::string& path, const InferenceResult& result);

}  // namespace sprtl
