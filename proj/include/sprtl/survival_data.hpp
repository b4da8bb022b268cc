#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace sprtl {

// One subject, used at the ingestion boundary. Inside the library the
// dataset keeps struct-of-arrays storage instead.
struct SurvivalObservation {
    double y = 0.0;          // observed time, min(event time, censoring time)
    int delta = 0;           // 1 = event observed, 0 = censored
    std::vector<double> x;   // covariates
};

// Immutable cohort: y, delta, and covariate rows, all aligned by index.
class SurvivalDataset {
public:
    // Validates: equal lengths, n >= 2 (pairwise objectives need a pair),
    // y >= 0, delta in {0,1}, all covariate entries finite.
    SurvivalDataset(Eigen::VectorXd y, std::vector<int> delta, Eigen::MatrixXd x,
                    std::string label);

    int n() const { return static_cast<int>(y_.size()); }
    int p() const { return static_cast<int>(x_.cols()); }
    const Eigen::VectorXd& y() const { return y_; }
    const std::vector<int>& delta() const { return delta_; }
    const Eigen::MatrixXd& x() const { return x_; }
    const std::string& label() const { return label_; }

    SurvivalObservation observation(int i) const;

private:
    Eigen::VectorXd y_;
    std::vector<int> delta_;
    Eigen::MatrixXd x_;  // n x p
    std::string label_;
};

// Rows of `source` picked out by `index` (repeats allowed), in the given order.
SurvivalDataset subset(const SurvivalDataset& source, const std::vector<int>& index,
                       const std::string& label);

// Dense coefficient vector. The flag records a promise, checked where it
// matters: when set, the L2 norm is 1 within 1e-12.
struct CoefficientVector {
    Eigen::VectorXd values;
    bool normalized = false;
};

CoefficientVector normalize(const Eigen::VectorXd& values);

// Perturbation knobs for one source: noise d1 support coordinates and d2
// off-support coordinates by U[-u,u], sign-flip r support coordinates.
struct PerturbationParams {
    int d1 = 0;
    int d2 = 0;
    int r = 0;
    double u = 0.0;
};

// Full description of one simulation scenario. The target pattern is kept
// on its raw scale; generators normalize where the model requires it.
struct ScenarioSpec {
    std::string name;
    int n0 = 0;
    std::vector<int> n_sources;               // one entry per source
    int p = 0;
    std::vector<int> informative;             // 0-based source indices
    std::vector<PerturbationParams> perturbation;  // one entry per source
    Eigen::VectorXd target_pattern;           // raw, unnormalized
    double censoring_rate = 0.4;
    int test_size = 30;
    std::uint64_t seed = 0;

    int n_sources_total() const { return static_cast<int>(n_sources.size()); }
    void validate() const;  // throws InvalidArgument on any violated bound
};

// Draws one cohort from the accelerated failure time model
// log T = beta^T X + eps with eps ~ N(0, 0.2), X ~ N(0, covariance),
// censoring C ~ Exp(mean theta), returning (min(T,C), indicator, X).
SurvivalDataset simulate_cohort(const CoefficientVector& beta, int n,
                                const Eigen::MatrixXd& covariance, double theta,
                                std::uint64_t seed, const std::string& label = "");

// sigma0 + v v^T with v ~ N(0, 0.3^2 I). Rank-one inflation of the target
// covariance, one fresh v per call.
Eigen::MatrixXd make_source_covariance(const Eigen::MatrixXd& sigma0,
                                       std::uint64_t seed);

// Covariance with entries rho^|j - j'|.
Eigen::MatrixXd ar1_covariance(int p, double rho);

// Source coefficients from the target pattern: U[-u,u] noise on d1 support
// and d2 off-support coordinates, sign flips (of the original value) on r
// support coordinates, then unit-L2 normalization. The noised and flipped
// support subsets are drawn independently; a flip wins where they overlap.
CoefficientVector perturb_coefficients(const CoefficientVector& beta0, int d1,
                                       int d2, int r, double u,
                                       std::uint64_t seed);

inline CoefficientVector perturb_coefficients(const CoefficientVector& beta0,
                                              const PerturbationParams& params,
                                              std::uint64_t seed) {
    return perturb_coefficients(beta0, params.d1, params.d2, params.r, params.u,
                                seed);
}

// Finds the exponential-censoring mean theta whose Monte-Carlo censoring
// fraction (n_mc draws) lands within tol of target_rate, by bisection.
double calibrate_censoring(const CoefficientVector& beta,
                           const Eigen::MatrixXd& covariance, double target_rate,
                           std::uint64_t seed, double tol = 0.01, int n_mc = 5000);

// Estimated rank correlation: the fraction of strictly ordered pairs of
// beta0 whose order betak preserves. Scale-free in both arguments.
double erc(const CoefficientVector& beta0, const CoefficientVector& betak);

// CSV layout: header `time,status,<covariate names...>`, one row per subject.
SurvivalDataset load_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const SurvivalDataset& data);

}  // namespace sprtl
