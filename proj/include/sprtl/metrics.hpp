#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "sprtl/survival_data.hpp"

namespace sprtl {

// One evaluated replication of one method. Optional fields stay empty when
// the quantity does not apply (recall for non-detecting methods, wall time
// when timing is off).
struct EvaluationRecord {
    std::string method;
    int replication = 0;
    double f1 = 0.0;
    double rmse_raw = 0.0;
    double rmse_normalized = 0.0;
    double c_index_test = 0.0;
    double logrank_stat = 0.0;
    std::optional<double> detection_recall;
    std::optional<double> wall_time;
};

// Indices j with |values[j]| > tol, ascending.
std::vector<int> support(const Eigen::VectorXd& values, double tol = 0.0);

// Harmonic mean of precision and recall of `selected` against `truth`,
// both treated as sets. Conventions: two empty sets agree perfectly (1);
// one empty side scores 0.
double f1_score(const std::vector<int>& selected, const std::vector<int>& truth);

// L2 norm of beta_hat - beta_true (no division by length).
double rmse(const CoefficientVector& beta_hat, const CoefficientVector& beta_true);

// Two-sample log-rank chi-square (unweighted, one degree of freedom) after
// splitting the cohort at the median risk score; scores at the median join
// the higher-score group. Requires n >= 4 and a nonempty group on each side.
// When a group has no events at all or the variance vanishes, the statistic
// is still returned (0 when the variance is 0) and *degenerate is set.
double logrank_statistic(const SurvivalDataset& test,
                         const Eigen::VectorXd& risk_scores,
                         bool* degenerate = nullptr);

// |selected ∩ truth| / |truth|. Empty truth is a caller error.
double detection_recall(const std::vector<int>& selected,
                        const std::vector<int>& truth);

// Standard normal CDF.
double normal_cdf(double x);

// Kolmogorov-Smirnov distance between the empirical distribution of the
// sample and the standard normal.
double ks_distance_normal(std::vector<double> sample);

}  // namespace sprtl
