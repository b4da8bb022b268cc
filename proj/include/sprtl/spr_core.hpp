#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "sprtl/objective.hpp"
#include "sprtl/survival_data.hpp"

namespace sprtl {

struct SmoothingParam {
    double sigma = 1.0;  // must be > 0
};

// Maps a cohort's sample size to its smoothing bandwidth. Default follows
// the n^{-1/2} rule; the n^{-1/3} rule trades sharper smoothing for stabler
// curvature estimates and is the interval-construction default; a fixed
// override exists so pooled fits can also be run with one global bandwidth.
struct SmoothingRule {
    enum class Kind { RootN, CubeRoot, Fixed };
    Kind kind = Kind::RootN;
    double fixed_sigma = 0.0;

    static SmoothingRule root_n() { return {Kind::RootN, 0.0}; }
    static SmoothingRule cube_root() { return {Kind::CubeRoot, 0.0}; }
    static SmoothingRule fixed(double sigma) { return {Kind::Fixed, sigma}; }

    double sigma_for(int n) const;
};

// Cohort mixing weights alpha_k, one per cohort, summing to 1.
struct PooledWeights {
    std::vector<double> alpha;

    static PooledWeights from_sizes(const std::vector<int>& sizes);
    void validate() const;
};

// 1 / (1 + exp(-x/sigma)) and its first two derivatives. All three are
// overflow-safe for any x.
double sigmoid(double x, double sigma);
double sigmoid_d1(double x, double sigma);
double sigmoid_d2(double x, double sigma);

// Partial-rank objective: the fraction (over all n(n-1) ordered pairs) of
// pairs with an observed event at l, Y_i > Y_l, and concordant scores.
double pr_objective(const CoefficientVector& beta, const SurvivalDataset& data);

// Same sum with the score indicator replaced by sigmoid(. , sigma).
double spr_objective(const CoefficientVector& beta, const SurvivalDataset& data,
                     double sigma);

// Gradient of spr_objective in beta.
Eigen::VectorXd spr_gradient(const CoefficientVector& beta,
                             const SurvivalDataset& data, double sigma);

// MINUS the second derivative matrix of spr_objective (the sign convention
// of the inference layer, which wants a positive-leaning curvature matrix).
Eigen::MatrixXd spr_hessian(const CoefficientVector& beta,
                            const SurvivalDataset& data, double sigma);

// Weighted sum of per-cohort spr_objective values, alpha_k = n_k / n,
// each cohort smoothed at the bandwidth the rule assigns to its own size.
double pooled_spr_objective(const CoefficientVector& w,
                            const std::vector<const SurvivalDataset*>& cohorts,
                            const SmoothingRule& rule);

// Concordance index: concordant comparable pairs over comparable pairs.
// Throws InvalidArgument when the data has no comparable pair.
double c_index(const CoefficientVector& beta, const SurvivalDataset& data);

// Minimization-form SPR loss for one cohort: value(beta) = -spr_objective.
// Comparable pairs are enumerated once at construction; each evaluation is
// O(pairs + n p). The referenced dataset must outlive the loss.
class SprLoss final : public SmoothObjective {
public:
    SprLoss(const SurvivalDataset& data, double sigma);

    int dimension() const override { return data_->p(); }
    double value(const Eigen::VectorXd& beta) const override;
    double value_and_gradient(const Eigen::VectorXd& beta,
                              Eigen::VectorXd& gradient) const override;

    double sigma() const { return sigma_; }
    std::size_t pair_count() const { return pair_i_.size(); }

private:
    const SurvivalDataset* data_;
    double sigma_;
    double inv_norm_;  // 1 / (n (n-1))
    std::vector<int> pair_i_;
    std::vector<int> pair_l_;
};

// Weighted sum of per-cohort SPR losses: value = -sum_k alpha_k L_k.
// Cohort order is the order given at construction; the weighted reduction
// runs in that fixed order, so results are bitwise reproducible.
class PooledSprLoss final : public SmoothObjective {
public:
    PooledSprLoss(const std::vector<const SurvivalDataset*>& cohorts,
                  const SmoothingRule& rule);
    PooledSprLoss(const std::vector<const SurvivalDataset*>& cohorts,
                  const SmoothingRule& rule, PooledWeights weights);

    int dimension() const override;
    double value(const Eigen::VectorXd& beta) const override;
    double value_and_gradient(const Eigen::VectorXd& beta,
                              Eigen::VectorXd& gradient) const override;

    const PooledWeights& weights() const { return weights_; }
    int total_n() const { return total_n_; }

private:
    std::vector<SprLoss> losses_;
    PooledWeights weights_;
    int total_n_ = 0;
};

}  // namespace sprtl
