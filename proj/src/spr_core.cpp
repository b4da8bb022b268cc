#include "sprtl/spr_core.hpp"

#include <cmath>
#include <numeric>

#include "sprtl/errors.hpp"

namespace sprtl {

namespace {

void check_sigma(double sigma) {
    if (!(sigma > 0.0)) {
        throw InvalidArgument("smoothing bandwidth must be > 0, got " +
                              std::to_string(sigma));
    }
}

void check_beta(const CoefficientVector& beta, const SurvivalDataset& data) {
    if (beta.values.size() != data.p()) {
        throw InvalidArgument("coefficient length " +
                              std::to_string(beta.values.size()) +
                              " does not match dataset p=" +
                              std::to_string(data.p()));
    }
}

}  // namespace

double SmoothingRule::sigma_for(int n) const {
    if (kind == Kind::Fixed) {
        check_sigma(fixed_sigma);
        return fixed_sigma;
    }
    if (n < 1) throw InvalidArgument("sigma rule needs n >= 1");
    if (kind == Kind::CubeRoot) {
        return std::pow(static_cast<double>(n), -1.0 / 3.0);
    }
    return 1.0 / std::sqrt(static_cast<double>(n));
}

PooledWeights PooledWeights::from_sizes(const std::vector<int>& sizes) {
    if (sizes.empty()) throw InvalidArgument("pooled weights: no cohorts");
    long long total = 0;
    for (int n : sizes) {
        if (n < 1) throw InvalidArgument("pooled weights: cohort size < 1");
        total += n;
    }
    PooledWeights w;
    w.alpha.reserve(sizes.size());
    for (int n : sizes) {
        w.alpha.push_back(static_cast<double>(n) / static_cast<double>(total));
    }
    return w;
}

void PooledWeights::validate() const {
    if (alpha.empty()) throw InvalidArgument("pooled weights: empty");
    double sum = 0.0;
    for (double a : alpha) {
        if (!(a >= 0.0)) throw InvalidArgument("pooled weights: negative weight");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw InvalidArgument("pooled weights: sum " + std::to_string(sum) +
                              " != 1");
    }
}

double sigmoid(double x, double sigma) {
    check_sigma(sigma);
    const double t = x / sigma;
    const double e = std::exp(-std::abs(t));
    return t >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

double sigmoid_d1(double x, double sigma) {
    check_sigma(sigma);
    const double t = x / sigma;
    const double e = std::exp(-std::abs(t));
    const double inv = 1.0 / (1.0 + e);
    return e * inv * inv / sigma;
}

double sigmoid_d2(double x, double sigma) {
    check_sigma(sigma);
    const double t = x / sigma;
    const double e = std::exp(-std::abs(t));
    const double inv = 1.0 / (1.0 + e);
    // S(1-S) = e/(1+e)^2 either way; 1-2S = -(1-e)/(1+e) for t >= 0.
    const double s1ms = e * inv * inv;
    const double one_minus_2s = (t >= 0.0 ? -(1.0 - e) : (1.0 - e)) * inv;
    return s1ms * one_minus_2s / (sigma * sigma);
}

double pr_objective(const CoefficientVector& beta, const SurvivalDataset& data) {
    check_beta(beta, data);
    const int n = data.n();
    const Eigen::VectorXd z = data.x() * beta.values;
    const auto& y = data.y();
    const auto& delta = data.delta();
    long long concordant = 0;
    for (int l = 0; l < n; ++l) {
        if (!delta[l]) continue;
        for (int i = 0; i < n; ++i) {
            if (i == l || !(y[i] > y[l])) continue;
            if (z[i] > z[l]) ++concordant;
        }
    }
    return static_cast<double>(concordant) /
           (static_cast<double>(n) * (n - 1));
}

double spr_objective(const CoefficientVector& beta, const SurvivalDataset& data,
                     double sigma) {
    check_beta(beta, data);
    SprLoss loss(data, sigma);
    return -loss.value(beta.values);
}

Eigen::VectorXd spr_gradient(const CoefficientVector& beta,
                             const SurvivalDataset& data, double sigma) {
    check_beta(beta, data);
    SprLoss loss(data, sigma);
    Eigen::VectorXd grad;
    loss.value_and_gradient(beta.values, grad);
    return -grad;
}

Eigen::MatrixXd spr_hessian(const CoefficientVector& beta,
                            const SurvivalDataset& data, double sigma) {
    check_beta(beta, data);
    check_sigma(sigma);
    const int n = data.n();
    const Eigen::VectorXd z = data.x() * beta.values;
    const auto& y = data.y();
    const auto& delta = data.delta();

    // sum_pairs S''(z_i - z_l) d d^T with d = x_i - x_l regroups to
    // X^T (diag(row) + diag(col) - A - A^T) X, A holding the pair weights.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int l = 0; l < n; ++l) {
        if (!delta[l]) continue;
        for (int i = 0; i < n; ++i) {
            if (i == l || !(y[i] > y[l])) continue;
            a(i, l) += sigmoid_d2(z[i] - z[l], sigma);
        }
    }
    Eigen::MatrixXd m = -a - a.transpose();
    const Eigen::VectorXd row = a.rowwise().sum();
    const Eigen::VectorXd col = a.colwise().sum();
    m.diagonal() += row + col;

    const double scale = -1.0 / (static_cast<double>(n) * (n - 1));
    Eigen::MatrixXd h = data.x().transpose() * m * data.x();
    h *= scale;
    // enforce exact symmetry lost to floating-point accumulation order
    return 0.5 * (h + h.transpose());
}

double pooled_spr_objective(const CoefficientVector& w,
                            const std::vector<const SurvivalDataset*>& cohorts,
                            const SmoothingRule& rule) {
    if (cohorts.empty()) throw InvalidArgument("pooled objective: no cohorts");
    std::vector<int> sizes;
    sizes.reserve(cohorts.size());
    for (const auto* c : cohorts) sizes.push_back(c->n());
    const PooledWeights weights = PooledWeights::from_sizes(sizes);
    double total = 0.0;
    for (std::size_t k = 0; k < cohorts.size(); ++k) {
        total += weights.alpha[k] *
                 spr_objective(w, *cohorts[k], rule.sigma_for(cohorts[k]->n()));
    }
    return total;
}

double c_index(const CoefficientVector& beta, const SurvivalDataset& data) {
    check_beta(beta, data);
    const int n = data.n();
    const Eigen::VectorXd z = data.x() * beta.values;
    const auto& y = data.y();
    const auto& delta = data.delta();
    long long concordant = 0, comparable = 0;
    for (int l = 0; l < n; ++l) {
        if (!delta[l]) continue;
        for (int i = 0; i < n; ++i) {
            if (i == l || !(y[i] > y[l])) continue;
            ++comparable;
            if (z[i] > z[l]) ++concordant;
        }
    }
    if (comparable == 0) {
        throw InvalidArgument("c_index: no comparable pairs in dataset '" +
                              data.label() + "'");
    }
    return static_cast<double>(concordant) / static_cast<double>(comparable);
}

SprLoss::SprLoss(const SurvivalDataset& data, double sigma)
    : data_(&data), sigma_(sigma) {
    check_sigma(sigma);
    const int n = data.n();
    inv_norm_ = 1.0 / (static_cast<double>(n) * (n - 1));
    const auto& y = data.y();
    const auto& delta = data.delta();
    for (int l = 0; l < n; ++l) {
        if (!delta[l]) continue;
        for (int i = 0; i < n; ++i) {
            if (i != l && y[i] > y[l]) {
                pair_i_.push_back(i);
                pair_l_.push_back(l);
            }
        }
    }
}

double SprLoss::value(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd z = data_->x() * beta;
    const double inv_sigma = 1.0 / sigma_;
    double total = 0.0;
    for (std::size_t k = 0; k < pair_i_.size(); ++k) {
        const double t = (z[pair_i_[k]] - z[pair_l_[k]]) * inv_sigma;
        const double e = std::exp(-std::abs(t));
        total += t >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    }
    return -total * inv_norm_;
}

double SprLoss::value_and_gradient(const Eigen::VectorXd& beta,
                                   Eigen::VectorXd& gradient) const {
    const Eigen::VectorXd z = data_->x() * beta;
    const double inv_sigma = 1.0 / sigma_;
    const int n = data_->n();
    Eigen::VectorXd accum = Eigen::VectorXd::Zero(n);
    double total = 0.0;
    for (std::size_t k = 0; k < pair_i_.size(); ++k) {
        const int i = pair_i_[k];
        const int l = pair_l_[k];
        const double t = (z[i] - z[l]) * inv_sigma;
        const double e = std::exp(-std::abs(t));
        const double inv = 1.0 / (1.0 + e);
        total += t >= 0.0 ? inv : e * inv;
        const double sp = e * inv * inv;  // sigma-less S'
        accum[i] += sp;
        accum[l] -= sp;
    }
    gradient.noalias() = data_->x().transpose() * accum;
    gradient *= -inv_norm_ * inv_sigma;
    return -total * inv_norm_;
}

PooledSprLoss::PooledSprLoss(const std::vector<const SurvivalDataset*>& cohorts,
                             const SmoothingRule& rule)
    : PooledSprLoss(cohorts, rule, [&] {
          std::vector<int> sizes;
          sizes.reserve(cohorts.size());
          for (const auto* c : cohorts) {
              if (c == nullptr) throw InvalidArgument("pooled loss: null cohort");
              sizes.push_back(c->n());
          }
          return PooledWeights::from_sizes(sizes);
      }()) {}

PooledSprLoss::PooledSprLoss(const std::vector<const SurvivalDataset*>& cohorts,
                             const SmoothingRule& rule, PooledWeights weights)
    : weights_(std::move(weights)) {
    if (cohorts.empty()) throw InvalidArgument("pooled loss: no cohorts");
    if (weights_.alpha.size() != cohorts.size()) {
        throw InvalidArgument("pooled loss: weight count != cohort count");
    }
    weights_.validate();
    const int p = cohorts.front()->p();
    losses_.reserve(cohorts.size());
    for (const auto* c : cohorts) {
        if (c->p() != p) {
            throw InvalidArgument("pooled loss: cohorts disagree on p");
        }
        losses_.emplace_back(*c, rule.sigma_for(c->n()));
        total_n_ += c->n();
    }
}

int PooledSprLoss::dimension() const {
    return losses_.front().dimension();
}

double PooledSprLoss::value(const Eigen::VectorXd& beta) const {
    double total = 0.0;
    for (std::size_t k = 0; k < losses_.size(); ++k) {
        total += weights_.alpha[k] * losses_[k].value(beta);
    }
    return total;
}

double PooledSprLoss::value_and_gradient(const Eigen::VectorXd& beta,
                                         Eigen::VectorXd& gradient) const {
    gradient = Eigen::VectorXd::Zero(dimension());
    Eigen::VectorXd part;
    double total = 0.0;
    for (std::size_t k = 0; k < losses_.size(); ++k) {
        total += weights_.alpha[k] * losses_[k].value_and_gradient(beta, part);
        gradient += weights_.alpha[k] * part;
    }
    return total;
}

}  // namespace sprtl
