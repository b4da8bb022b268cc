#pragma once

// Brute-force reference implementations used only by the tests. Everything
// here is a literal double loop over ordered pairs, written from the formula
// definitions and sharing no code with the library. Slow on purpose.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "sprtl/objective.hpp"
#include "sprtl/survival_data.hpp"

namespace oracle {

inline double sig(double z, double sigma) {
    return 1.0 / (1.0 + std::exp(-z / sigma));
}

inline double sig_d1(double z, double sigma) {
    const double s = sig(z, sigma);
    return s * (1.0 - s) / sigma;
}

inline double sig_d2(double z, double sigma) {
    const double s = sig(z, sigma);
    return s * (1.0 - s) * (1.0 - 2.0 * s) / (sigma * sigma);
}

// (1/(n(n-1))) sum over ordered pairs i != l of
//   delta_l I(Y_i > Y_l) I(beta'X_i > beta'X_l).
inline double pr(const Eigen::VectorXd& beta, const sprtl::SurvivalDataset& d) {
    const int n = d.n();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int l = 0; l < n; ++l) {
            if (i == l || !d.delta()[l] || !(d.y()[i] > d.y()[l])) continue;
            const double zi = d.x().row(i).dot(beta);
            const double zl = d.x().row(l).dot(beta);
            if (zi > zl) total += 1.0;
        }
    }
    return total / (static_cast<double>(n) * (n - 1));
}

// Same sum with the score indicator replaced by the sigmoid.
inline double spr(const Eigen::VectorXd& beta, const sprtl::SurvivalDataset& d,
                  double sigma) {
    const int n = d.n();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int l = 0; l < n; ++l) {
            if (i == l || !d.delta()[l] || !(d.y()[i] > d.y()[l])) continue;
            const double zi = d.x().row(i).dot(beta);
            const double zl = d.x().row(l).dot(beta);
            total += sig(zi - zl, sigma);
        }
    }
    return total / (static_cast<double>(n) * (n - 1));
}

inline Eigen::VectorXd spr_grad(const Eigen::VectorXd& beta,
                                const sprtl::SurvivalDataset& d, double sigma) {
    const int n = d.n();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(beta.size());
    for (int i = 0; i < n; ++i) {
        for (int l = 0; l < n; ++l) {
            if (i == l || !d.delta()[l] || !(d.y()[i] > d.y()[l])) continue;
            const Eigen::VectorXd diff = d.x().row(i) - d.x().row(l);
            g += sig_d1(diff.dot(beta), sigma) * diff;
        }
    }
    return g / (static_cast<double>(n) * (n - 1));
}

// Minus the second derivative matrix of the smoothed objective.
inline Eigen::MatrixXd spr_hess(const Eigen::VectorXd& beta,
                                const sprtl::SurvivalDataset& d, double sigma) {
    const int n = d.n();
    const int p = static_cast<int>(beta.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
        for (int l = 0; l < n; ++l) {
            if (i == l || !d.delta()[l] || !(d.y()[i] > d.y()[l])) continue;
            const Eigen::VectorXd diff = d.x().row(i) - d.x().row(l);
            h -= sig_d2(diff.dot(beta), sigma) * diff * diff.transpose();
        }
    }
    return h / (static_cast<double>(n) * (n - 1));
}

// Concordant comparable pairs over comparable pairs.
inline double cindex(const Eigen::VectorXd& beta, const sprtl::SurvivalDataset& d) {
    const int n = d.n();
    double concordant = 0.0, comparable = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int l = 0; l < n; ++l) {
            if (i == l || !d.delta()[l] || !(d.y()[i] > d.y()[l])) continue;
            comparable += 1.0;
            const double zi = d.x().row(i).dot(beta);
            const double zl = d.x().row(l).dot(beta);
            if (zi > zl) concordant += 1.0;
        }
    }
    return concordant / comparable;
}

// G = n^{-1} sum_l t_l t_l', with t_l the n^{-1}-averaged two-term kernel:
//   first term over i:  delta_i I(y_l >= Y_i) S'(z_l - z_i) (x_l - x_i)
//   second term over i: delta_l I(Y_i >= y_l) S'(z_i - z_l) (x_i - x_l).
inline Eigen::MatrixXd sandwich(const Eigen::VectorXd& beta,
                                const sprtl::SurvivalDataset& d, double sigma) {
    const int n = d.n();
    const int p = static_cast<int>(beta.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
    for (int l = 0; l < n; ++l) {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(p);
        const double zl = d.x().row(l).dot(beta);
        for (int i = 0; i < n; ++i) {
            if (i == l) continue;
            const double zi = d.x().row(i).dot(beta);
            if (d.delta()[i] && d.y()[l] >= d.y()[i]) {
                t += sig_d1(zl - zi, sigma) *
                     (d.x().row(l) - d.x().row(i)).transpose();
            }
            if (d.delta()[l] && d.y()[i] >= d.y()[l]) {
                t += sig_d1(zi - zl, sigma) *
                     (d.x().row(i) - d.x().row(l)).transpose();
            }
        }
        t /= static_cast<double>(n);
        g += t * t.transpose();
    }
    return g / static_cast<double>(n);
}

// Fraction of strictly ordered pairs of a whose order b preserves.
inline double erc_pairs(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const int p = static_cast<int>(a.size());
    double hit = 0.0, total = 0.0;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            if (i == j || !(a[i] > a[j])) continue;
            total += 1.0;
            if (b[i] > b[j]) hit += 1.0;
        }
    }
    return hit / total;
}

// Central finite differences of a scalar function of a vector.
template <typename F>
Eigen::VectorXd fd_gradient(const F& f, const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    for (int j = 0; j < x.size(); ++j) {
        Eigen::VectorXd hi = x, lo = x;
        hi[j] += h;
        lo[j] -= h;
        g[j] = (f(hi) - f(lo)) / (2.0 * h);
    }
    return g;
}

// Central finite differences of a vector function, column j = df/dx_j.
template <typename F>
Eigen::MatrixXd fd_jacobian(const F& f, const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd jac(f0.size(), x.size());
    for (int j = 0; j < x.size(); ++j) {
        Eigen::VectorXd hi = x, lo = x;
        hi[j] += h;
        lo[j] -= h;
        jac.col(j) = (f(hi) - f(lo)) / (2.0 * h);
    }
    return jac;
}

// Quadratic test objective 0.5 b'Ab - c'b, gradient Ab - c. With A = I the
// penalized minimizer has the soft-threshold closed form.
class QuadraticLoss final : public sprtl::SmoothObjective {
public:
    QuadraticLoss(Eigen::MatrixXd a, Eigen::VectorXd c)
        : a_(std::move(a)), c_(std::move(c)) {}

    int dimension() const override { return static_cast<int>(c_.size()); }

    double value(const Eigen::VectorXd& point) const override {
        return 0.5 * point.dot(a_ * point) - c_.dot(point);
    }

    double value_and_gradient(const Eigen::VectorXd& point,
                              Eigen::VectorXd& gradient) const override {
        gradient = a_ * point - c_;
        return value(point);
    }

private:
    Eigen::MatrixXd a_;
    Eigen::VectorXd c_;
};

inline double soft_threshold(double v, double lambda) {
    if (v > lambda) return v - lambda;
    if (v < -lambda) return v + lambda;
    return 0.0;
}

// Cyclic coordinate descent for min 0.5 b'Ab - c'b + lambda ||b||_1,
// run to convergence. Reference solution for path checks.
inline Eigen::VectorXd cd_lasso(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                                double lambda, int sweeps = 2000) {
    const int p = static_cast<int>(c.size());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double change = 0.0;
        for (int j = 0; j < p; ++j) {
            double rest = c[j];
            for (int k = 0; k < p; ++k) {
                if (k != j) rest -= a(j, k) * b[k];
            }
            const double updated = soft_threshold(rest, lambda) / a(j, j);
            change = std::max(change, std::abs(updated - b[j]));
            b[j] = updated;
        }
        if (change < 1e-14) break;
    }
    return b;
}

// Small random survival dataset with its own generator, independent of the
// library RNG. Roughly 70% events; times positive; covariates N(0,1).
inline sprtl::SurvivalDataset random_dataset(int n, int p, unsigned seed,
                                             double event_rate = 0.7) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd y(n);
    std::vector<int> delta(n);
    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i) {
        y[i] = -std::log(1.0 - unif(gen) * 0.9999) + 0.01;
        delta[i] = unif(gen) < event_rate ? 1 : 0;
        for (int j = 0; j < p; ++j) x(i, j) = normal(gen);
    }
    // Guarantee at least one comparable pair regardless of the draws.
    delta[0] = 1;
    y[0] = 0.005;
    return sprtl::SurvivalDataset(std::move(y), std::move(delta), std::move(x),
                                  "test");
}

inline Eigen::VectorXd random_vector(int p, unsigned seed, double scale = 1.0) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXd v(p);
    for (int j = 0; j < p; ++j) v[j] = normal(gen);
    return v;
}

inline double rel_error(double got, double want) {
    const double denom = std::max(std::abs(want), 1e-12);
    return std::abs(got - want) / denom;
}

inline double rel_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
    const double denom = std::max(want.cwiseAbs().maxCoeff(), 1e-12);
    return (got - want).cwiseAbs().maxCoeff() / denom;
}

inline double rel_error(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
    const double denom = std::max(want.cwiseAbs().maxCoeff(), 1e-12);
    return (got - want).cwiseAbs().maxCoeff() / denom;
}

}  // namespace oracle
