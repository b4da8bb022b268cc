#include "sprtl/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sprtl/csv.hpp"
#include "sprtl/errors.hpp"
#include "sprtl/lp.hpp"
#include "sprtl/source_detection.hpp"

namespace sprtl {

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// H + factor * mean-eigenvalue * u u^T along the (normalized) estimate.
// Restores curvature in the direction the rank objective leaves flat.
Eigen::MatrixXd ridge_scale_direction(const Eigen::MatrixXd& h,
                                      const Eigen::VectorXd& beta,
                                      double factor) {
    const double norm = beta.norm();
    if (!(factor > 0.0) || norm == 0.0) return h;
    const Eigen::VectorXd u = beta / norm;
    const double level = factor * h.trace() / static_cast<double>(h.rows());
    return h + level * u * u.transpose();
}

Eigen::VectorXd clime_column(const Eigen::MatrixXd& h, int j, double gamma) {
    const int p = static_cast<int>(h.rows());
    // theta = u - v with u, v >= 0; |H theta - e_j| <= gamma splits into
    // [H, -H] x <= gamma + e_j and [-H, H] x <= gamma - e_j.
    Eigen::MatrixXd a(2 * p, 2 * p);
    a.topLeftCorner(p, p) = h;
    a.topRightCorner(p, p) = -h;
    a.bottomLeftCorner(p, p) = -h;
    a.bottomRightCorner(p, p) = h;
    Eigen::VectorXd b(2 * p);
    b.head(p).setConstant(gamma);
    b.tail(p).setConstant(gamma);
    b[j] += 1.0;
    b[p + j] -= 1.0;
    const Eigen::VectorXd c = Eigen::VectorXd::Ones(2 * p);
    LpResult lp;
    try {
        lp = solve_lp(a, b, c);
    } catch (const InfeasibleError& err) {
        throw InfeasibleError("clime_inverse: column " + std::to_string(j + 1) +
                              " infeasible at gamma " + std::to_string(gamma) +
                              " (" + err.what() + ")");
    }
    return lp.x.head(p) - lp.x.tail(p);
}

}  // namespace

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0)) {
        throw InvalidArgument("normal_quantile: probability must be in (0,1)");
    }
    // Acklam's rational approximation, then one Newton step on the CDF.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double bq[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double cq[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00, 2.938163982698783e+00};
    static const double dq[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (prob < p_low) {
        const double q = std::sqrt(-2.0 * std::log(prob));
        x = (((((cq[0] * q + cq[1]) * q + cq[2]) * q + cq[3]) * q + cq[4]) * q +
             cq[5]) /
            ((((dq[0] * q + dq[1]) * q + dq[2]) * q + dq[3]) * q + 1.0);
    } else if (prob <= 1.0 - p_low) {
        const double q = prob - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
            q /
            (((((bq[0] * r + bq[1]) * r + bq[2]) * r + bq[3]) * r + bq[4]) * r +
             1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
        x = -(((((cq[0] * q + cq[1]) * q + cq[2]) * q + cq[3]) * q + cq[4]) * q +
              cq[5]) /
            ((((dq[0] * q + dq[1]) * q + dq[2]) * q + dq[3]) * q + 1.0);
    }
    // Newton refinement: Phi(x) - prob over the density.
    const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
    const double pdf =
        std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    if (pdf > 0.0) x -= (cdf - prob) / pdf;
    return x;
}

PrecisionEstimate clime_inverse(const Eigen::MatrixXd& h, double gamma) {
    const int p = static_cast<int>(h.rows());
    if (h.cols() != p || p < 1) {
        throw InvalidArgument("clime_inverse: matrix must be square");
    }
    if (!(gamma >= 0.0)) {
        throw InvalidArgument("clime_inverse: gamma must be >= 0");
    }

    Eigen::MatrixXd raw(p, p);
    for (int j = 0; j < p; ++j) {
        raw.col(j) = clime_column(h, j, gamma);
    }

    PrecisionEstimate est;
    est.gamma = gamma;
    est.feasibility_gap =
        max_abs(raw * h - Eigen::MatrixXd::Identity(p, p));

    est.theta = raw;
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            const double keep = std::abs(raw(i, j)) <= std::abs(raw(j, i))
                                    ? raw(i, j)
                                    : raw(j, i);
            est.theta(i, j) = keep;
            est.theta(j, i) = keep;
        }
    }
    est.symmetrized_gap =
        max_abs(est.theta * h - Eigen::MatrixXd::Identity(p, p));
    return est;
}

std::vector<double> default_gamma_grid(const Eigen::MatrixXd& h, int size) {
    if (size < 1) throw InvalidArgument("default_gamma_grid: size must be >= 1");
    const double h_max = max_abs(h);
    if (h_max == 0.0) {
        throw InvalidArgument("default_gamma_grid: curvature matrix is zero");
    }
    const int p = static_cast<int>(h.rows());
    const double lo = 0.01 * h_max;
    const double hi_raw =
        max_abs(Eigen::MatrixXd::Identity(p, p) - h / h_max);
    const double hi = std::max(hi_raw, lo);
    std::vector<double> grid;
    grid.reserve(size);
    if (size == 1 || hi == lo) {
        grid.push_back(hi);
        return grid;
    }
    const double step = std::log(hi / lo) / (size - 1);
    for (int i = 0; i < size; ++i) {
        grid.push_back(lo * std::exp(step * i));
    }
    return grid;
}

double select_gamma(const SurvivalDataset& target,
                    const CoefficientVector& beta_hat,
                    const SmoothingRule& rule, int folds,
                    std::vector<double> grid, std::uint64_t seed,
                    double radial_ridge) {
    if (folds < 2) throw InvalidArgument("select_gamma: need at least 2 folds");
    // One bandwidth throughout: every fold curvature estimates the same
    // smoothed matrix as the full-sample one being inverted.
    const double sigma = rule.sigma_for(target.n());
    if (grid.empty()) {
        const Eigen::MatrixXd h_full = ridge_scale_direction(
            spr_hessian(beta_hat, target, sigma), beta_hat.values, radial_ridge);
        grid = default_gamma_grid(h_full);
    }
    std::sort(grid.begin(), grid.end());

    const std::vector<int> fold_of = assign_folds(target.n(), folds, seed);

    std::vector<double> score(grid.size(), 0.0);
    std::vector<char> feasible(grid.size(), 1);
    for (int r = 0; r < folds; ++r) {
        std::vector<int> train_idx, valid_idx;
        for (int i = 0; i < target.n(); ++i) {
            (fold_of[i] == r ? valid_idx : train_idx).push_back(i);
        }
        const SurvivalDataset train =
            subset(target, train_idx, target.label() + "/gamma-train");
        const SurvivalDataset valid =
            subset(target, valid_idx, target.label() + "/gamma-valid");
        const Eigen::MatrixXd h_train = ridge_scale_direction(
            spr_hessian(beta_hat, train, sigma), beta_hat.values, radial_ridge);
        const Eigen::MatrixXd h_valid = ridge_scale_direction(
            spr_hessian(beta_hat, valid, sigma), beta_hat.values, radial_ridge);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (!feasible[g]) continue;
            try {
                const PrecisionEstimate est = clime_inverse(h_train, grid[g]);
                // Stein loss against the held-out curvature; minimized in
                // expectation at the true inverse. A non-positive-definite
                // precision estimate cannot be scored and drops out.
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.theta);
                if (eig.eigenvalues().minCoeff() <= 0.0) {
                    feasible[g] = 0;
                    continue;
                }
                score[g] += (est.theta * h_valid).trace() -
                            eig.eigenvalues().array().log().sum();
            } catch (const InfeasibleError&) {
                feasible[g] = 0;
            }
        }
    }

    int best = -1;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (!feasible[g]) continue;
        // <= prefers the later (larger) gamma on ties
        if (best < 0 || score[g] <= score[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(g);
        }
    }
    if (best < 0) {
        throw InfeasibleError(
            "select_gamma: every grid value was infeasible on some fold");
    }
    return grid[static_cast<std::size_t>(best)];
}

CoefficientVector desparsify(const SurvivalDataset& target,
                             const CoefficientVector& beta_hat,
                             const PrecisionEstimate& theta,
                             const SmoothingRule& rule) {
    if (beta_hat.values.size() != target.p()) {
        throw InvalidArgument("desparsify: beta length != p");
    }
    if (theta.theta.rows() != target.p() || theta.theta.cols() != target.p()) {
        throw InvalidArgument("desparsify: precision matrix is not p x p");
    }
    const Eigen::VectorXd eta =
        spr_gradient(beta_hat, target, rule.sigma_for(target.n()));
    return CoefficientVector{beta_hat.values + theta.theta * eta, false};
}

Eigen::MatrixXd variance_sandwich(const SurvivalDataset& target,
                                  const CoefficientVector& beta_hat,
                                  const SmoothingRule& rule) {
    if (beta_hat.values.size() != target.p()) {
        throw InvalidArgument("variance_sandwich: beta length != p");
    }
    const int n = target.n();
    const double sigma = rule.sigma_for(n);
    const Eigen::VectorXd z = target.x() * beta_hat.values;
    const auto& y = target.y();
    const auto& delta = target.delta();

    // Row l of the kernel matrix: grad_tau_l = sum_i w_li (x_l - x_i) / n,
    // with w_li combining both indicator terms; S' is even, so one
    // evaluation per (l, i) serves both.
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (int l = 0; l < n; ++l) {
        for (int i = 0; i < n; ++i) {
            if (i == l) continue;
            double combined = 0.0;
            if (delta[i] && y[l] >= y[i]) combined += 1.0;
            if (delta[l] && y[i] >= y[l]) combined -= 1.0;
            if (combined != 0.0) {
                w(l, i) = combined * sigmoid_d1(z[l] - z[i], sigma);
            }
        }
    }
    Eigen::MatrixXd coeff = -w;
    coeff.diagonal() += w.rowwise().sum();
    const Eigen::MatrixXd t = (coeff * target.x()) / static_cast<double>(n);
    Eigen::MatrixXd g = t.transpose() * t / static_cast<double>(n);
    return 0.5 * (g + g.transpose());
}

InferenceResult confidence_intervals(const CoefficientVector& beta_tilde,
                                     const PrecisionEstimate& theta,
                                     const Eigen::MatrixXd& g, int n0,
                                     double alpha) {
    const int p = static_cast<int>(beta_tilde.values.size());
    if (theta.theta.rows() != p || g.rows() != p || g.cols() != p) {
        throw InvalidArgument("confidence_intervals: dimension mismatch");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidArgument("confidence_intervals: alpha must be in (0,1)");
    }
    if (n0 < 1) throw InvalidArgument("confidence_intervals: n0 must be >= 1");

    const double quantile = normal_quantile(1.0 - alpha / 2.0);
    InferenceResult result;
    result.beta_tilde = beta_tilde;
    result.g_hat = g;
    result.alpha = alpha;
    result.intervals.resize(p);
    const double root_n = std::sqrt(static_cast<double>(n0));
    for (int j = 0; j < p; ++j) {
        const Eigen::VectorXd tj = theta.theta.row(j).transpose();
        double form = tj.dot(g * tj);
        bool clamped = false;
        if (form < 0.0) {
            form = 0.0;
            clamped = true;
        }
        const double half = std::sqrt(form) * quantile / root_n;
        result.intervals[j] = CoordinateInterval{
            beta_tilde.values[j] - half, beta_tilde.values[j] + half, half,
            clamped};
    }
    return result;
}

InferencePipelineResult run_inference_pipeline(const SurvivalDataset& target,
                                               const CoefficientVector& beta_hat,
                                               const InferenceConfig& config) {
    InferencePipelineResult out;
    const double sigma_score = config.score_smoothing.sigma_for(target.n());
    const double sigma_curv = config.curvature_smoothing.sigma_for(target.n());
    out.eta = spr_gradient(beta_hat, target, sigma_score);
    out.h_hat = spr_hessian(beta_hat, target, sigma_curv);

    double gamma = config.fixed_gamma;
    if (!(gamma > 0.0)) {
        gamma = select_gamma(target, beta_hat, config.curvature_smoothing,
                             config.gamma_folds, config.gamma_grid, config.seed,
                             config.radial_ridge);
    }
    const Eigen::MatrixXd h_used = ridge_scale_direction(
        out.h_hat, beta_hat.values, config.radial_ridge);
    out.precision = clime_inverse(h_used, gamma);

    const CoefficientVector beta_tilde =
        desparsify(target, beta_hat, out.precision, config.score_smoothing);
    const Eigen::MatrixXd g =
        variance_sandwich(target, beta_hat, config.score_smoothing);
    out.result = confidence_intervals(beta_tilde, out.precision, g, target.n(),
                                      config.alpha);
    return out;
}

void write_inference_csv(const std::string& path, const InferenceResult& result) {
    std::vector<std::string> lines;
    lines.push_back("coordinate,estimate,lo,hi,half_width,clamped_flag");
    for (std::size_t j = 0; j < result.intervals.size(); ++j) {
        const auto& ci = result.intervals[j];
        lines.push_back(csv::join({std::to_string(j + 1),
                                   csv::format_double(result.beta_tilde.values[j]),
                                   csv::format_double(ci.lo),
                                   csv::format_double(ci.hi),
                                   csv::format_double(ci.half_width),
                                   ci.clamped ? "1" : "0"}));
    }
    csv::write_lines(path, lines);
}

}  // namespace sprtl
