#include "sprtl/lp.hpp"

#include <cmath>
#include <vector>

#include "sprtl/errors.hpp"

namespace sprtl {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr int kMaxIterations = 50000;
constexpr int kBlandAfter = 10000;

struct Tableau {
    Eigen::MatrixXd t;       // m x ncols, kept canonical w.r.t. basis
    Eigen::VectorXd rhs;     // m, >= 0 throughout
    Eigen::RowVectorXd cost; // reduced costs, ncols
    double objective = 0.0;
    std::vector<int> basis;  // basic column per row

    void canonicalize(const Eigen::RowVectorXd& phase_cost) {
        cost = phase_cost;
        objective = 0.0;
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const double f = cost[basis[i]];
            if (f != 0.0) {
                cost -= f * t.row(i);
                objective += f * rhs[i];
            }
        }
    }

    void pivot(int row, int col) {
        const double piv = t(row, col);
        t.row(row) /= piv;
        rhs[row] /= piv;
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            if (i == row) continue;
            const double f = t(i, col);
            if (f != 0.0) {
                t.row(i) -= f * t.row(row);
                rhs[i] -= f * rhs[row];
                if (rhs[i] < 0.0 && rhs[i] > -1e-11) rhs[i] = 0.0;
            }
        }
        const double f = cost[col];
        objective += f * rhs[row];
        cost -= f * t.row(row);
        basis[static_cast<std::size_t>(row)] = col;
    }

    // Runs simplex iterations until optimal. `allowed` masks columns that may
    // enter (artificials are barred in phase 2).
    void iterate(const std::vector<char>& allowed, int& iterations) {
        const int m = static_cast<int>(t.rows());
        const int ncols = static_cast<int>(t.cols());
        for (;;) {
            if (++iterations > kMaxIterations) {
                throw ConvergenceError("simplex: iteration limit reached");
            }
            const bool bland = iterations > kBlandAfter;
            int enter = -1;
            double best = -kCostTol;
            for (int j = 0; j < ncols; ++j) {
                if (!allowed[j]) continue;
                if (cost[j] < best) {
                    enter = j;
                    if (bland) break;  // first improving index
                    best = cost[j];
                }
            }
            if (enter < 0) return;  // optimal

            int leave = -1;
            double best_ratio = 0.0;
            for (int i = 0; i < m; ++i) {
                const double a = t(i, enter);
                if (a > kPivotTol) {
                    const double ratio = rhs[i] / a;
                    if (leave < 0 || ratio < best_ratio - 1e-12 ||
                        (std::abs(ratio - best_ratio) <= 1e-12 &&
                         basis[i] < basis[leave])) {
                        leave = i;
                        best_ratio = ratio;
                    }
                }
            }
            if (leave < 0) {
                throw ConvergenceError("simplex: objective unbounded below");
            }
            pivot(leave, enter);
        }
    }
};

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    if (b.size() != m || c.size() != n || m < 1 || n < 1) {
        throw InvalidArgument("solve_lp: dimension mismatch");
    }

    // Rows with negative b are negated so every right-hand side is
    // nonnegative; those rows get -1 slacks and need an artificial variable.
    std::vector<int> artificial_rows;
    for (int i = 0; i < m; ++i) {
        if (b[i] < 0.0) artificial_rows.push_back(i);
    }
    const int n_art = static_cast<int>(artificial_rows.size());
    const int ncols = n + m + n_art;

    Tableau tab;
    tab.t = Eigen::MatrixXd::Zero(m, ncols);
    tab.rhs = b;
    tab.basis.assign(m, -1);
    tab.t.leftCols(n) = a;
    for (int i = 0; i < m; ++i) tab.t(i, n + i) = 1.0;
    for (int i = 0; i < m; ++i) {
        if (b[i] < 0.0) {
            tab.t.row(i) = -tab.t.row(i);
            tab.rhs[i] = -tab.rhs[i];
        } else {
            tab.basis[i] = n + i;  // slack
        }
    }
    for (int k = 0; k < n_art; ++k) {
        const int i = artificial_rows[k];
        tab.t(i, n + m + k) = 1.0;
        tab.basis[i] = n + m + k;
    }

    int iterations = 0;
    const double b_scale = std::max(1.0, b.cwiseAbs().maxCoeff());

    if (n_art > 0) {
        Eigen::RowVectorXd phase1 = Eigen::RowVectorXd::Zero(ncols);
        phase1.tail(n_art).setOnes();
        tab.canonicalize(phase1);
        std::vector<char> allowed(ncols, 1);
        tab.iterate(allowed, iterations);
        if (tab.objective > 1e-8 * b_scale) {
            throw InfeasibleError("solve_lp: constraints infeasible (phase-1 "
                                  "residual " + std::to_string(tab.objective) + ")");
        }
        // Pivot any still-basic artificial out on a real column; a row where
        // none exists is redundant and its artificial stays basic at level 0.
        for (int i = 0; i < m; ++i) {
            if (tab.basis[i] < n + m) continue;
            for (int j = 0; j < n + m; ++j) {
                if (std::abs(tab.t(i, j)) > kPivotTol) {
                    tab.pivot(i, j);
                    break;
                }
            }
        }
    }

    Eigen::RowVectorXd phase2 = Eigen::RowVectorXd::Zero(ncols);
    phase2.head(n) = c.transpose();
    tab.canonicalize(phase2);
    std::vector<char> allowed(ncols, 1);
    for (int k = 0; k < n_art; ++k) allowed[n + m + k] = 0;
    tab.iterate(allowed, iterations);

    LpResult result;
    result.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) {
        if (tab.basis[i] < n) result.x[tab.basis[i]] = tab.rhs[i];
    }
    result.objective = c.dot(result.x);
    return result;
}

}  // namespace sprtl
