#pragma once

#include <Eigen/Dense>

namespace sprtl {

struct LpResult {
    Eigen::VectorXd x;
    double objective = 0.0;
};

// Solves min c^T x subject to A x <= b, x >= 0 with a dense two-phase
// primal simplex. Small problems only (hundreds of rows/columns); this
// backs the per-column precision-matrix programs, which are exactly that
// size. Throws InfeasibleError when phase 1 cannot zero the artificials,
// ConvergenceError on unboundedness or iteration blowup.
LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c);

}  // namespace sprtl
