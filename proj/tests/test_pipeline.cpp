#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "sprtl/errors.hpp"
#include "sprtl/experiment.hpp"
#include "sprtl/inference.hpp"
#include "sprtl/source_detection.hpp"
#include "sprtl/transfer.hpp"

using namespace sprtl;

namespace {

// Small but realistic scenario for end-to-end fitting tests.
ScenarioSpec tiny_scenario() {
    ScenarioSpec s;
    s.name = "tiny";
    s.n0 = 50;
    s.n_sources = {40, 40};
    s.p = 8;
    s.informative = {0};
    s.perturbation = {{1, 1, 0, 0.2}, {2, 2, 1, 0.9}};
    Eigen::VectorXd pattern = Eigen::VectorXd::Zero(8);
    pattern.head(4) << 1.0, -1.0, 0.8, -0.8;
    s.target_pattern = pattern;
    s.test_size = 20;
    s.seed = 3;
    return s;
}

SolverConfig fast_solver() {
    SolverConfig config;
    config.fabs.step_eps = 0.02;
    config.fabs.lambda_min_ratio = 0.1;
    return config;
}

}  // namespace

TEST_CASE("method names round-trip and reject unknowns") {
    const Method all[] = {Method::TargetOnly,  Method::NaivePooled,
                          Method::OraclePooled, Method::OracleTrans,
                          Method::AutoPooled,   Method::AutoTrans};
    for (Method m : all) {
        CHECK(parse_method(method_name(m)) == m);
    }
    CHECK_THROWS_AS(parse_method("Nonsense"), InvalidArgument);
}

TEST_CASE("estimate: method semantics on a shared replication") {
    const ReplicationData data = generate_replication(tiny_scenario(), 11);
    const SolverConfig solver = fast_solver();

    const TransferFit target_only =
        estimate(Method::TargetOnly, data.target, data.sources, std::nullopt, solver);
    CHECK(target_only.source_set.empty());
    CHECK(target_only.delta_hat.values.norm() == 0.0);
    CHECK((target_only.beta_hat.values - target_only.w_hat.values).norm() == 0.0);
    CHECK(target_only.beta_hat_normalized.normalized);
    CHECK(target_only.beta_hat_normalized.values.norm() ==
          doctest::Approx(1.0).epsilon(1e-12));

    // Oracle methods need the oracle set.
    CHECK_THROWS_AS(
        estimate(Method::OracleTrans, data.target, data.sources, std::nullopt, solver),
        InvalidArgument);

    // An empty oracle set degrades the transfer method to the target fit.
    const TransferFit degraded =
        estimate(Method::OracleTrans, data.target, data.sources,
                 std::optional<std::vector<int>>(std::vector<int>{}), solver);
    CHECK((degraded.beta_hat.values - target_only.beta_hat.values).norm() == 0.0);
    CHECK(degraded.source_set.empty());

    const TransferFit oracle_trans =
        estimate(Method::OracleTrans, data.target, data.sources,
                 std::optional<std::vector<int>>(std::vector<int>{0}), solver);
    CHECK(oracle_trans.source_set == std::vector<int>{0});
    CHECK((oracle_trans.beta_hat.values -
           (oracle_trans.w_hat.values + oracle_trans.delta_hat.values))
              .cwiseAbs()
              .maxCoeff() < 1e-14);
    CHECK(oracle_trans.fusion_info.path_length > 0);
    CHECK(oracle_trans.debias_info.path_length > 0);

    // Pooled methods skip the debias correction entirely.
    const TransferFit pooled =
        estimate(Method::OraclePooled, data.target, data.sources,
                 std::optional<std::vector<int>>(std::vector<int>{0}), solver);
    CHECK(pooled.delta_hat.values.norm() == 0.0);
    CHECK(pooled.debias_info.path_length == 0);

    const TransferFit naive =
        estimate(Method::NaivePooled, data.target, data.sources, std::nullopt, solver);
    CHECK(naive.source_set == std::vector<int>{0, 1});

    // Auto methods are deterministic in the configured seed.
    SolverConfig seeded = solver;
    seeded.detection_seed = 77;
    const TransferFit auto_a =
        estimate(Method::AutoTrans, data.target, data.sources, std::nullopt, seeded);
    const TransferFit auto_b =
        estimate(Method::AutoTrans, data.target, data.sources, std::nullopt, seeded);
    CHECK((auto_a.beta_hat.values - auto_b.beta_hat.values).norm() == 0.0);
    CHECK(auto_a.source_set == auto_b.source_set);
}

TEST_CASE("fusion step pools the requested cohorts") {
    const ReplicationData data = generate_replication(tiny_scenario(), 13);
    const SolverConfig solver = fast_solver();

    FitInfo info;
    const CoefficientVector alone =
        fusion_step(data.target, data.sources, {}, solver, &info);
    CHECK(info.path_length > 0);
    CHECK(info.selected_df ==
          static_cast<int>(support(alone.values).size()));

    // Pooling a helpful source changes the fit.
    const CoefficientVector pooled =
        fusion_step(data.target, data.sources, {0}, solver);
    CHECK((pooled.values - alone.values).norm() > 0.0);

    CHECK_THROWS_AS(fusion_step(data.target, data.sources, {5}, solver),
                    InvalidArgument);
}

TEST_CASE("debias step returns a small correction at the truth") {
    // With w fixed at the true coefficients the offset fit has little to add.
    const ScenarioSpec spec = tiny_scenario();
    const ReplicationData data = generate_replication(spec, 17);
    const SolverConfig solver = fast_solver();
    const CoefficientVector delta =
        debias_step(data.target, data.beta0, solver);
    CHECK(delta.values.norm() < 0.6);

    // The correction vanishes against the correction at a bad center.
    Eigen::VectorXd off = data.beta0.values;
    off[0] = -off[0];
    const CoefficientVector delta_off =
        debias_step(data.target, CoefficientVector{off, false}, solver);
    CHECK(delta.values.norm() < delta_off.values.norm());
}

TEST_CASE("fold assignment is balanced and deterministic") {
    const std::vector<int> folds = assign_folds(11, 3, 42);
    REQUIRE(folds.size() == 11);
    std::vector<int> counts(3, 0);
    for (int f : folds) {
        REQUIRE(f >= 0);
        REQUIRE(f < 3);
        counts[f] += 1;
    }
    const int lo = *std::min_element(counts.begin(), counts.end());
    const int hi = *std::max_element(counts.begin(), counts.end());
    CHECK(hi - lo <= 1);
    CHECK(assign_folds(11, 3, 42) == folds);
    CHECK(assign_folds(11, 3, 43) != folds);
    CHECK_THROWS_AS(assign_folds(2, 3, 1), InvalidArgument);
}

TEST_CASE("detection report structure and selection rule") {
    const ReplicationData data = generate_replication(tiny_scenario(), 19);
    const DetectionReport report =
        detect(data.target, data.sources, fast_solver(), 3, 5);

    REQUIRE(report.per_source.size() == 2);
    CHECK(report.fold_assignments.size() == static_cast<std::size_t>(data.target.n()));
    CHECK(report.seed == 5);
    for (const auto& d : report.per_source) {
        CHECK(d.gain == doctest::Approx(d.c_index - report.threshold).epsilon(1e-12));
        CHECK(d.selected == (d.gain > 0.0));
    }
    const auto selected = report.selected_set();
    for (std::size_t i = 1; i < selected.size(); ++i) {
        CHECK(selected[i - 1] < selected[i]);
    }

    const DetectionReport again =
        detect(data.target, data.sources, fast_solver(), 3, 5);
    CHECK(again.threshold == report.threshold);
    for (std::size_t k = 0; k < report.per_source.size(); ++k) {
        CHECK(again.per_source[k].c_index == report.per_source[k].c_index);
    }
}

TEST_CASE("clime inverse: closed forms, certificates, symmetry") {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
    const PrecisionEstimate id = clime_inverse(eye, 0.0);
    CHECK((id.theta - eye).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(id.feasibility_gap <= 1e-9);

    Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(3, 3);
    diag.diagonal() << 2.0, 0.5, 4.0;
    const PrecisionEstimate dinv = clime_inverse(diag, 0.0);
    CHECK(dinv.theta(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(dinv.theta(1, 1) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(dinv.theta(2, 2) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(std::abs(dinv.theta(0, 1)) < 1e-9);

    // Random well-conditioned H: the certificate holds at every gamma and
    // the estimate is symmetric by construction.
    const Eigen::MatrixXd m = 0.3 * Eigen::MatrixXd::Random(5, 5);
    const Eigen::MatrixXd h =
        Eigen::MatrixXd::Identity(5, 5) + 0.5 * (m + m.transpose());
    for (double gamma : {0.01, 0.05, 0.2}) {
        const PrecisionEstimate est = clime_inverse(h, gamma);
        CHECK(est.gamma == gamma);
        CHECK(est.feasibility_gap <= gamma + 1e-9);
        CHECK((est.theta - est.theta.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }

    // Small gamma converges to the true inverse.
    const Eigen::MatrixXd inverse = h.inverse();
    const PrecisionEstimate tight = clime_inverse(h, 1e-6);
    CHECK((tight.theta - inverse).cwiseAbs().maxCoeff() <
          10 * 1e-6 * inverse.cwiseAbs().rowwise().sum().maxCoeff() + 1e-7);

    // The zero matrix cannot reproduce any identity column.
    CHECK_THROWS_WITH_AS(clime_inverse(Eigen::MatrixXd::Zero(2, 2), 0.5),
                         doctest::Contains("column"), InfeasibleError);
}

TEST_CASE("default gamma grid spans the documented range") {
    const Eigen::MatrixXd m = 0.2 * Eigen::MatrixXd::Random(4, 4);
    const Eigen::MatrixXd h =
        Eigen::MatrixXd::Identity(4, 4) + 0.5 * (m + m.transpose());
    const std::vector<double> grid = default_gamma_grid(h);
    REQUIRE(grid.size() == 20);
    const double h_max = h.cwiseAbs().maxCoeff();
    const Eigen::MatrixXd scaled =
        Eigen::MatrixXd::Identity(4, 4) - h / h_max;
    CHECK(grid.front() == doctest::Approx(0.01 * h_max).epsilon(1e-12));
    CHECK(grid.back() ==
          doctest::Approx(scaled.cwiseAbs().maxCoeff()).epsilon(1e-12));
    for (std::size_t k = 1; k < grid.size(); ++k) CHECK(grid[k] > grid[k - 1]);
}

TEST_CASE("gamma selection: degenerate grid, determinism, near-optimality") {
    const ScenarioSpec spec = tiny_scenario();
    const ReplicationData data = generate_replication(spec, 23);
    const CoefficientVector beta = data.beta0;
    const SmoothingRule rule = SmoothingRule::cube_root();

    CHECK(select_gamma(data.target, beta, rule, 5, {0.25}, 9) == 0.25);

    const double a = select_gamma(data.target, beta, rule, 5, {}, 31);
    const double b = select_gamma(data.target, beta, rule, 5, {}, 31);
    CHECK(a == b);

    // The cross-validated choice lands within a factor of two (in max-norm
    // error against the full-sample inverse) of the best grid value.
    const Eigen::MatrixXd h =
        spr_hessian(beta, data.target, rule.sigma_for(data.target.n()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    REQUIRE(eig.eigenvalues().minCoeff() > 0.0);
    const Eigen::MatrixXd inverse = h.inverse();
    double best = 1e300, at_selected = -1.0;
    for (double gamma : default_gamma_grid(h)) {
        double err;
        try {
            err = (clime_inverse(h, gamma).theta - inverse).cwiseAbs().maxCoeff();
        } catch (const InfeasibleError&) {
            continue;
        }
        best = std::min(best, err);
        if (gamma == a) at_selected = err;
    }
    REQUIRE(at_selected >= 0.0);
    CHECK(at_selected <= 2.0 * best + 1e-9);
}

TEST_CASE("desparsify applies the one-step correction exactly") {
    const ReplicationData data = generate_replication(tiny_scenario(), 29);
    const SmoothingRule rule = SmoothingRule::root_n();
    const CoefficientVector beta = data.beta0;

    PrecisionEstimate zero;
    zero.theta = Eigen::MatrixXd::Zero(8, 8);
    const CoefficientVector same = desparsify(data.target, beta, zero, rule);
    CHECK((same.values - beta.values).norm() == 0.0);

    PrecisionEstimate theta;
    theta.theta = Eigen::MatrixXd::Identity(8, 8) * 0.7;
    const CoefficientVector moved = desparsify(data.target, beta, theta, rule);
    const Eigen::VectorXd eta =
        spr_gradient(beta, data.target, rule.sigma_for(data.target.n()));
    CHECK((moved.values - (beta.values + 0.7 * eta)).cwiseAbs().maxCoeff() <
          1e-14);

    PrecisionEstimate wrong;
    wrong.theta = Eigen::MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(desparsify(data.target, beta, wrong, rule), InvalidArgument);
}

TEST_CASE("sandwich variance: hand-size oracle match and properties") {
    // Hand-checkable n = 4 cohort.
    Eigen::VectorXd y(4);
    y << 1.0, 2.0, 3.0, 4.0;
    Eigen::MatrixXd x(4, 2);
    x << 0.5, -1.0, 1.5, 0.25, -0.75, 2.0, 0.1, -0.4;
    SurvivalDataset hand(y, {1, 0, 1, 1}, x, "hand");
    const CoefficientVector beta{(Eigen::VectorXd(2) << 0.8, -0.5).finished(),
                                 false};
    const SmoothingRule rule = SmoothingRule::fixed(0.6);
    const Eigen::MatrixXd g = variance_sandwich(hand, beta, rule);
    const Eigen::MatrixXd want = oracle::sandwich(beta.values, hand, 0.6);
    CHECK((g - want).cwiseAbs().maxCoeff() < 1e-12);

    // All censored: both kernel terms vanish.
    SurvivalDataset censored(y, std::vector<int>(4, 0), x, "cens");
    CHECK(variance_sandwich(censored, beta, rule).cwiseAbs().maxCoeff() == 0.0);

    // Symmetric PSD on random data.
    const auto data = oracle::random_dataset(20, 4, 443);
    const CoefficientVector rb{oracle::random_vector(4, 444), false};
    const Eigen::MatrixXd big = variance_sandwich(data, rb, SmoothingRule::root_n());
    CHECK((big - big.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(big);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("confidence intervals: plug-in width, ordering, clamping") {
    const CoefficientVector center{
        (Eigen::VectorXd(3) << 0.5, -0.25, 0.0).finished(), false};
    PrecisionEstimate theta;
    theta.theta = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);

    const InferenceResult res = confidence_intervals(center, theta, g, 100, 0.05);
    REQUIRE(res.intervals.size() == 3);
    for (int j = 0; j < 3; ++j) {
        const auto& ci = res.intervals[j];
        CHECK(ci.half_width ==
              doctest::Approx(1.959963984540054 / 10.0).epsilon(1e-9));
        CHECK(ci.lo <= res.beta_tilde.values[j]);
        CHECK(res.beta_tilde.values[j] <= ci.hi);
        CHECK_FALSE(ci.clamped);
    }

    // A (numerically) negative quadratic form clamps to zero width.
    const InferenceResult clamped =
        confidence_intervals(center, theta, -g, 100, 0.05);
    CHECK(clamped.intervals[0].clamped);
    CHECK(clamped.intervals[0].half_width == 0.0);

    // Near-degenerate alpha collapses the intervals.
    const InferenceResult thin =
        confidence_intervals(center, theta, g, 100, 0.999999);
    CHECK(thin.intervals[0].half_width < 1e-6);

    CHECK_THROWS_AS(confidence_intervals(center, theta, g, 100, 0.0),
                    InvalidArgument);
    CHECK_THROWS_AS(confidence_intervals(center, theta, g, 100, 1.0),
                    InvalidArgument);
}

TEST_CASE("normal quantile matches the cdf") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    for (double prob : {0.01, 0.2, 0.6, 0.95, 0.999}) {
        CHECK(normal_quantile(prob) + normal_quantile(1.0 - prob) ==
              doctest::Approx(0.0).epsilon(1e-10));
        CHECK(normal_cdf(normal_quantile(prob)) ==
              doctest::Approx(prob).epsilon(1e-10));
    }
    CHECK_THROWS_AS(normal_quantile(0.0), InvalidArgument);
    CHECK_THROWS_AS(normal_quantile(1.0), InvalidArgument);
}

TEST_CASE("inference pipeline: raw curvature, split bandwidths, pure mode") {
    const ReplicationData data = generate_replication(tiny_scenario(), 37);
    const TransferFit fit = estimate(Method::TargetOnly, data.target, {},
                                     std::nullopt, fast_solver());
    const CoefficientVector beta = fit.beta_hat_normalized;

    InferenceConfig config;
    config.fixed_gamma = 0.3;
    config.radial_ridge = 0.0;
    const InferencePipelineResult out =
        run_inference_pipeline(data.target, beta, config);

    // The stored gradient and curvature are exactly the kernel-layer values
    // at the configured bandwidths.
    const int n = data.target.n();
    const Eigen::VectorXd eta = spr_gradient(
        beta, data.target, config.score_smoothing.sigma_for(n));
    const Eigen::MatrixXd h = spr_hessian(
        beta, data.target, config.curvature_smoothing.sigma_for(n));
    CHECK((out.eta - eta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.h_hat - h).cwiseAbs().maxCoeff() == 0.0);

    // With the ridge off and gamma fixed, the precision matrix is the plain
    // constrained inverse of the raw curvature.
    const PrecisionEstimate direct = clime_inverse(out.h_hat, 0.3);
    CHECK((out.precision.theta - direct.theta).cwiseAbs().maxCoeff() == 0.0);

    // beta_tilde is the one-step correction through the chosen precision.
    const Eigen::VectorXd tilde =
        beta.values + out.precision.theta * out.eta;
    CHECK((out.result.beta_tilde.values - tilde).cwiseAbs().maxCoeff() < 1e-14);

    REQUIRE(out.result.intervals.size() == 8);
    for (const auto& ci : out.result.intervals) {
        CHECK(ci.lo <= ci.hi);
    }
}

TEST_CASE("coverage harness shapes and determinism on a shrunken study") {
    CoverageConfig config;
    config.scenario = tiny_scenario();
    config.scenario.n0 = 60;
    config.replications = 3;
    config.base_seed = 21;
    config.solver = fast_solver();
    config.inference.gamma_folds = 3;

    const CoverageReport report = run_coverage(config);
    CHECK(report.replications == 3);
    REQUIRE(report.coverage.size() == 8);
    REQUIRE(report.mean_half_width.size() == 8);
    REQUIRE(report.bias_initial.size() == 8);
    REQUIRE(report.bias_debiased.size() == 8);
    CHECK(report.truth.normalized);
    for (double c : report.coverage) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }
    for (double w : report.mean_half_width) CHECK(w > 0.0);
    CHECK(report.standardized.size() ==
          static_cast<std::size_t>(3 * 8 - report.skipped_zero_se));

    const CoverageReport again = run_coverage(config);
    CHECK(again.coverage == report.coverage);
    CHECK(again.standardized == report.standardized);
}
