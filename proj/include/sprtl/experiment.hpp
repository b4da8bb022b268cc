#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sprtl/inference.hpp"
#include "sprtl/metrics.hpp"
#include "sprtl/transfer.hpp"

namespace sprtl {

// Built-in simulation designs S1..S7 (S7 at three helpful-source counts,
// spelled S7, S7-6, S7-9; S7-3 is an alias of S7). Unknown name throws.
ScenarioSpec scenario_preset(const std::string& name);
std::vector<std::string> scenario_names();

struct ExperimentConfig {
    ScenarioSpec scenario;
    std::vector<Method> methods;  // empty = all six, in declaration order
    int replications = 100;
    std::uint64_t base_seed = 1;
    std::string output_dir = ".";
    SolverConfig solver;
    int parallelism = 1;          // replication-level worker count
    bool record_timings = false;  // fill the seconds column (breaks byte-reproducibility)

    std::vector<Method> resolved_methods() const;
    void validate() const;
};

// JSON file with keys scenario (name, or object with optional "base" preset
// plus field overrides), methods, replications, base_seed, output_dir,
// parallelism, record_timings, solver{step_eps, lambda_min_ratio, max_steps,
// smoothing ("root_n" or {"fixed": sigma}), lambda_mode ("bic"/"rate"),
// rate_constant, detection_folds}. Missing keys keep defaults.
ExperimentConfig load_experiment_config(const std::string& path);

// One line of the results CSV. Empty optionals serialize as empty cells.
struct ResultRow {
    std::string scenario;
    std::string method;
    int replication = 0;
    std::optional<double> f1;
    std::optional<double> rmse_raw;
    std::optional<double> rmse_normalized;
    std::optional<double> c_index;
    std::optional<double> logrank;
    std::optional<double> recall;
    std::optional<double> seconds;
};

struct SummaryRow {
    std::string scenario;
    std::string method;
    std::string metric;
    int count = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation, 0 when count == 1
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
};

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);

// Per (scenario, method, metric) statistics over the rows that carry the
// metric; metric order follows the CSV columns.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

// Everything one simulated replication needs: the cohorts, the truth they
// were generated from, and an independent test set from the target model.
struct ReplicationData {
    SurvivalDataset target;
    std::vector<SurvivalDataset> sources;
    std::vector<CoefficientVector> source_betas;  // normalized, one per source
    CoefficientVector beta0;                      // normalized target truth
    SurvivalDataset test;
};

ReplicationData generate_replication(const ScenarioSpec& spec, std::uint64_t seed);

struct ScenarioArtifacts {
    std::vector<ResultRow> rows;
    std::vector<SummaryRow> summary;
    std::string results_path;
    std::string summary_path;
    std::string metadata_path;
};

// The simulation study: per replication (seed = base_seed + r) fresh data,
// every requested method fit and scored, rows plus a summary and a metadata
// sidecar (timestamps live only there) written under output_dir.
ScenarioArtifacts run_scenario(const ExperimentConfig& config);

struct SplitEvalConfig {
    double split_fraction = 0.2;  // held-out share of the target cohort
    int repetitions = 100;
    std::uint64_t seed = 1;
    std::vector<Method> methods;  // empty = TargetOnly, NaivePooled, AutoPooled, AutoTrans
    std::optional<std::vector<int>> oracle_set;  // needed only for Oracle* methods
    SolverConfig solver;
    std::string output_dir = ".";
    std::string label = "split";
    int parallelism = 1;
    bool record_timings = false;
};

// Repeated random-splitting evaluation on a fixed target cohort: per
// repetition the target is split, methods fit on the training part (plus
// all sources), and scored by C-index and log-rank on the held-out part.
ScenarioArtifacts run_splitting_eval(const SurvivalDataset& target,
                                     const std::vector<SurvivalDataset>& sources,
                                     const SplitEvalConfig& config);

struct CoverageConfig {
    ScenarioSpec scenario;
    // First-stage estimator whose normalized fit feeds the intervals. The
    // construction targets the transfer estimate; with no informative
    // sources in the scenario this degrades to the target-only fit.
    Method method = Method::OracleTrans;
    int replications = 200;
    std::uint64_t base_seed = 1;
    SolverConfig solver;
    InferenceConfig inference;
    int parallelism = 1;
};

// Interval-quality accounting over repeated simulation.
struct CoverageReport {
    CoefficientVector truth;
    std::vector<double> coverage;         // per coordinate, fraction covered
    std::vector<double> mean_half_width;  // per coordinate
    std::vector<double> bias_initial;     // mean beta_hat_j - beta_j
    std::vector<double> bias_debiased;    // mean beta_tilde_j - beta_j
    std::vector<double> standardized;     // pooled (beta_tilde_j - beta_j) / se_j
    int replications = 0;
    int skipped_zero_se = 0;  // standardized values dropped for zero half-width
};

CoverageReport run_coverage(const CoverageConfig& config);

// CSV columns: coordinate, truth, coverage, mean_half_width, bias_initial,
// bias_debiased.
void write_coverage_csv(const std::string& path, const CoverageReport& report);

// One boxplot SVG per metric column that has data in the results CSV,
// grouped by method (prefixed by scenario when several appear). Returns
// the written paths; a CSV with no data rows is an error.
std::vector<std::string> emit_plots(const std::string& results_csv,
                                    const std::string& output_dir);

}  // namespace sprtl
