#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sprtl/csv.hpp"
#include "sprtl/errors.hpp"
#include "sprtl/experiment.hpp"
#include "sprtl/source_detection.hpp"

namespace {

using nlohmann::json;
using namespace sprtl;

std::string default_output_dir() {
    const char* env = std::getenv("SPRTL_OUTPUT_DIR");
    return env && *env ? env : ".";
}

// Solver knobs shared by every fitting subcommand. Only flags the user
// actually passed override the config-file or built-in defaults.
struct SolverCli {
    double step_eps = 0.01;
    double lambda_min_ratio = 0.05;
    int max_steps = 20000;
    double fixed_sigma = 0.0;
    std::string lambda_mode = "bic";
    double rate_constant = 1.0;
    int detection_folds = 3;

    CLI::Option* o_step = nullptr;
    CLI::Option* o_ratio = nullptr;
    CLI::Option* o_max = nullptr;
    CLI::Option* o_sigma = nullptr;
    CLI::Option* o_mode = nullptr;
    CLI::Option* o_rate = nullptr;
    CLI::Option* o_folds = nullptr;

    void attach(CLI::App* app) {
        o_step = app->add_option("--step-eps", step_eps, "Path solver step size");
        o_ratio = app->add_option("--lambda-min-ratio", lambda_min_ratio,
                                  "Path stops at lambda_max times this ratio");
        o_max = app->add_option("--max-steps", max_steps, "Path step budget");
        o_sigma = app->add_option(
            "--sigma", fixed_sigma,
            "Fixed smoothing bandwidth (default: per-cohort n^-1/2 rule)");
        o_mode = app->add_option("--lambda-mode", lambda_mode,
                                 "Lambda selection rule: bic or rate")
                     ->check(CLI::IsMember({"bic", "rate"}));
        o_rate = app->add_option("--rate-constant", rate_constant,
                                 "Multiplier on sqrt(log p / n) in rate mode");
        o_folds = app->add_option("--detection-folds", detection_folds,
                                  "Cross-validation folds for source detection");
    }

    void apply(SolverConfig& config) const {
        if (o_step->count()) config.fabs.step_eps = step_eps;
        if (o_ratio->count()) config.fabs.lambda_min_ratio = lambda_min_ratio;
        if (o_max->count()) config.fabs.max_steps = max_steps;
        if (o_sigma->count()) config.smoothing = SmoothingRule::fixed(fixed_sigma);
        if (o_mode->count()) {
            config.lambda_mode = lambda_mode == "rate"
                                     ? SolverConfig::LambdaMode::Rate
                                     : SolverConfig::LambdaMode::Bic;
        }
        if (o_rate->count()) config.rate_constant = rate_constant;
        if (o_folds->count()) config.detection_folds = detection_folds;
    }
};

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& name : names) out.push_back(parse_method(name));
    return out;
}

std::vector<SurvivalDataset> load_sources(const std::vector<std::string>& paths) {
    std::vector<SurvivalDataset> sources;
    for (const auto& path : paths) sources.push_back(load_dataset_csv(path));
    return sources;
}

// 1-based on the command line (source 1 = first --source), 0-based inside.
std::vector<int> to_internal_indices(const std::vector<int>& one_based,
                                     int count, const char* what) {
    std::vector<int> out;
    for (const int k : one_based) {
        if (k < 1 || k > count) {
            throw InvalidArgument(std::string(what) + ": source index " +
                                  std::to_string(k) + " out of range 1.." +
                                  std::to_string(count));
        }
        out.push_back(k - 1);
    }
    return out;
}

void write_coefficients_csv(const std::string& path, const Eigen::VectorXd& values) {
    std::vector<std::string> lines;
    lines.push_back("coordinate,value");
    for (int j = 0; j < values.size(); ++j) {
        lines.push_back(csv::join(
            {std::to_string(j + 1), csv::format_double(values[j])}));
    }
    csv::write_lines(path, lines);
}

CoefficientVector read_coefficients_csv(const std::string& path) {
    const csv::Table table = csv::read_table(path);
    if (table.header != std::vector<std::string>{"coordinate", "value"}) {
        throw DataFormatError(path + ": expected header coordinate,value");
    }
    const int p = static_cast<int>(table.rows.size());
    if (p == 0) throw DataFormatError(path + ": no coefficient rows");
    Eigen::VectorXd values(p);
    std::vector<char> seen(p, 0);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::string context = path + ":" + std::to_string(i + 2);
        const long coord = csv::parse_long(table.rows[i][0], context);
        if (coord < 1 || coord > p) {
            throw DataFormatError(context + ": coordinate out of range 1.." +
                                  std::to_string(p));
        }
        if (seen[coord - 1]) {
            throw DataFormatError(context + ": duplicate coordinate");
        }
        seen[coord - 1] = 1;
        values[coord - 1] = csv::parse_double(table.rows[i][1], context);
    }
    return CoefficientVector{std::move(values), false};
}

json fit_info_json(const FitInfo& info) {
    return json{{"path_length", info.path_length},
                {"backward_steps", info.backward_steps},
                {"lambda", info.selected_lambda},
                {"loss", info.selected_loss},
                {"df", info.selected_df}};
}

void emit(const json& payload) { std::cout << payload.dump(2) << "\n"; }

struct SimState {
    std::string scenario = "S1";
    std::string config_path;
    int replications = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> methods;
    std::string output_dir = default_output_dir();
    int parallelism = 0;
    bool record_timings = false;
    SolverCli solver;
    CLI::Option *o_scenario, *o_reps, *o_seed, *o_out, *o_par;
};

void setup_simulate(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "simulate", "Run a simulation study scenario and persist results");
    auto state = std::make_shared<SimState>();
    state->o_scenario = cmd->add_option("--scenario", state->scenario,
                                        "Preset name (S1..S7, S7-6, S7-9)");
    cmd->add_option("--config", state->config_path, "JSON experiment config");
    state->o_reps =
        cmd->add_option("--replications", state->replications, "Replication count");
    state->o_seed = cmd->add_option("--seed", state->seed, "Base seed");
    cmd->add_option("--methods", state->methods,
                    "Methods to run (default: all six)")
        ->delimiter(',');
    state->o_out = cmd->add_option("--output-dir", state->output_dir,
                                   "Output directory (env SPRTL_OUTPUT_DIR)");
    state->o_par =
        cmd->add_option("--parallelism", state->parallelism, "Worker threads");
    cmd->add_flag("--record-timings", state->record_timings,
                  "Fill the seconds column (non-reproducible bytes)");
    state->solver.attach(cmd);

    cmd->callback([state] {
        ExperimentConfig config;
        if (!state->config_path.empty()) {
            config = load_experiment_config(state->config_path);
        } else {
            config.scenario = scenario_preset(state->scenario);
        }
        if (state->o_scenario->count() && !state->config_path.empty()) {
            config.scenario = scenario_preset(state->scenario);
        }
        if (state->o_reps->count()) config.replications = state->replications;
        if (state->o_seed->count()) config.base_seed = state->seed;
        if (!state->methods.empty()) config.methods = parse_methods(state->methods);
        if (state->o_out->count() || config.output_dir.empty() ||
            state->config_path.empty()) {
            config.output_dir = state->output_dir;
        }
        if (state->o_par->count()) config.parallelism = state->parallelism;
        if (state->record_timings) config.record_timings = true;
        state->solver.apply(config.solver);

        const ScenarioArtifacts art = run_scenario(config);
        emit(json{{"ok", true},
                  {"scenario", config.scenario.name},
                  {"rows", art.rows.size()},
                  {"results", art.results_path},
                  {"summary", art.summary_path},
                  {"metadata", art.metadata_path}});
    });
}

struct DetectState {
    std::string target_path;
    std::vector<std::string> source_paths;
    int folds = 3;
    std::uint64_t seed = 0;
    std::string output;
    std::string output_dir = default_output_dir();
    SolverCli solver;
};

void setup_detect(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "detect", "Score sources by cross-validated concordance gain");
    auto state = std::make_shared<DetectState>();
    cmd->add_option("--target", state->target_path, "Target dataset CSV")
        ->required();
    cmd->add_option("--source", state->source_paths, "Source dataset CSV")
        ->required();
    cmd->add_option("--folds", state->folds, "Cross-validation folds");
    cmd->add_option("--seed", state->seed, "Fold assignment seed");
    cmd->add_option("--output", state->output, "Report CSV path");
    cmd->add_option("--output-dir", state->output_dir,
                    "Directory for the default report path");
    state->solver.attach(cmd);

    cmd->callback([state] {
        const SurvivalDataset target = load_dataset_csv(state->target_path);
        const std::vector<SurvivalDataset> sources =
            load_sources(state->source_paths);
        SolverConfig solver;
        state->solver.apply(solver);
        const DetectionReport report =
            detect(target, sources, solver, state->folds, state->seed);
        const std::string out = state->output.empty()
                                    ? state->output_dir + "/detection.csv"
                                    : state->output;
        write_detection_csv(out, report);

        json decisions = json::array();
        for (const auto& d : report.per_source) {
            decisions.push_back(json{{"source", d.source_index + 1},
                                     {"label", d.source_label},
                                     {"c_index", d.c_index},
                                     {"gain", d.gain},
                                     {"selected", d.selected}});
        }
        json selected = json::array();
        for (const int k : report.selected_set()) selected.push_back(k + 1);
        emit(json{{"ok", true},
                  {"threshold", report.threshold},
                  {"selected", selected},
                  {"sources", decisions},
                  {"report", out}});
    });
}

struct FitState {
    std::string target_path;
    std::vector<std::string> source_paths;
    std::string method = "TargetOnly";
    std::vector<int> oracle;
    std::uint64_t detection_seed = 0;
    std::string output;
    std::string output_dir = default_output_dir();
    SolverCli solver;
    CLI::Option* o_oracle;
};

void setup_fit(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "fit", "Fit one method on a target cohort (optionally with sources)");
    auto state = std::make_shared<FitState>();
    cmd->add_option("--target", state->target_path, "Target dataset CSV")
        ->required();
    cmd->add_option("--source", state->source_paths, "Source dataset CSV");
    cmd->add_option("--method", state->method,
                    "TargetOnly, NaivePooled, OraclePooled, OracleTrans, "
                    "AutoPooled, or AutoTrans");
    state->o_oracle =
        cmd->add_option("--oracle", state->oracle,
                        "1-based helpful source indices for Oracle* methods")
            ->delimiter(',');
    cmd->add_option("--detection-seed", state->detection_seed,
                    "Fold seed for Auto* methods");
    cmd->add_option("--output", state->output, "Coefficient CSV path");
    cmd->add_option("--output-dir", state->output_dir,
                    "Directory for the default output path");
    state->solver.attach(cmd);

    cmd->callback([state] {
        const SurvivalDataset target = load_dataset_csv(state->target_path);
        const std::vector<SurvivalDataset> sources =
            load_sources(state->source_paths);
        SolverConfig solver;
        state->solver.apply(solver);
        solver.detection_seed = state->detection_seed;
        std::optional<std::vector<int>> oracle;
        if (state->o_oracle->count()) {
            oracle = to_internal_indices(state->oracle,
                                         static_cast<int>(sources.size()), "fit");
        }
        const Method method = parse_method(state->method);
        const TransferFit fit = estimate(method, target, sources, oracle, solver);

        const std::string out = state->output.empty()
                                    ? state->output_dir + "/coefficients.csv"
                                    : state->output;
        write_coefficients_csv(out, fit.beta_hat.values);

        json pooled = json::array();
        for (const int k : fit.source_set) pooled.push_back(k + 1);
        json payload{{"ok", true},
                     {"method", method_name(method)},
                     {"sources_pooled", pooled},
                     {"nonzero", support(fit.beta_hat.values).size()},
                     {"fusion", fit_info_json(fit.fusion_info)},
                     {"coefficients", out}};
        if (method == Method::OracleTrans || method == Method::AutoTrans) {
            payload["debias"] = fit_info_json(fit.debias_info);
        }
        emit(payload);
    });
}

struct InferState {
    std::string target_path;
    std::string scenario;
    std::string config_path;
    std::string beta_path;
    double alpha = 0.05;
    double gamma = -1.0;
    int gamma_folds = 5;
    std::uint64_t sim_seed = 1;
    int coverage = 0;
    std::string coverage_method = "OracleTrans";
    int parallelism = 1;
    std::string output;
    std::string output_dir = default_output_dir();
    SolverCli solver;
};

void setup_infer(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "infer", "Per-coordinate confidence intervals, or a coverage study");
    auto state = std::make_shared<InferState>();
    auto* o_target =
        cmd->add_option("--target", state->target_path, "Target dataset CSV");
    auto* o_scenario = cmd->add_option(
        "--scenario", state->scenario, "Simulate the target of this preset");
    auto* o_config = cmd->add_option("--config", state->config_path,
                                     "JSON config whose scenario to simulate");
    o_target->excludes(o_scenario);
    o_target->excludes(o_config);
    o_scenario->excludes(o_config);
    cmd->add_option("--beta", state->beta_path,
                    "Initial estimate CSV (default: fit TargetOnly)");
    cmd->add_option("--alpha", state->alpha, "Interval miscoverage level");
    cmd->add_option("--gamma", state->gamma,
                    "Fixed precision-matrix constraint level (skips CV)");
    cmd->add_option("--gamma-folds", state->gamma_folds,
                    "Folds for the constraint-level cross-validation");
    cmd->add_option("--sim-seed", state->sim_seed,
                    "Seed when simulating (also the coverage base seed)");
    cmd->add_option("--coverage", state->coverage,
                    "Run this many coverage replications instead");
    cmd->add_option("--method", state->coverage_method,
                    "First-stage estimator for coverage runs");
    cmd->add_option("--parallelism", state->parallelism,
                    "Worker threads for coverage replications");
    cmd->add_option("--output", state->output, "Output CSV path");
    cmd->add_option("--output-dir", state->output_dir,
                    "Directory for the default output path");
    state->solver.attach(cmd);

    cmd->callback([state] {
        SolverConfig solver;
        state->solver.apply(solver);
        InferenceConfig inference;
        inference.alpha = state->alpha;
        inference.gamma_folds = state->gamma_folds;
        inference.fixed_gamma = state->gamma;
        if (solver.smoothing.kind == SmoothingRule::Kind::Fixed) {
            inference.score_smoothing = solver.smoothing;
            inference.curvature_smoothing = solver.smoothing;
        }

        std::optional<ScenarioSpec> spec;
        if (!state->config_path.empty()) {
            spec = load_experiment_config(state->config_path).scenario;
        } else if (!state->scenario.empty()) {
            spec = scenario_preset(state->scenario);
        }

        if (state->coverage > 0) {
            if (!spec) {
                throw InvalidArgument(
                    "infer: --coverage needs --scenario or --config");
            }
            CoverageConfig cc;
            cc.scenario = *spec;
            cc.method = parse_method(state->coverage_method);
            cc.replications = state->coverage;
            cc.base_seed = state->sim_seed;
            cc.solver = solver;
            cc.inference = inference;
            cc.parallelism = state->parallelism;
            const CoverageReport report = run_coverage(cc);

            const std::string out = state->output.empty()
                                        ? state->output_dir + "/coverage.csv"
                                        : state->output;
            write_coverage_csv(out, report);

            double signal_cov = 0.0, noise_cov = 0.0;
            int signal_n = 0, noise_n = 0;
            for (int j = 0; j < report.truth.values.size(); ++j) {
                if (report.truth.values[j] != 0.0) {
                    signal_cov += report.coverage[j];
                    ++signal_n;
                } else {
                    noise_cov += report.coverage[j];
                    ++noise_n;
                }
            }
            json payload{{"ok", true},
                         {"replications", report.replications},
                         {"coverage", out},
                         {"skipped_zero_se", report.skipped_zero_se}};
            if (!report.standardized.empty()) {
                payload["ks_distance"] = ks_distance_normal(report.standardized);
            }
            if (signal_n) payload["signal_coverage"] = signal_cov / signal_n;
            if (noise_n) payload["noise_coverage"] = noise_cov / noise_n;
            emit(payload);
            return;
        }

        std::optional<SurvivalDataset> target;
        if (!state->target_path.empty()) {
            target.emplace(load_dataset_csv(state->target_path));
        } else if (spec) {
            target.emplace(generate_replication(*spec, state->sim_seed).target);
        } else {
            throw InvalidArgument(
                "infer: provide --target, --scenario, or --config");
        }

        CoefficientVector beta_hat{Eigen::VectorXd::Zero(target->p()), false};
        if (!state->beta_path.empty()) {
            beta_hat = read_coefficients_csv(state->beta_path);
            if (beta_hat.values.size() != target->p()) {
                throw InvalidArgument("infer: coefficient length " +
                                      std::to_string(beta_hat.values.size()) +
                                      " does not match p = " +
                                      std::to_string(target->p()));
            }
        } else {
            // The intervals assume a unit-scale estimate; see CoverageConfig.
            beta_hat = estimate(Method::TargetOnly, *target, {}, std::nullopt,
                                solver)
                           .beta_hat_normalized;
        }

        const InferencePipelineResult pipe =
            run_inference_pipeline(*target, beta_hat, inference);
        const std::string out = state->output.empty()
                                    ? state->output_dir + "/intervals.csv"
                                    : state->output;
        write_inference_csv(out, pipe.result);
        emit(json{{"ok", true},
                  {"intervals", out},
                  {"gamma", pipe.precision.gamma},
                  {"feasibility_gap", pipe.precision.feasibility_gap},
                  {"symmetrized_gap", pipe.precision.symmetrized_gap},
                  {"alpha", state->alpha}});
    });
}

struct SplitState {
    std::string target_path;
    std::vector<std::string> source_paths;
    double fraction = 0.2;
    int repetitions = 100;
    std::uint64_t seed = 1;
    std::vector<std::string> methods;
    std::vector<int> oracle;
    std::string label = "split";
    std::string output_dir = default_output_dir();
    int parallelism = 1;
    bool record_timings = false;
    SolverCli solver;
    CLI::Option* o_oracle;
};

void setup_eval_split(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "eval-split", "Repeated random-splitting evaluation on a target CSV");
    auto state = std::make_shared<SplitState>();
    cmd->add_option("--target", state->target_path, "Target dataset CSV")
        ->required();
    cmd->add_option("--source", state->source_paths, "Source dataset CSV");
    cmd->add_option("--fraction", state->fraction, "Held-out share of the target");
    cmd->add_option("--repetitions", state->repetitions, "Number of random splits");
    cmd->add_option("--seed", state->seed, "Base seed");
    cmd->add_option("--methods", state->methods,
                    "Methods to run (default: TargetOnly, NaivePooled, "
                    "AutoPooled, AutoTrans)")
        ->delimiter(',');
    state->o_oracle =
        cmd->add_option("--oracle", state->oracle,
                        "1-based helpful source indices for Oracle* methods")
            ->delimiter(',');
    cmd->add_option("--label", state->label, "Scenario label used in the rows");
    cmd->add_option("--output-dir", state->output_dir,
                    "Output directory (env SPRTL_OUTPUT_DIR)");
    cmd->add_option("--parallelism", state->parallelism, "Worker threads");
    cmd->add_flag("--record-timings", state->record_timings,
                  "Fill the seconds column");
    state->solver.attach(cmd);

    cmd->callback([state] {
        const SurvivalDataset target = load_dataset_csv(state->target_path);
        const std::vector<SurvivalDataset> sources =
            load_sources(state->source_paths);
        SplitEvalConfig config;
        config.split_fraction = state->fraction;
        config.repetitions = state->repetitions;
        config.seed = state->seed;
        if (!state->methods.empty()) config.methods = parse_methods(state->methods);
        if (state->o_oracle->count()) {
            config.oracle_set = to_internal_indices(
                state->oracle, static_cast<int>(sources.size()), "eval-split");
        }
        state->solver.apply(config.solver);
        config.output_dir = state->output_dir;
        config.label = state->label;
        config.parallelism = state->parallelism;
        config.record_timings = state->record_timings;

        const ScenarioArtifacts art = run_splitting_eval(target, sources, config);
        emit(json{{"ok", true},
                  {"rows", art.rows.size()},
                  {"results", art.results_path},
                  {"summary", art.summary_path},
                  {"metadata", art.metadata_path}});
    });
}

struct PlotState {
    std::string results;
    std::string output_dir = default_output_dir();
};

void setup_plot(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "plot", "Boxplot SVGs per metric from a results CSV");
    auto state = std::make_shared<PlotState>();
    cmd->add_option("--results", state->results, "Results CSV path")->required();
    cmd->add_option("--output-dir", state->output_dir,
                    "Output directory (env SPRTL_OUTPUT_DIR)");

    cmd->callback([state] {
        const std::vector<std::string> written =
            emit_plots(state->results, state->output_dir);
        emit(json{{"ok", true}, {"plots", written}});
    });
}

int fail(const char* kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rank-based transfer learning for high-dimensional censored "
                 "survival data"};
    app.require_subcommand(1);
    setup_simulate(app);
    setup_detect(app);
    setup_fit(app);
    setup_infer(app);
    setup_eval_split(app);
    setup_plot(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const InvalidArgument& e) {
        return fail("invalid_argument", e.what());
    } catch (const DataFormatError& e) {
        return fail("data_format", e.what());
    } catch (const ConvergenceError& e) {
        return fail("convergence", e.what());
    } catch (const InfeasibleError& e) {
        return fail("infeasible", e.what());
    } catch (const std::exception& e) {
        return fail("error", e.what());
    }
    return 0;
}
