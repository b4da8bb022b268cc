#include "sprtl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "sprtl/csv.hpp"
#include "sprtl/errors.hpp"
#include "sprtl/rng.hpp"

namespace sprtl {

namespace {

using nlohmann::json;

// Substream tags for one replication's seed. Source k uses the contiguous
// block starting at kTagSourceBase + 4k.
enum : std::uint64_t {
    kTagTargetCalibration = 11,
    kTagTargetData = 12,
    kTagTestData = 13,
    kTagDetectionSeed = 14,
    kTagSplit = 15,
    kTagGammaCv = 16,
    kTagSourceBase = 100,
};

constexpr const char* kResultsHeader =
    "scenario,method,replication,f1,rmse_raw,rmse_normalized,c_index,logrank,"
    "recall,seconds";

struct MetricColumn {
    const char* name;
    std::optional<double> ResultRow::*field;
};

constexpr MetricColumn kMetricColumns[] = {
    {"f1", &ResultRow::f1},
    {"rmse_raw", &ResultRow::rmse_raw},
    {"rmse_normalized", &ResultRow::rmse_normalized},
    {"c_index", &ResultRow::c_index},
    {"logrank", &ResultRow::logrank},
    {"recall", &ResultRow::recall},
    {"seconds", &ResultRow::seconds},
};

Eigen::VectorXd block_pattern(int p, int block) {
    static const double kLevels[] = {1.0, -1.0, 0.8, -0.8, 0.6, -0.6};
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    int idx = 0;
    for (const double level : kLevels) {
        for (int b = 0; b < block; ++b) beta[idx++] = level;
    }
    return beta;
}

ScenarioSpec make_scenario(std::string name, int n0, int nk, int sources, int p,
                           int block, int helpful_count,
                           const PerturbationParams& helpful,
                           const PerturbationParams& unhelpful) {
    ScenarioSpec s;
    s.name = std::move(name);
    s.n0 = n0;
    s.n_sources.assign(sources, nk);
    s.p = p;
    for (int k = 0; k < helpful_count; ++k) s.informative.push_back(k);
    s.perturbation.assign(sources, unhelpful);
    for (int k = 0; k < helpful_count; ++k) s.perturbation[k] = helpful;
    s.target_pattern = block_pattern(p, block);
    return s;
}

void run_indexed(int count, int workers, const std::function<void(int)>& body) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto drain = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(count);  // stop handing out work
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, count);
    pool.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(drain);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw InvalidArgument("output directory '" + dir +
                              "' cannot be created: " + ec.message());
    }
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string();
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
    const double h = static_cast<double>(sorted.size() - 1) * prob;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

std::string iso_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

json solver_to_json(const SolverConfig& solver) {
    json j;
    j["step_eps"] = solver.fabs.step_eps;
    j["lambda_min_ratio"] = solver.fabs.lambda_min_ratio;
    j["max_steps"] = solver.fabs.max_steps;
    if (solver.smoothing.kind == SmoothingRule::Kind::RootN) {
        j["smoothing"] = "root_n";
    } else {
        j["smoothing"] = json{{"fixed", solver.smoothing.fixed_sigma}};
    }
    j["lambda_mode"] =
        solver.lambda_mode == SolverConfig::LambdaMode::Bic ? "bic" : "rate";
    j["rate_constant"] = solver.rate_constant;
    j["detection_folds"] = solver.detection_folds;
    return j;
}

void write_metadata(const std::string& path, json meta) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataFormatError(path + ": cannot open file for writing");
    out << meta.dump(2) << '\n';
    if (!out) throw DataFormatError(path + ": write failed");
}

// C-index needs at least one comparable pair in the test set; an all-censored
// draw has none, and that is a property of the data, not a failure.
std::optional<double> safe_c_index(const CoefficientVector& beta,
                                   const SurvivalDataset& test) {
    try {
        return c_index(beta, test);
    } catch (const InvalidArgument&) {
        return std::nullopt;
    }
}

// A constant score vector cannot be median-split; report no separation.
double safe_logrank(const SurvivalDataset& test, const Eigen::VectorXd& scores) {
    try {
        bool degenerate = false;
        return logrank_statistic(test, scores, &degenerate);
    } catch (const InvalidArgument&) {
        return 0.0;
    }
}

ResultRow evaluate_method(Method method, int rep, const ReplicationData& data,
                          const ScenarioSpec& spec, const SolverConfig& solver,
                          bool record_timings) {
    ResultRow row;
    row.scenario = spec.name;
    row.method = method_name(method);
    row.replication = rep;

    const auto t0 = std::chrono::steady_clock::now();
    const TransferFit fit =
        estimate(method, data.target, data.sources,
                 std::optional<std::vector<int>>(spec.informative), solver);
    const auto t1 = std::chrono::steady_clock::now();
    if (record_timings) {
        row.seconds = std::chrono::duration<double>(t1 - t0).count();
    }

    row.f1 = f1_score(support(fit.beta_hat.values), support(data.beta0.values));
    row.rmse_raw = rmse(fit.beta_hat, data.beta0);
    row.rmse_normalized = rmse(fit.beta_hat_normalized, data.beta0);
    row.c_index = safe_c_index(fit.beta_hat, data.test);
    row.logrank = safe_logrank(data.test, data.test.x() * fit.beta_hat.values);
    if ((method == Method::AutoPooled || method == Method::AutoTrans) &&
        !spec.informative.empty()) {
        row.recall = detection_recall(fit.source_set, spec.informative);
    }
    return row;
}

ScenarioArtifacts persist_run(const std::string& name,
                              std::vector<ResultRow> rows,
                              const std::string& output_dir, json meta) {
    ensure_directory(output_dir);
    ScenarioArtifacts art;
    art.rows = std::move(rows);
    art.summary = summarize(art.rows);
    art.results_path = output_dir + "/" + name + "_results.csv";
    art.summary_path = output_dir + "/" + name + "_summary.csv";
    art.metadata_path = output_dir + "/" + name + "_meta.json";
    write_results_csv(art.results_path, art.rows);
    write_summary_csv(art.summary_path, art.summary);
    meta["finished_at"] = iso_utc_now();
    write_metadata(art.metadata_path, std::move(meta));
    return art;
}

SmoothingRule smoothing_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "root_n") return SmoothingRule::root_n();
        throw InvalidArgument("config: unknown smoothing rule '" +
                              j.get<std::string>() + "'");
    }
    if (j.is_object() && j.contains("fixed")) {
        return SmoothingRule::fixed(j.at("fixed").get<double>());
    }
    throw InvalidArgument(
        "config: smoothing must be \"root_n\" or {\"fixed\": sigma}");
}

SolverConfig solver_from_json(const json& j, SolverConfig base) {
    if (j.contains("step_eps")) base.fabs.step_eps = j.at("step_eps").get<double>();
    if (j.contains("lambda_min_ratio")) {
        base.fabs.lambda_min_ratio = j.at("lambda_min_ratio").get<double>();
    }
    if (j.contains("max_steps")) base.fabs.max_steps = j.at("max_steps").get<int>();
    if (j.contains("smoothing")) base.smoothing = smoothing_from_json(j.at("smoothing"));
    if (j.contains("lambda_mode")) {
        const std::string mode = j.at("lambda_mode").get<std::string>();
        if (mode == "bic") {
            base.lambda_mode = SolverConfig::LambdaMode::Bic;
        } else if (mode == "rate") {
            base.lambda_mode = SolverConfig::LambdaMode::Rate;
        } else {
            throw InvalidArgument("config: lambda_mode must be \"bic\" or \"rate\"");
        }
    }
    if (j.contains("rate_constant")) {
        base.rate_constant = j.at("rate_constant").get<double>();
    }
    if (j.contains("detection_folds")) {
        base.detection_folds = j.at("detection_folds").get<int>();
    }
    return base;
}

ScenarioSpec scenario_from_json(const json& j) {
    if (j.is_string()) return scenario_preset(j.get<std::string>());
    if (!j.is_object()) {
        throw InvalidArgument("config: scenario must be a preset name or an object");
    }
    ScenarioSpec s;
    if (j.contains("base")) s = scenario_preset(j.at("base").get<std::string>());
    if (j.contains("name")) s.name = j.at("name").get<std::string>();
    if (j.contains("n0")) s.n0 = j.at("n0").get<int>();
    if (j.contains("p")) s.p = j.at("p").get<int>();
    if (j.contains("n_sources")) {
        s.n_sources.clear();
        for (const auto& v : j.at("n_sources")) s.n_sources.push_back(v.get<int>());
    }
    if (j.contains("informative")) {
        s.informative.clear();
        for (const auto& v : j.at("informative")) s.informative.push_back(v.get<int>());
    }
    if (j.contains("perturbation")) {
        s.perturbation.clear();
        for (const auto& v : j.at("perturbation")) {
            PerturbationParams params;
            params.d1 = v.at("d1").get<int>();
            params.d2 = v.at("d2").get<int>();
            params.r = v.at("r").get<int>();
            params.u = v.at("u").get<double>();
            s.perturbation.push_back(params);
        }
    }
    if (j.contains("pattern")) {
        const auto& arr = j.at("pattern");
        s.target_pattern.resize(static_cast<int>(arr.size()));
        int idx = 0;
        for (const auto& v : arr) s.target_pattern[idx++] = v.get<double>();
    } else if (j.contains("pattern_block")) {
        s.target_pattern = block_pattern(s.p, j.at("pattern_block").get<int>());
    }
    if (j.contains("censoring_rate")) {
        s.censoring_rate = j.at("censoring_rate").get<double>();
    }
    if (j.contains("test_size")) s.test_size = j.at("test_size").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

}  // namespace

ScenarioSpec scenario_preset(const std::string& name) {
    const PerturbationParams helpful_a{2, 4, 2, 0.3};  // S1 and the S3-S5 family
    const PerturbationParams unhelpful_a{6, 6, 7, 1.0};
    const PerturbationParams helpful_s2{4, 4, 2, 0.4};
    const PerturbationParams helpful_s6{4, 10, 2, 0.4};
    const PerturbationParams unhelpful_s6{12, 10, 14, 1.0};
    const PerturbationParams helpful_s7{2, 3, 2, 0.3};
    const PerturbationParams unhelpful_s7{7, 7, 9, 1.0};

    if (name == "S1") {
        return make_scenario("S1", 100, 200, 2, 200, 2, 1, helpful_a, unhelpful_a);
    }
    if (name == "S2") {
        return make_scenario("S2", 100, 200, 2, 200, 2, 1, helpful_s2, unhelpful_a);
    }
    if (name == "S3") {
        return make_scenario("S3", 100, 100, 6, 200, 2, 3, helpful_a, unhelpful_a);
    }
    if (name == "S4") {
        return make_scenario("S4", 100, 60, 6, 200, 2, 3, helpful_a, unhelpful_a);
    }
    if (name == "S5") {
        return make_scenario("S5", 100, 100, 6, 200, 2, 2, helpful_a, unhelpful_a);
    }
    if (name == "S6") {
        return make_scenario("S6", 200, 200, 6, 500, 4, 3, helpful_s6, unhelpful_s6);
    }
    if (name == "S7" || name == "S7-3") {
        return make_scenario("S7", 60, 60, 10, 200, 2, 3, helpful_s7, unhelpful_s7);
    }
    if (name == "S7-6") {
        return make_scenario("S7-6", 60, 60, 10, 200, 2, 6, helpful_s7, unhelpful_s7);
    }
    if (name == "S7-9") {
        return make_scenario("S7-9", 60, 60, 10, 200, 2, 9, helpful_s7, unhelpful_s7);
    }
    throw InvalidArgument("scenario_preset: unknown scenario '" + name + "'");
}

std::vector<std::string> scenario_names() {
    return {"S1", "S2", "S3", "S4", "S5", "S6", "S7", "S7-6", "S7-9"};
}

std::vector<Method> ExperimentConfig::resolved_methods() const {
    if (!methods.empty()) return methods;
    return {Method::TargetOnly,   Method::NaivePooled, Method::OraclePooled,
            Method::OracleTrans,  Method::AutoPooled,  Method::AutoTrans};
}

void ExperimentConfig::validate() const {
    scenario.validate();
    solver.fabs.validate();
    if (replications < 1) {
        throw InvalidArgument("experiment: replications must be >= 1");
    }
    if (parallelism < 1) {
        throw InvalidArgument("experiment: parallelism must be >= 1");
    }
    if (output_dir.empty()) {
        throw InvalidArgument("experiment: output_dir must not be empty");
    }
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFormatError(path + ": cannot open file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataFormatError(path + ": " + e.what());
    }
    ExperimentConfig config;
    config.scenario = scenario_preset("S1");
    try {
        if (j.contains("scenario")) config.scenario = scenario_from_json(j.at("scenario"));
        if (j.contains("methods")) {
            config.methods.clear();
            for (const auto& v : j.at("methods")) {
                config.methods.push_back(parse_method(v.get<std::string>()));
            }
        }
        if (j.contains("replications")) {
            config.replications = j.at("replications").get<int>();
        }
        if (j.contains("base_seed")) {
            config.base_seed = j.at("base_seed").get<std::uint64_t>();
        }
        if (j.contains("output_dir")) {
            config.output_dir = j.at("output_dir").get<std::string>();
        }
        if (j.contains("parallelism")) {
            config.parallelism = j.at("parallelism").get<int>();
        }
        if (j.contains("record_timings")) {
            config.record_timings = j.at("record_timings").get<bool>();
        }
        if (j.contains("solver")) {
            config.solver = solver_from_json(j.at("solver"), config.solver);
        }
    } catch (const json::exception& e) {
        throw DataFormatError(path + ": " + e.what());
    }
    return config;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::vector<std::string> lines;
    lines.reserve(rows.size() + 1);
    lines.push_back(kResultsHeader);
    for (const auto& row : rows) {
        lines.push_back(csv::join({row.scenario, row.method,
                                   std::to_string(row.replication),
                                   opt_cell(row.f1), opt_cell(row.rmse_raw),
                                   opt_cell(row.rmse_normalized),
                                   opt_cell(row.c_index), opt_cell(row.logrank),
                                   opt_cell(row.recall), opt_cell(row.seconds)}));
    }
    csv::write_lines(path, lines);
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    const csv::Table table = csv::read_table(path);
    const std::vector<std::string> expected{
        "scenario", "method",  "replication", "f1",     "rmse_raw",
        "rmse_normalized", "c_index", "logrank", "recall", "seconds"};
    if (table.header != expected) {
        throw DataFormatError(path + ": unexpected results header");
    }
    std::vector<ResultRow> rows;
    rows.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& fields = table.rows[i];
        const std::string context = path + ":" + std::to_string(i + 2);
        ResultRow row;
        row.scenario = fields[0];
        row.method = fields[1];
        row.replication = static_cast<int>(csv::parse_long(fields[2], context));
        auto cell = [&](int col) -> std::optional<double> {
            if (fields[static_cast<std::size_t>(col)].empty()) return std::nullopt;
            return csv::parse_double(fields[static_cast<std::size_t>(col)], context);
        };
        row.f1 = cell(3);
        row.rmse_raw = cell(4);
        row.rmse_normalized = cell(5);
        row.c_index = cell(6);
        row.logrank = cell(7);
        row.recall = cell(8);
        row.seconds = cell(9);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
    std::vector<std::string> lines;
    lines.reserve(rows.size() + 1);
    lines.push_back("scenario,method,metric,count,mean,sd,q25,median,q75");
    for (const auto& row : rows) {
        lines.push_back(csv::join(
            {row.scenario, row.method, row.metric, std::to_string(row.count),
             csv::format_double(row.mean), csv::format_double(row.sd),
             csv::format_double(row.q25), csv::format_double(row.median),
             csv::format_double(row.q75)}));
    }
    csv::write_lines(path, lines);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& row : rows) {
        const std::pair<std::string, std::string> key{row.scenario, row.method};
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            keys.push_back(key);
        }
    }
    std::vector<SummaryRow> out;
    for (const auto& key : keys) {
        for (const auto& metric : kMetricColumns) {
            std::vector<double> values;
            for (const auto& row : rows) {
                if (row.scenario != key.first || row.method != key.second) continue;
                const std::optional<double>& v = row.*(metric.field);
                if (v) values.push_back(*v);
            }
            if (values.empty()) continue;
            std::sort(values.begin(), values.end());
            SummaryRow s;
            s.scenario = key.first;
            s.method = key.second;
            s.metric = metric.name;
            s.count = static_cast<int>(values.size());
            double sum = 0.0;
            for (const double v : values) sum += v;
            s.mean = sum / s.count;
            double ss = 0.0;
            for (const double v : values) ss += (v - s.mean) * (v - s.mean);
            s.sd = s.count > 1 ? std::sqrt(ss / (s.count - 1)) : 0.0;
            s.q25 = quantile_sorted(values, 0.25);
            s.median = quantile_sorted(values, 0.5);
            s.q75 = quantile_sorted(values, 0.75);
            out.push_back(std::move(s));
        }
    }
    return out;
}

ReplicationData generate_replication(const ScenarioSpec& spec, std::uint64_t seed) {
    spec.validate();
    CoefficientVector beta0 = normalize(spec.target_pattern);
    const Eigen::MatrixXd sigma0 = ar1_covariance(spec.p, 0.3);
    const double theta0 =
        calibrate_censoring(beta0, sigma0, spec.censoring_rate,
                            derive_seed(seed, kTagTargetCalibration));
    SurvivalDataset target =
        simulate_cohort(beta0, spec.n0, sigma0, theta0,
                        derive_seed(seed, kTagTargetData), "target");

    std::vector<SurvivalDataset> sources;
    std::vector<CoefficientVector> source_betas;
    const CoefficientVector raw_pattern{spec.target_pattern, false};
    for (int k = 0; k < spec.n_sources_total(); ++k) {
        const std::uint64_t tag = kTagSourceBase + 4ULL * static_cast<std::uint64_t>(k);
        CoefficientVector betak = perturb_coefficients(
            raw_pattern, spec.perturbation[k], derive_seed(seed, tag));
        const Eigen::MatrixXd sigmak =
            make_source_covariance(sigma0, derive_seed(seed, tag + 1));
        const double thetak =
            calibrate_censoring(betak, sigmak, spec.censoring_rate,
                                derive_seed(seed, tag + 2));
        sources.push_back(simulate_cohort(betak, spec.n_sources[k], sigmak,
                                          thetak, derive_seed(seed, tag + 3),
                                          "source" + std::to_string(k + 1)));
        source_betas.push_back(std::move(betak));
    }

    SurvivalDataset test =
        simulate_cohort(beta0, spec.test_size, sigma0, theta0,
                        derive_seed(seed, kTagTestData), "test");
    return ReplicationData{std::move(target), std::move(sources),
                           std::move(source_betas), std::move(beta0),
                           std::move(test)};
}

ScenarioArtifacts run_scenario(const ExperimentConfig& config) {
    config.validate();
    const ScenarioSpec& spec = config.scenario;
    const std::vector<Method> methods = config.resolved_methods();
    const int method_count = static_cast<int>(methods.size());
    const int reps = config.replications;

    json meta;
    meta["kind"] = "scenario";
    meta["scenario"] = spec.name;
    meta["replications"] = reps;
    meta["base_seed"] = config.base_seed;
    std::vector<std::string> method_names;
    for (const Method m : methods) method_names.push_back(method_name(m));
    meta["methods"] = method_names;
    meta["parallelism"] = config.parallelism;
    meta["record_timings"] = config.record_timings;
    meta["solver"] = solver_to_json(config.solver);
    meta["started_at"] = iso_utc_now();
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<ResultRow> rows(static_cast<std::size_t>(reps) * method_count);
    run_indexed(reps, config.parallelism, [&](int r) {
        const std::uint64_t seed_rep = config.base_seed + static_cast<std::uint64_t>(r);
        const ReplicationData data = generate_replication(spec, seed_rep);
        SolverConfig solver = config.solver;
        solver.detection_seed = derive_seed(seed_rep, kTagDetectionSeed);
        for (int mi = 0; mi < method_count; ++mi) {
            rows[static_cast<std::size_t>(r) * method_count + mi] =
                evaluate_method(methods[mi], r, data, spec, solver,
                                config.record_timings);
        }
    });

    meta["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return persist_run(spec.name, std::move(rows), config.output_dir,
                       std::move(meta));
}

ScenarioArtifacts run_splitting_eval(const SurvivalDataset& target,
                                     const std::vector<SurvivalDataset>& sources,
                                     const SplitEvalConfig& config) {
    if (!(config.split_fraction > 0.0 && config.split_fraction < 1.0)) {
        throw InvalidArgument("run_splitting_eval: split_fraction must be in (0,1)");
    }
    if (config.repetitions < 1) {
        throw InvalidArgument("run_splitting_eval: repetitions must be >= 1");
    }
    if (config.parallelism < 1) {
        throw InvalidArgument("run_splitting_eval: parallelism must be >= 1");
    }
    if (config.label.empty()) {
        throw InvalidArgument("run_splitting_eval: label must not be empty");
    }
    config.solver.fabs.validate();
    const int n = target.n();
    const int n_test =
        static_cast<int>(std::lround(config.split_fraction * n));
    if (n_test < 2 || n - n_test < 2) {
        throw InvalidArgument(
            "run_splitting_eval: split leaves fewer than 2 observations on one side");
    }

    std::vector<Method> methods = config.methods;
    if (methods.empty()) {
        methods = {Method::TargetOnly, Method::NaivePooled, Method::AutoPooled,
                   Method::AutoTrans};
    }
    const int method_count = static_cast<int>(methods.size());
    const int reps = config.repetitions;

    json meta;
    meta["kind"] = "splitting_eval";
    meta["label"] = config.label;
    meta["target"] = target.label();
    meta["target_n"] = n;
    meta["test_n"] = n_test;
    meta["sources"] = static_cast<int>(sources.size());
    meta["repetitions"] = reps;
    meta["seed"] = config.seed;
    std::vector<std::string> method_names;
    for (const Method m : methods) method_names.push_back(method_name(m));
    meta["methods"] = method_names;
    meta["solver"] = solver_to_json(config.solver);
    meta["started_at"] = iso_utc_now();
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<ResultRow> rows(static_cast<std::size_t>(reps) * method_count);
    run_indexed(reps, config.parallelism, [&](int r) {
        const std::uint64_t seed_rep = config.seed + static_cast<std::uint64_t>(r);
        Rng rng(derive_seed(seed_rep, kTagSplit));
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        std::vector<int> test_idx(perm.begin(), perm.begin() + n_test);
        std::vector<int> train_idx(perm.begin() + n_test, perm.end());
        std::sort(test_idx.begin(), test_idx.end());
        std::sort(train_idx.begin(), train_idx.end());
        const SurvivalDataset train =
            subset(target, train_idx, target.label() + "/train");
        const SurvivalDataset held_out =
            subset(target, test_idx, target.label() + "/test");
        SolverConfig solver = config.solver;
        solver.detection_seed = derive_seed(seed_rep, kTagDetectionSeed);
        for (int mi = 0; mi < method_count; ++mi) {
            ResultRow row;
            row.scenario = config.label;
            row.method = method_name(methods[mi]);
            row.replication = r;
            const auto fit_t0 = std::chrono::steady_clock::now();
            const TransferFit fit = estimate(methods[mi], train, sources,
                                             config.oracle_set, solver);
            if (config.record_timings) {
                row.seconds = std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - fit_t0)
                                  .count();
            }
            row.c_index = safe_c_index(fit.beta_hat, held_out);
            row.logrank =
                safe_logrank(held_out, held_out.x() * fit.beta_hat.values);
            rows[static_cast<std::size_t>(r) * method_count + mi] = std::move(row);
        }
    });

    meta["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return persist_run(config.label, std::move(rows), config.output_dir,
                       std::move(meta));
}

CoverageReport run_coverage(const CoverageConfig& config) {
    config.scenario.validate();
    if (config.replications < 1) {
        throw InvalidArgument("run_coverage: replications must be >= 1");
    }
    if (config.parallelism < 1) {
        throw InvalidArgument("run_coverage: parallelism must be >= 1");
    }
    config.solver.fabs.validate();
    const ScenarioSpec& spec = config.scenario;
    const int p = spec.p;
    const int reps = config.replications;
    const CoefficientVector truth = normalize(spec.target_pattern);

    struct RepOut {
        Eigen::VectorXd beta_hat;
        Eigen::VectorXd beta_tilde;
        Eigen::VectorXd half_width;
        std::vector<char> covered;
    };
    std::vector<RepOut> outputs(reps);

    run_indexed(reps, config.parallelism, [&](int r) {
        const std::uint64_t seed_rep =
            config.base_seed + static_cast<std::uint64_t>(r);
        const ReplicationData data = generate_replication(spec, seed_rep);
        SolverConfig solver = config.solver;
        solver.detection_seed = derive_seed(seed_rep, kTagDetectionSeed);
        const TransferFit fit =
            estimate(config.method, data.target, data.sources,
                     std::optional<std::vector<int>>(spec.informative), solver);
        InferenceConfig inference = config.inference;
        inference.seed = derive_seed(seed_rep, kTagGammaCv);
        // The truth is unit-norm, so inference starts from the normalized
        // estimate; the raw fit's scale is an artifact of the penalty.
        const InferencePipelineResult pipe = run_inference_pipeline(
            data.target, fit.beta_hat_normalized, inference);

        RepOut out;
        out.beta_hat = fit.beta_hat_normalized.values;
        out.beta_tilde = pipe.result.beta_tilde.values;
        out.half_width.resize(p);
        out.covered.resize(p);
        for (int j = 0; j < p; ++j) {
            const CoordinateInterval& ci = pipe.result.intervals[j];
            out.half_width[j] = ci.half_width;
            out.covered[j] = ci.lo <= truth.values[j] && truth.values[j] <= ci.hi;
        }
        outputs[r] = std::move(out);
    });

    CoverageReport report;
    report.truth = truth;
    report.replications = reps;
    report.coverage.assign(p, 0.0);
    report.mean_half_width.assign(p, 0.0);
    report.bias_initial.assign(p, 0.0);
    report.bias_debiased.assign(p, 0.0);
    const double quantile = normal_quantile(1.0 - config.inference.alpha / 2.0);
    for (int r = 0; r < reps; ++r) {
        const RepOut& out = outputs[r];
        for (int j = 0; j < p; ++j) {
            report.coverage[j] += out.covered[j];
            report.mean_half_width[j] += out.half_width[j];
            report.bias_initial[j] += out.beta_hat[j] - truth.values[j];
            report.bias_debiased[j] += out.beta_tilde[j] - truth.values[j];
            if (out.half_width[j] > 0.0) {
                report.standardized.push_back((out.beta_tilde[j] - truth.values[j]) *
                                              quantile / out.half_width[j]);
            } else {
                ++report.skipped_zero_se;
            }
        }
    }
    for (int j = 0; j < p; ++j) {
        report.coverage[j] /= reps;
        report.mean_half_width[j] /= reps;
        report.bias_initial[j] /= reps;
        report.bias_debiased[j] /= reps;
    }
    return report;
}

void write_coverage_csv(const std::string& path, const CoverageReport& report) {
    std::vector<std::string> lines;
    lines.push_back("coordinate,truth,coverage,mean_half_width,bias_initial,bias_debiased");
    const int p = static_cast<int>(report.coverage.size());
    for (int j = 0; j < p; ++j) {
        lines.push_back(csv::join(
            {std::to_string(j + 1), csv::format_double(report.truth.values[j]),
             csv::format_double(report.coverage[j]),
             csv::format_double(report.mean_half_width[j]),
             csv::format_double(report.bias_initial[j]),
             csv::format_double(report.bias_debiased[j])}));
    }
    csv::write_lines(path, lines);
}

namespace {

struct BoxStats {
    std::string label;
    double lo, q25, median, q75, hi;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string boxplot_svg(const std::string& metric,
                        const std::vector<BoxStats>& boxes) {
    const double margin_left = 72.0, margin_top = 44.0, margin_bottom = 86.0;
    const double slot = 92.0, box_w = 44.0;
    const double plot_h = 300.0;
    const double width = margin_left + slot * boxes.size() + 28.0;
    const double height = margin_top + plot_h + margin_bottom;

    double lo = boxes[0].lo, hi = boxes[0].hi;
    for (const auto& b : boxes) {
        lo = std::min(lo, b.lo);
        hi = std::max(hi, b.hi);
    }
    double pad = 0.06 * (hi - lo);
    if (pad <= 0.0) pad = std::abs(hi) > 0.0 ? 0.1 * std::abs(hi) : 0.5;
    lo -= pad;
    hi += pad;
    const auto y_of = [&](double v) {
        return margin_top + plot_h * (hi - v) / (hi - lo);
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) +
           "\" height=\"" + fmt(height) + "\" viewBox=\"0 0 " + fmt(width) +
           " " + fmt(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(width / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\" font-weight=\"bold\">" +
           metric + "</text>\n";

    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        const double y = y_of(v);
        svg += "<line x1=\"" + fmt(margin_left) + "\" y1=\"" + fmt(y) +
               "\" x2=\"" + fmt(width - 20.0) + "\" y2=\"" + fmt(y) +
               "\" stroke=\"#dddddd\"/>\n";
        svg += "<text x=\"" + fmt(margin_left - 8.0) + "\" y=\"" + fmt(y + 4.0) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" "
               "font-size=\"11\">" +
               fmt_tick(v) + "</text>\n";
    }

    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const BoxStats& b = boxes[i];
        const double cx = margin_left + slot * (i + 0.5);
        const double x0 = cx - box_w / 2, x1 = cx + box_w / 2;
        svg += "<line x1=\"" + fmt(cx) + "\" y1=\"" + fmt(y_of(b.lo)) +
               "\" x2=\"" + fmt(cx) + "\" y2=\"" + fmt(y_of(b.hi)) +
               "\" stroke=\"black\"/>\n";
        for (const double whisker : {b.lo, b.hi}) {
            svg += "<line x1=\"" + fmt(cx - box_w / 4) + "\" y1=\"" +
                   fmt(y_of(whisker)) + "\" x2=\"" + fmt(cx + box_w / 4) +
                   "\" y2=\"" + fmt(y_of(whisker)) + "\" stroke=\"black\"/>\n";
        }
        svg += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y_of(b.q75)) +
               "\" width=\"" + fmt(box_w) + "\" height=\"" +
               fmt(y_of(b.q25) - y_of(b.q75)) +
               "\" fill=\"#7ba7cc\" stroke=\"black\"/>\n";
        svg += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y_of(b.median)) +
               "\" x2=\"" + fmt(x1) + "\" y2=\"" + fmt(y_of(b.median)) +
               "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        const double label_y = margin_top + plot_h + 16.0;
        svg += "<text x=\"" + fmt(cx) + "\" y=\"" + fmt(label_y) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" "
               "font-size=\"11\" transform=\"rotate(-35 " +
               fmt(cx) + " " + fmt(label_y) + ")\">" + b.label + "</text>\n";
    }

    svg += "<line x1=\"" + fmt(margin_left) + "\" y1=\"" + fmt(margin_top) +
           "\" x2=\"" + fmt(margin_left) + "\" y2=\"" +
           fmt(margin_top + plot_h) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(margin_left) + "\" y1=\"" +
           fmt(margin_top + plot_h) + "\" x2=\"" + fmt(width - 20.0) +
           "\" y2=\"" + fmt(margin_top + plot_h) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(width / 2) + "\" y=\"" + fmt(height - 8.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">method</text>\n";
    svg += "<text x=\"16\" y=\"" + fmt(margin_top + plot_h / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\" transform=\"rotate(-90 16 " +
           fmt(margin_top + plot_h / 2) + ")\">" + metric + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace

std::vector<std::string> emit_plots(const std::string& results_csv,
                                    const std::string& output_dir) {
    const std::vector<ResultRow> rows = read_results_csv(results_csv);
    if (rows.empty()) {
        throw DataFormatError(results_csv + ": no data rows to plot");
    }
    ensure_directory(output_dir);

    std::vector<std::string> scenarios;
    for (const auto& row : rows) {
        if (std::find(scenarios.begin(), scenarios.end(), row.scenario) ==
            scenarios.end()) {
            scenarios.push_back(row.scenario);
        }
    }
    const bool prefix_scenario = scenarios.size() > 1;
    std::vector<std::string> groups;
    auto group_of = [&](const ResultRow& row) {
        return prefix_scenario ? row.scenario + "/" + row.method : row.method;
    };
    for (const auto& row : rows) {
        const std::string g = group_of(row);
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) {
            groups.push_back(g);
        }
    }

    std::vector<std::string> written;
    for (const auto& metric : kMetricColumns) {
        std::vector<BoxStats> boxes;
        for (const auto& group : groups) {
            std::vector<double> values;
            for (const auto& row : rows) {
                if (group_of(row) != group) continue;
                const std::optional<double>& v = row.*(metric.field);
                if (v) values.push_back(*v);
            }
            if (values.empty()) continue;
            std::sort(values.begin(), values.end());
            boxes.push_back(BoxStats{group, values.front(),
                                     quantile_sorted(values, 0.25),
                                     quantile_sorted(values, 0.5),
                                     quantile_sorted(values, 0.75),
                                     values.back()});
        }
        if (boxes.empty()) continue;
        const std::string path =
            output_dir + "/plot_" + std::string(metric.name) + ".svg";
        csv::write_lines(path, {boxplot_svg(metric.name, boxes)});
        written.push_back(path);
    }
    return written;
}

}  // namespace sprtl
