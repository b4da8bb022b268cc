#include "sprtl/transfer.hpp"

#include <algorithm>

#include "sprtl/errors.hpp"
#include "sprtl/source_detection.hpp"

namespace sprtl {

namespace {

FitInfo info_from(const SolutionPath& path, const PathPoint& chosen) {
    FitInfo info;
    info.path_length = static_cast<int>(path.points.size());
    info.backward_steps = path.backward_steps;
    info.selected_lambda = chosen.lambda;
    info.selected_loss = chosen.loss;
    info.selected_df = chosen.df;
    return info;
}

const PathPoint& select_point(const SolutionPath& path, const SolverConfig& config,
                              int n, int p, double null_loss) {
    if (config.lambda_mode == SolverConfig::LambdaMode::Rate) {
        return select_rate(path, config.rate_constant, n, p);
    }
    return select_bic(path, n, null_loss);
}

std::vector<int> checked_sorted_set(const std::vector<int>& source_set,
                                    std::size_t n_sources) {
    std::vector<int> set = source_set;
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    for (int k : set) {
        if (k < 0 || k >= static_cast<int>(n_sources)) {
            throw InvalidArgument("source set index " + std::to_string(k) +
                                  " out of range for " +
                                  std::to_string(n_sources) + " sources");
        }
    }
    return set;
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::TargetOnly: return "TargetOnly";
        case Method::NaivePooled: return "NaivePooled";
        case Method::OraclePooled: return "OraclePooled";
        case Method::OracleTrans: return "OracleTrans";
        case Method::AutoPooled: return "AutoPooled";
        case Method::AutoTrans: return "AutoTrans";
    }
    throw InvalidArgument("unknown method enum value");
}

Method parse_method(const std::string& name) {
    for (Method m : {Method::TargetOnly, Method::NaivePooled, Method::OraclePooled,
                     Method::OracleTrans, Method::AutoPooled, Method::AutoTrans}) {
        if (name == method_name(m)) return m;
    }
    throw InvalidArgument("unknown method '" + name + "'");
}

CoefficientVector fusion_step(const SurvivalDataset& target,
                              const std::vector<SurvivalDataset>& sources,
                              const std::vector<int>& source_set,
                              const SolverConfig& config, FitInfo* info) {
    const std::vector<int> set = checked_sorted_set(source_set, sources.size());
    std::vector<const SurvivalDataset*> cohorts;
    cohorts.reserve(set.size() + 1);
    cohorts.push_back(&target);
    for (int k : set) cohorts.push_back(&sources[k]);

    PooledSprLoss loss(cohorts, config.smoothing);
    SolutionPath path = fabs_solve(loss, config.fabs);
    // The path starts at beta = 0, so its first point carries the null loss.
    const PathPoint& chosen =
        select_point(path, config, loss.total_n(), loss.dimension(),
                     path.points.front().loss);
    if (info) *info = info_from(path, chosen);
    return CoefficientVector{chosen.beta.values, false};
}

CoefficientVector debias_step(const SurvivalDataset& target,
                              const CoefficientVector& w_hat,
                              const SolverConfig& config, FitInfo* info) {
    if (w_hat.values.size() != target.p()) {
        throw InvalidArgument("debias_step: w_hat length != target p");
    }
    SprLoss loss(target, config.smoothing.sigma_for(target.n()));
    SolutionPath path = fabs_solve_offset(loss, w_hat.values, config.fabs);
    // The offset path starts at delta = 0 where the loss is already the
    // offset fit's loss, not the null one; evaluate the null loss directly.
    const double null_loss = loss.value(Eigen::VectorXd::Zero(target.p()));
    const PathPoint& chosen =
        select_point(path, config, target.n(), target.p(), null_loss);
    if (info) *info = info_from(path, chosen);
    return CoefficientVector{chosen.beta.values, false};
}

TransferFit estimate(Method method, const SurvivalDataset& target,
                     const std::vector<SurvivalDataset>& sources,
                     const std::optional<std::vector<int>>& oracle_set,
                     const SolverConfig& config) {
    TransferFit fit;
    fit.method = method;

    switch (method) {
        case Method::TargetOnly:
            fit.source_set = {};
            break;
        case Method::NaivePooled:
            fit.source_set.resize(sources.size());
            for (std::size_t k = 0; k < sources.size(); ++k) {
                fit.source_set[k] = static_cast<int>(k);
            }
            break;
        case Method::OraclePooled:
        case Method::OracleTrans:
            if (!oracle_set) {
                throw InvalidArgument(std::string(method_name(method)) +
                                      " requires an oracle source set");
            }
            fit.source_set = checked_sorted_set(*oracle_set, sources.size());
            break;
        case Method::AutoPooled:
        case Method::AutoTrans: {
            DetectionReport report = detect(target, sources, config,
                                            config.detection_folds,
                                            config.detection_seed);
            fit.source_set = report.selected_set();
            break;
        }
    }

    fit.w_hat = fusion_step(target, sources, fit.source_set, config,
                            &fit.fusion_info);

    const bool debias = (method == Method::OracleTrans ||
                         method == Method::AutoTrans) &&
                        !fit.source_set.empty();
    if (debias) {
        fit.delta_hat = debias_step(target, fit.w_hat, config, &fit.debias_info);
    } else {
        fit.delta_hat = CoefficientVector{
            Eigen::VectorXd::Zero(target.p()), false};
    }

    fit.beta_hat = CoefficientVector{
        fit.w_hat.values + fit.delta_hat.values, false};
    const double norm = fit.beta_hat.values.norm();
    if (norm > 0.0) {
        fit.beta_hat_normalized = normalize(fit.beta_hat.values);
    } else {
        fit.beta_hat_normalized = CoefficientVector{fit.beta_hat.values, false};
    }
    return fit;
}

}  // namespace sprtl
