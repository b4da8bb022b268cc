#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sprtl/fabs.hpp"
#include "sprtl/spr_core.hpp"
#include "sprtl/survival_data.hpp"

namespace sprtl {

enum class Method {
    TargetOnly,
    NaivePooled,
    OraclePooled,
    OracleTrans,
    AutoPooled,
    AutoTrans,
};

const char* method_name(Method m);
Method parse_method(const std::string& name);

// Everything the fitting pipeline needs to know besides the data: path
// solver knobs, bandwidth rule, how lambda is picked on the path, and the
// cross-validation setup used when a method runs source detection itself.
struct SolverConfig {
    FabsConfig fabs;
    SmoothingRule smoothing = SmoothingRule::root_n();

    enum class LambdaMode { Bic, Rate };
    LambdaMode lambda_mode = LambdaMode::Bic;
    double rate_constant = 1.0;  // multiplies sqrt(log p / n) in Rate mode

    int detection_folds = 3;
    std::uint64_t detection_seed = 0;
};

// Per-solve facts surfaced for diagnostics and reports.
struct FitInfo {
    int path_length = 0;
    int backward_steps = 0;
    double selected_lambda = 0.0;
    double selected_loss = 0.0;
    int selected_df = 0;
};

struct TransferFit {
    Method method = Method::TargetOnly;
    CoefficientVector w_hat;      // fusion estimate, raw scale
    CoefficientVector delta_hat;  // debias correction (zero when the method has none)
    CoefficientVector beta_hat;   // w_hat + delta_hat, raw scale
    // Unit-norm copy of beta_hat; when beta_hat is identically zero the copy
    // is the zero vector with its normalized flag unset.
    CoefficientVector beta_hat_normalized;
    std::vector<int> source_set;  // source indices the fusion step pooled
    FitInfo fusion_info;
    FitInfo debias_info;
};

// Pooled penalized fit over {target} + sources[source_set], each cohort
// weighted by its share alpha_k = n_k / n of the pooled size; lambda is
// chosen per config (BIC over the path by default, with n = pooled size).
CoefficientVector fusion_step(const SurvivalDataset& target,
                              const std::vector<SurvivalDataset>& sources,
                              const std::vector<int>& source_set,
                              const SolverConfig& config,
                              FitInfo* info = nullptr);

// Target-only offset fit: penalized delta with the objective evaluated at
// w_hat + delta. Returns delta-hat (BIC with n = n0).
CoefficientVector debias_step(const SurvivalDataset& target,
                              const CoefficientVector& w_hat,
                              const SolverConfig& config,
                              FitInfo* info = nullptr);

// Runs one of the six comparison methods end to end. Oracle* methods
// require oracle_set; Auto* methods run the detection algorithm internally
// (fold seed from config.detection_seed). The debias step is skipped when
// the resolved source set is empty, which makes AutoTrans with no usable
// sources coincide exactly with TargetOnly.
TransferFit estimate(Method method, const SurvivalDataset& target,
                     const std::vector<SurvivalDataset>& sources,
                     const std::optional<std::vector<int>>& oracle_set,
                     const SolverConfig& config);

}  // namespace sprtl
