#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sprtl/survival_data.hpp"
#include "sprtl/transfer.hpp"

namespace sprtl {

struct SourceDecision {
    int source_index = 0;
    std::string source_label;
    double c_index = 0.0;  // cross-validated C-hat(k)
    double gain = 0.0;     // c_index - threshold
    bool selected = false; // strictly positive gain
};

struct DetectionReport {
    double threshold = 0.0;  // cross-validated C-hat(0)
    std::vector<SourceDecision> per_source;
    std::vector<int> fold_assignments;  // fold id per target observation
    std::uint64_t seed = 0;

    std::vector<int> selected_set() const;
};

// Uniformly random partition of n observations into `folds` groups whose
// sizes differ by at most one. Deterministic in the seed.
std::vector<int> assign_folds(int n, int folds, std::uint64_t seed);

// Cross-validated informative-source screening: one random split of the
// target; per fold, a target-only fit gives the threshold C-index and a
// fit pooling each single source gives that source's C-index, both
// evaluated on the held-out fold; a source is selected iff its fold-mean
// C-index strictly exceeds the threshold.
DetectionReport detect(const SurvivalDataset& target,
                       const std::vector<SurvivalDataset>& sources,
                       const SolverConfig& config, int folds = 3,
                       std::uint64_t seed = 0);

// CSV with columns (source_label, c_index, threshold, gain, selected).
void write_detection_csv(const std::string& path, const DetectionReport& report);

}  // namespace sprtl
