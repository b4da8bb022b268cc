#include "sprtl/source_detection.hpp"

#include <numeric>

#include "sprtl/csv.hpp"
#include "sprtl/errors.hpp"
#include "sprtl/rng.hpp"
#include "sprtl/spr_core.hpp"

namespace sprtl {

std::vector<int> DetectionReport::selected_set() const {
    std::vector<int> set;
    for (const auto& d : per_source) {
        if (d.selected) set.push_back(d.source_index);
    }
    return set;
}

std::vector<int> assign_folds(int n, int folds, std::uint64_t seed) {
    if (folds < 1) throw InvalidArgument("assign_folds: folds must be >= 1");
    if (folds > n) {
        throw InvalidArgument("assign_folds: folds " + std::to_string(folds) +
                              " exceeds n " + std::to_string(n));
    }
    // Shuffle indices, then deal them out round-robin: sizes differ by <= 1.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> fold_of(n);
    for (int pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % folds;
    return fold_of;
}

DetectionReport detect(const SurvivalDataset& target,
                       const std::vector<SurvivalDataset>& sources,
                       const SolverConfig& config, int folds,
                       std::uint64_t seed) {
    if (folds < 2) throw InvalidArgument("detect: need at least 2 folds");

    DetectionReport report;
    report.seed = seed;
    report.fold_assignments = assign_folds(target.n(), folds, seed);

    std::vector<SurvivalDataset> train_sets;
    std::vector<SurvivalDataset> test_sets;
    train_sets.reserve(folds);
    test_sets.reserve(folds);
    for (int r = 0; r < folds; ++r) {
        std::vector<int> train_idx, test_idx;
        for (int i = 0; i < target.n(); ++i) {
            (report.fold_assignments[i] == r ? test_idx : train_idx).push_back(i);
        }
        const std::string tag = "fold" + std::to_string(r + 1);
        if (train_idx.size() < 2 || test_idx.size() < 2) {
            throw InvalidArgument("detect: " + tag +
                                  " leaves fewer than 2 observations on one side");
        }
        train_sets.push_back(subset(target, train_idx, target.label() + "/-" + tag));
        test_sets.push_back(subset(target, test_idx, target.label() + "/" + tag));
    }

    const std::vector<SurvivalDataset> no_sources;
    double threshold_sum = 0.0;
    std::vector<double> source_sum(sources.size(), 0.0);
    for (int r = 0; r < folds; ++r) {
        const auto& test = test_sets[r];
        // c_index throws on a fold with no comparable pairs; re-badge the
        // error with the fold id so the caller knows which split degenerated
        try {
            CoefficientVector w0 =
                fusion_step(train_sets[r], no_sources, {}, config);
            threshold_sum += c_index(w0, test);
            for (std::size_t k = 0; k < sources.size(); ++k) {
                CoefficientVector wk = fusion_step(train_sets[r], sources,
                                                   {static_cast<int>(k)}, config);
                source_sum[k] += c_index(wk, test);
            }
        } catch (const InvalidArgument& err) {
            throw InvalidArgument("detect: fold " + std::to_string(r + 1) + ": " +
                                  err.what());
        }
    }

    report.threshold = threshold_sum / folds;
    report.per_source.reserve(sources.size());
    for (std::size_t k = 0; k < sources.size(); ++k) {
        SourceDecision d;
        d.source_index = static_cast<int>(k);
        d.source_label = sources[k].label().empty()
                             ? "source" + std::to_string(k + 1)
                             : sources[k].label();
        d.c_index = source_sum[k] / folds;
        d.gain = d.c_index - report.threshold;
        d.selected = d.gain > 0.0;
        report.per_source.push_back(std::move(d));
    }
    return report;
}

void write_detection_csv(const std::string& path, const DetectionReport& report) {
    std::vector<std::string> lines;
    lines.push_back("source_label,c_index,threshold,gain,selected");
    for (const auto& d : report.per_source) {
        lines.push_back(csv::join({d.source_label, csv::format_double(d.c_index),
                                   csv::format_double(report.threshold),
                                   csv::format_double(d.gain),
                                   d.selected ? "1" : "0"}));
    }
    csv::write_lines(path, lines);
}

}  // namespace sprtl
