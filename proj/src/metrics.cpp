#include "sprtl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sprtl/errors.hpp"

namespace sprtl {

namespace {

std::vector<int> as_set(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

int intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::back_inserter(both));
    return static_cast<int>(both.size());
}

}  // namespace

std::vector<int> support(const Eigen::VectorXd& values, double tol) {
    if (tol < 0.0) throw InvalidArgument("support: tol must be >= 0");
    std::vector<int> out;
    for (int j = 0; j < values.size(); ++j) {
        if (std::abs(values[j]) > tol) out.push_back(j);
    }
    return out;
}

double f1_score(const std::vector<int>& selected, const std::vector<int>& truth) {
    const std::vector<int> sel = as_set(selected);
    const std::vector<int> tru = as_set(truth);
    if (sel.empty() && tru.empty()) return 1.0;
    if (sel.empty() || tru.empty()) return 0.0;
    const int hits = intersection_size(sel, tru);
    if (hits == 0) return 0.0;
    const double precision = static_cast<double>(hits) / sel.size();
    const double recall = static_cast<double>(hits) / tru.size();
    return 2.0 * precision * recall / (precision + recall);
}

double rmse(const CoefficientVector& beta_hat, const CoefficientVector& beta_true) {
    if (beta_hat.values.size() != beta_true.values.size()) {
        throw InvalidArgument("rmse: vectors differ in length");
    }
    return (beta_hat.values - beta_true.values).norm();
}

double logrank_statistic(const SurvivalDataset& test,
                         const Eigen::VectorXd& risk_scores,
                         bool* degenerate) {
    const int n = test.n();
    if (n < 4) throw InvalidArgument("logrank_statistic: need n >= 4");
    if (risk_scores.size() != n) {
        throw InvalidArgument("logrank_statistic: score length != n");
    }

    std::vector<double> sorted(risk_scores.data(), risk_scores.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double median =
        n % 2 == 1 ? sorted[n / 2]
                   : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    // group 0 = scores at or above the median (longer predicted survival)
    std::vector<int> group(n);
    int in_low = 0;
    for (int i = 0; i < n; ++i) {
        group[i] = risk_scores[i] >= median ? 0 : 1;
        in_low += group[i] == 0;
    }
    if (in_low == 0 || in_low == n) {
        throw InvalidArgument("logrank_statistic: median split left a group empty");
    }

    const auto& y = test.y();
    const auto& delta = test.delta();
    std::vector<double> event_times;
    int events_low = 0, events_high = 0;
    for (int i = 0; i < n; ++i) {
        if (delta[i]) {
            event_times.push_back(y[i]);
            (group[i] == 0 ? events_low : events_high) += 1;
        }
    }
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()),
                      event_times.end());

    double observed = 0.0, expected = 0.0, variance = 0.0;
    for (const double t : event_times) {
        long long at_risk = 0, at_risk_low = 0, deaths = 0, deaths_low = 0;
        for (int i = 0; i < n; ++i) {
            if (y[i] >= t) {
                ++at_risk;
                at_risk_low += group[i] == 0;
            }
            if (delta[i] && y[i] == t) {
                ++deaths;
                deaths_low += group[i] == 0;
            }
        }
        const double frac = static_cast<double>(at_risk_low) / at_risk;
        observed += static_cast<double>(deaths_low);
        expected += deaths * frac;
        if (at_risk > 1) {
            variance += deaths * frac * (1.0 - frac) *
                        static_cast<double>(at_risk - deaths) / (at_risk - 1);
        }
    }

    const bool bad = events_low == 0 || events_high == 0 || variance <= 0.0;
    if (degenerate) *degenerate = bad;
    if (variance <= 0.0) return 0.0;
    const double diff = observed - expected;
    return diff * diff / variance;
}

double detection_recall(const std::vector<int>& selected,
                        const std::vector<int>& truth) {
    const std::vector<int> tru = as_set(truth);
    if (tru.empty()) throw InvalidArgument("detection_recall: truth set is empty");
    const std::vector<int> sel = as_set(selected);
    return static_cast<double>(intersection_size(sel, tru)) / tru.size();
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double ks_distance_normal(std::vector<double> sample) {
    if (sample.empty()) throw InvalidArgument("ks_distance_normal: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double dist = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = normal_cdf(sample[i]);
        dist = std::max(dist, std::abs(cdf - static_cast<double>(i) / n));
        dist = std::max(dist, std::abs(cdf - static_cast<double>(i + 1) / n));
    }
    return dist;
}

}  // namespace sprtl
