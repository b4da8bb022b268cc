#include "sprtl/survival_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sprtl/csv.hpp"
#include "sprtl/errors.hpp"
#include "sprtl/rng.hpp"

namespace sprtl {

namespace {

constexpr double kErrorVariance = 0.2;

// Substream tags so each random ingredient of a cohort draws from its own
// generator regardless of call order.
enum SeedTag : std::uint64_t {
    kTagCovariates = 1,
    kTagNoise = 2,
    kTagCensoring = 3,
    kTagSupportNoiseSet = 4,
    kTagComplementNoiseSet = 5,
    kTagFlipSet = 6,
    kTagPerturbNoise = 7,
    kTagCalibration = 8,
    kTagCovarianceBump = 9,
};

std::vector<int> sample_without_replacement(const std::vector<int>& pool,
                                            int count, Rng& rng) {
    std::vector<int> shuffled = pool;
    rng.shuffle(shuffled);
    shuffled.resize(count);
    std::sort(shuffled.begin(), shuffled.end());
    return shuffled;
}

}  // namespace

SurvivalDataset::SurvivalDataset(Eigen::VectorXd y, std::vector<int> delta,
                                 Eigen::MatrixXd x, std::string label)
    : y_(std::move(y)), delta_(std::move(delta)), x_(std::move(x)),
      label_(std::move(label)) {
    const auto n = y_.size();
    if (n < 2) {
        throw InvalidArgument("dataset '" + label_ +
                              "': need at least 2 observations, got " +
                              std::to_string(n));
    }
    if (static_cast<Eigen::Index>(delta_.size()) != n || x_.rows() != n) {
        throw InvalidArgument("dataset '" + label_ +
                              "': y, delta, x row counts disagree");
    }
    if (x_.cols() < 1) {
        throw InvalidArgument("dataset '" + label_ + "': no covariates");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(y_[i] >= 0.0) || !std::isfinite(y_[i])) {
            throw InvalidArgument("dataset '" + label_ + "': observation " +
                                  std::to_string(i) + " has invalid time");
        }
        if (delta_[i] != 0 && delta_[i] != 1) {
            throw InvalidArgument("dataset '" + label_ + "': observation " +
                                  std::to_string(i) +
                                  " has status outside {0,1}");
        }
    }
    if (!x_.allFinite()) {
        throw InvalidArgument("dataset '" + label_ +
                              "': covariates contain non-finite entries");
    }
}

SurvivalObservation SurvivalDataset::observation(int i) const {
    SurvivalObservation obs;
    obs.y = y_[i];
    obs.delta = delta_[i];
    obs.x.assign(x_.row(i).begin(), x_.row(i).end());
    return obs;
}

SurvivalDataset subset(const SurvivalDataset& source, const std::vector<int>& index,
                       const std::string& label) {
    const int m = static_cast<int>(index.size());
    Eigen::VectorXd y(m);
    std::vector<int> delta(m);
    Eigen::MatrixXd x(m, source.p());
    for (int i = 0; i < m; ++i) {
        const int j = index[i];
        if (j < 0 || j >= source.n()) {
            throw InvalidArgument("subset: index " + std::to_string(j) +
                                  " out of range for n=" +
                                  std::to_string(source.n()));
        }
        y[i] = source.y()[j];
        delta[i] = source.delta()[j];
        x.row(i) = source.x().row(j);
    }
    return SurvivalDataset(std::move(y), std::move(delta), std::move(x), label);
}

CoefficientVector normalize(const Eigen::VectorXd& values) {
    const double norm = values.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw InvalidArgument("normalize: vector has zero or non-finite norm");
    }
    return CoefficientVector{values / norm, true};
}

void ScenarioSpec::validate() const {
    const int K = n_sources_total();
    if (n0 < 2 || p < 1 || K < 1) {
        throw InvalidArgument("scenario '" + name + "': need n0 >= 2, p >= 1, K >= 1");
    }
    if (static_cast<int>(perturbation.size()) != K) {
        throw InvalidArgument("scenario '" + name +
                              "': perturbation list must have one entry per source");
    }
    for (int nk : n_sources) {
        if (nk < 2) throw InvalidArgument("scenario '" + name + "': source size < 2");
    }
    if (target_pattern.size() != p) {
        throw InvalidArgument("scenario '" + name + "': pattern length != p");
    }
    const int s = static_cast<int>((target_pattern.array() != 0.0).count());
    for (const auto& pp : perturbation) {
        if (pp.d1 < 0 || pp.d2 < 0 || pp.r < 0 || pp.u < 0.0) {
            throw InvalidArgument("scenario '" + name + "': negative perturbation knob");
        }
        if (pp.d1 > s || pp.r > s || pp.d2 > p - s) {
            throw InvalidArgument("scenario '" + name +
                                  "': perturbation sizes exceed support/complement");
        }
    }
    for (int k : informative) {
        if (k < 0 || k >= K) {
            throw InvalidArgument("scenario '" + name +
                                  "': informative index out of range");
        }
    }
    if (!(censoring_rate > 0.0 && censoring_rate < 1.0)) {
        throw InvalidArgument("scenario '" + name + "': censoring rate not in (0,1)");
    }
    if (test_size < 2) {
        throw InvalidArgument("scenario '" + name + "': test size < 2");
    }
}

SurvivalDataset simulate_cohort(const CoefficientVector& beta, int n,
                                const Eigen::MatrixXd& covariance, double theta,
                                std::uint64_t seed, const std::string& label) {
    const int p = static_cast<int>(beta.values.size());
    if (n < 2) throw InvalidArgument("simulate_cohort: n must be >= 2");
    if (!(theta > 0.0)) throw InvalidArgument("simulate_cohort: theta must be > 0");
    if (covariance.rows() != p || covariance.cols() != p) {
        throw InvalidArgument("simulate_cohort: covariance is not p x p");
    }

    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success) {
        throw InvalidArgument(
            "simulate_cohort: covariance Cholesky factorization failed "
            "(matrix not positive definite)");
    }
    const Eigen::MatrixXd chol_l = llt.matrixL();

    Rng x_rng(derive_seed(seed, kTagCovariates));
    Rng eps_rng(derive_seed(seed, kTagNoise));
    Rng cens_rng(derive_seed(seed, kTagCensoring));

    Eigen::MatrixXd z(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) z(i, j) = x_rng.normal();
    }
    Eigen::MatrixXd x = z * chol_l.transpose();

    const double eps_sd = std::sqrt(kErrorVariance);
    Eigen::VectorXd y(n);
    std::vector<int> delta(n);
    Eigen::VectorXd score = x * beta.values;
    for (int i = 0; i < n; ++i) {
        const double t = std::exp(score[i] + eps_rng.normal(0.0, eps_sd));
        const double c = cens_rng.exponential(theta);
        delta[i] = t <= c ? 1 : 0;
        y[i] = std::min(t, c);
    }
    return SurvivalDataset(std::move(y), std::move(delta), std::move(x), label);
}

Eigen::MatrixXd make_source_covariance(const Eigen::MatrixXd& sigma0,
                                       std::uint64_t seed) {
    if (sigma0.rows() != sigma0.cols()) {
        throw InvalidArgument("make_source_covariance: matrix not square");
    }
    Rng rng(derive_seed(seed, kTagCovarianceBump));
    Eigen::VectorXd v(sigma0.rows());
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = rng.normal(0.0, 0.3);
    return sigma0 + v * v.transpose();
}

Eigen::MatrixXd ar1_covariance(int p, double rho) {
    Eigen::MatrixXd sigma(p, p);
    for (int j = 0; j < p; ++j) {
        for (int k = 0; k < p; ++k) sigma(j, k) = std::pow(rho, std::abs(j - k));
    }
    return sigma;
}

CoefficientVector perturb_coefficients(const CoefficientVector& beta0, int d1,
                                       int d2, int r, double u,
                                       std::uint64_t seed) {
    const int p = static_cast<int>(beta0.values.size());
    std::vector<int> support;
    std::vector<int> complement;
    for (int j = 0; j < p; ++j) {
        (beta0.values[j] != 0.0 ? support : complement).push_back(j);
    }
    const int s = static_cast<int>(support.size());
    if (d1 < 0 || d2 < 0 || r < 0 || u < 0.0) {
        throw InvalidArgument("perturb_coefficients: negative parameter");
    }
    if (d1 > s || r > s) {
        throw InvalidArgument("perturb_coefficients: d1 or r exceeds support size " +
                              std::to_string(s));
    }
    if (d2 > p - s) {
        throw InvalidArgument("perturb_coefficients: d2 exceeds complement size " +
                              std::to_string(p - s));
    }

    Rng j1_rng(derive_seed(seed, kTagSupportNoiseSet));
    Rng j2_rng(derive_seed(seed, kTagComplementNoiseSet));
    Rng j3_rng(derive_seed(seed, kTagFlipSet));
    Rng noise_rng(derive_seed(seed, kTagPerturbNoise));

    const std::vector<int> j1 = sample_without_replacement(support, d1, j1_rng);
    const std::vector<int> j2 = sample_without_replacement(complement, d2, j2_rng);
    const std::vector<int> j3 = sample_without_replacement(support, r, j3_rng);

    Eigen::VectorXd b = beta0.values;
    for (int j : j1) b[j] += noise_rng.uniform(-u, u);
    for (int j : j2) b[j] += noise_rng.uniform(-u, u);
    for (int j : j3) b[j] = -beta0.values[j];
    return normalize(b);
}

double calibrate_censoring(const CoefficientVector& beta,
                           const Eigen::MatrixXd& covariance, double target_rate,
                           std::uint64_t seed, double tol, int n_mc) {
    if (!(target_rate > 0.0 && target_rate < 1.0)) {
        throw InvalidArgument("calibrate_censoring: target rate must be in (0,1)");
    }
    if (n_mc < 100) throw InvalidArgument("calibrate_censoring: n_mc too small");

    // One set of event times T_i and unit-exponential draws E_i serves every
    // theta: the subject is censored iff T_i > theta * E_i, so the censored
    // fraction is a nonincreasing step function of theta and bisection applies.
    const std::uint64_t sim_seed = derive_seed(seed, kTagCalibration);
    Rng x_rng(derive_seed(sim_seed, kTagCovariates));
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success) {
        throw InvalidArgument("calibrate_censoring: covariance not positive definite");
    }
    const Eigen::MatrixXd chol_l = llt.matrixL();
    const int p = static_cast<int>(beta.values.size());
    Rng eps_rng(derive_seed(sim_seed, kTagNoise));
    Rng cens_rng(derive_seed(sim_seed, kTagCensoring));
    const double eps_sd = std::sqrt(kErrorVariance);

    std::vector<double> t(n_mc);
    std::vector<double> e(n_mc);
    Eigen::VectorXd zrow(p);
    for (int i = 0; i < n_mc; ++i) {
        for (int j = 0; j < p; ++j) zrow[j] = x_rng.normal();
        const double score = beta.values.dot(chol_l * zrow);
        t[i] = std::exp(score + eps_rng.normal(0.0, eps_sd));
        e[i] = cens_rng.exponential(1.0);
    }

    auto censored_fraction = [&](double theta) {
        int censored = 0;
        for (int i = 0; i < n_mc; ++i) {
            if (t[i] > theta * e[i]) ++censored;
        }
        return static_cast<double>(censored) / n_mc;
    };

    double lo = 1.0, hi = 1.0;
    int guard = 0;
    while (censored_fraction(lo) < target_rate) {  // need smaller theta
        lo /= 4.0;
        if (++guard > 200) throw ConvergenceError("calibrate_censoring: no lower bracket");
    }
    guard = 0;
    while (censored_fraction(hi) > target_rate) {  // need larger theta
        hi *= 4.0;
        if (++guard > 200) throw ConvergenceError("calibrate_censoring: no upper bracket");
    }

    double theta = 0.5 * (lo + hi);
    for (int step = 0; step < 500; ++step) {
        theta = 0.5 * (lo + hi);
        const double rate = censored_fraction(theta);
        if (std::abs(rate - target_rate) <= tol) return theta;
        if (rate > target_rate) {
            lo = theta;  // too much censoring, grow theta
        } else {
            hi = theta;
        }
    }
    throw ConvergenceError("calibrate_censoring: bisection did not reach tolerance " +
                           std::to_string(tol));
}

double erc(const CoefficientVector& beta0, const CoefficientVector& betak) {
    const Eigen::Index p = beta0.values.size();
    if (betak.values.size() != p) {
        throw InvalidArgument("erc: coefficient lengths differ");
    }
    long long num = 0, den = 0;
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (i == j) continue;
            if (beta0.values[i] > beta0.values[j]) {
                ++den;
                if (betak.values[i] > betak.values[j]) ++num;
            }
        }
    }
    if (den == 0) {
        throw InvalidArgument("erc: reference coefficients are constant");
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

SurvivalDataset load_dataset_csv(const std::string& path) {
    csv::Table table = csv::read_table(path);
    if (table.header.size() < 3 || table.header[0] != "time" ||
        table.header[1] != "status") {
        throw DataFormatError(path +
                              ": header must start with 'time,status' followed by "
                              "at least one covariate column");
    }
    const int p = static_cast<int>(table.header.size()) - 2;
    const int n = static_cast<int>(table.rows.size());
    if (n < 2) throw DataFormatError(path + ": need at least 2 data rows");

    Eigen::VectorXd y(n);
    std::vector<int> delta(n);
    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i) {
        // +2 converts row index to file line number (header is line 1)
        const std::string where = path + ":" + std::to_string(i + 2);
        const auto& row = table.rows[i];
        y[i] = csv::parse_double(row[0], where + " column 'time'");
        if (y[i] < 0.0) {
            throw DataFormatError(where + ": negative time " + row[0]);
        }
        const long status = csv::parse_long(row[1], where + " column 'status'");
        if (status != 0 && status != 1) {
            throw DataFormatError(where + ": status must be 0 or 1, got " + row[1]);
        }
        delta[i] = static_cast<int>(status);
        for (int j = 0; j < p; ++j) {
            x(i, j) = csv::parse_double(row[j + 2],
                                        where + " column '" + table.header[j + 2] + "'");
        }
    }
    return SurvivalDataset(std::move(y), std::move(delta), std::move(x), path);
}

void write_dataset_csv(const std::string& path, const SurvivalDataset& data) {
    std::vector<std::string> lines;
    lines.reserve(data.n() + 1);
    std::vector<std::string> header = {"time", "status"};
    for (int j = 1; j <= data.p(); ++j) header.push_back("x" + std::to_string(j));
    lines.push_back(csv::join(header));
    for (int i = 0; i < data.n(); ++i) {
        std::vector<std::string> row;
        row.reserve(data.p() + 2);
        row.push_back(csv::format_double(data.y()[i]));
        row.push_back(std::to_string(data.delta()[i]));
        for (int j = 0; j < data.p(); ++j) {
            row.push_back(csv::format_double(data.x()(i, j)));
        }
        lines.push_back(csv::join(row));
    }
    csv::write_lines(path, lines);
}

}  // namespace sprtl
