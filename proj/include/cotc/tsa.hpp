#pragma once
// Estimators over irregular longitudinal series. All functions are pure
// given their inputs (and an explicit seed where stochastic).

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cotc/types.hpp"

namespace cotc::tsa {

struct Point {
    double t = 0.0;  // epoch days
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

struct SeverityPoint {
    double t = 0.0;
    SeverityLevel level = SeverityLevel::None;
    bool operator==(const SeverityPoint&) const = default;
};

// Ordered series with strictly increasing timestamps and at least one point.
class TimeSeries {
public:
    explicit TimeSeries(std::vector<Point> points);
    // Numeric view of a severity channel (ordinal as y); keeps the channel.
    static TimeSeries from_severity(std::vector<SeverityPoint> levels);

    const std::vector<Point>& points() const { return points_; }
    const std::vector<SeverityPoint>& severity() const { return severity_; }
    std::size_t size() const { return points_.size(); }
    double t_start() const { return points_.front().t; }
    double t_end() const { return points_.back().t; }
    std::vector<double> times() const;
    std::vector<double> values() const;
    bool operator==(const TimeSeries&) const = default;

private:
    std::vector<Point> points_;
    std::vector<SeverityPoint> severity_;
};

// Parses "YYYY-MM-DD", "YYYY-MM-DD hh:mm[:ss]" or "YYYY-MM-DDThh:mm[:ss][Z]"
// to fractional days since 1970-01-01. Throws ValidationError.
double parse_iso8601_days(const std::string& text);

// One biomarker across patients.
struct Panel {
    std::map<std::string, TimeSeries> patients;

    std::size_t total_points() const;
    std::size_t min_points() const;
    // Merge all patients into one series; equal timestamps are averaged.
    TimeSeries pooled() const;
};

// ---- robust / nonparametric trend -------------------------------------

double theil_sen(const TimeSeries& series);  // >= 2 points

struct MannKendallResult {
    std::int64_t s = 0;
    double variance = 0.0;  // tie-corrected Var(S)
    double z = 0.0;
    double p_proxy = 1.0;  // two-sided normal approximation
    Direction direction = Direction::flat;
};

// Direction is flat when |Z| < z_threshold. Requires >= 3 points.
MannKendallResult mann_kendall(const TimeSeries& series, double z_threshold = 1.959963984540054);

struct OlsSlope {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_variance = 0.0;  // 0 when n == 2
};

// Ordinary least squares on the raw series. Requires >= 2 points.
OlsSlope simple_slope(const TimeSeries& series);

// ---- mixed effects -----------------------------------------------------

struct MixedEffectsFit {
    double beta0 = 0.0;
    double beta1 = 0.0;       // slope per day
    double beta1_se = 0.0;    // model-based standard error of beta1
    double sigma_u2 = 0.0;
    double sigma_eps2 = 0.0;
    double lambda = 0.0;      // sigma_u2 / sigma_eps2 at the optimum
    std::optional<double> ar1_rho;
    std::map<std::string, double> per_patient_u;  // BLUPs, centred to mean 0
    double log_likelihood = 0.0;
    bool converged = true;
};

struct MixedEffectsOptions {
    bool use_ar1 = false;
    double lambda_max = 1e8;  // upper end of the log-spaced profile grid
    std::size_t ar1_min_points = 7;  // AR(1) only when every patient has n > 6
};

// Random-intercept model y_ij = b0 + b1 t_ij + u_i + e_ij fit by maximizing
// the marginal Gaussian likelihood profiled over lambda = sigma_u2/sigma_eps2.
// converged=false when the optimum sits on the upper grid boundary.
// Throws ValidationError on degenerate designs.
MixedEffectsFit fit_mixed_effects(const Panel& panel, const MixedEffectsOptions& opts = {});

// ---- change point ------------------------------------------------------

struct ChangePointResult {
    std::vector<double> posterior;  // posterior[k] = P(tau = k+1), tau in 1..T-1
    std::size_t mode = 1;           // 1-based tau with maximal mass (smallest on ties)
    double mode_mass = 0.0;
    double mean_before = 0.0;       // segment means at the mode
    double mean_after = 0.0;

    double probability(std::size_t tau) const { return posterior.at(tau - 1); }
};

inline constexpr double kVarianceFloor = 1e-12;

// Uniform prior over tau in 1..T-1. Requires T >= 4.
ChangePointResult change_point_posterior(const TimeSeries& series);

// ---- Gaussian process --------------------------------------------------

struct KernelParams {
    double lengthscale = 1.0;
    double signal_var = 1.0;
    double noise_var = 0.0;
    void validate() const;
};

struct GpPosterior {
    double mean = 0.0;
    double variance = 0.0;
    KernelParams kernel_params;
    double jitter = 0.0;  // diagonal jitter that was needed, 0 if none
};

double se_kernel(double a, double b, const KernelParams& p);

// Zero-mean GP with a squared-exponential kernel. `train` may be empty.
// Throws NumericalError when factorization fails even after jitter escalation.
GpPosterior gp_posterior(std::span<const Point> train, double query_t, const KernelParams& params);
GpPosterior gp_posterior(const TimeSeries& train, double query_t, const KernelParams& params);

// Posterior at several query points with a single factorization.
std::vector<GpPosterior> gp_posterior_many(std::span<const Point> train, std::span<const double> query_t,
                                           const KernelParams& params);

// ---- imputation --------------------------------------------------------

struct StackEstimate {
    double estimate = 0.0;
    double within_variance = 0.0;
};

struct PooledEstimate {
    double point = 0.0;
    double within = 0.0;   // W
    double between = 0.0;  // B
    double total = 0.0;    // W + (1 + 1/K) B
};

// Rubin's rules over K >= 2 stack estimates.
PooledEstimate rubin_pool(std::span<const StackEstimate> estimates);

struct ImputationStacks {
    std::vector<TimeSeries> stacks;
    std::size_t k = 5;
    double noise_variance = 0.0;  // mean squared leave-one-out interpolation residual
    std::optional<PooledEstimate> pooled;
};

// Fills grid points by linear interpolation plus Gaussian noise.
ImputationStacks impute_stacks(const TimeSeries& series, std::span<const double> grid, std::size_t k,
                               std::uint64_t seed);

// Grid points needed to fill gaps wider than gap_factor x median spacing.
std::vector<double> gap_grid(const TimeSeries& series, double gap_factor = 3.0);
bool has_gaps(const TimeSeries& series, double gap_factor = 3.0);

// ---- cohort z-score ----------------------------------------------------

struct CohortStats {
    double mu = 0.0;
    double sigma = 1.0;
    std::string age_band;
    std::string sex;
};

struct ZScore {
    double z = 0.0;
    bool anomalous = false;
};

inline constexpr double kAnomalyThreshold = 2.5;

ZScore cohort_zscore(double value, const CohortStats& stats);  // anomalous iff |z| > 2.5

// ---- PCA ---------------------------------------------------------------

struct PcaResult {
    std::vector<std::vector<double>> components;  // m rows (eigenvectors), each of analyte length
    std::vector<double> eigenvalues;              // descending, per component
    std::vector<std::vector<double>> projected;   // Z = W^T Y, m x times
    std::size_t requested = 0;
    std::size_t rank = 0;
    bool truncated = false;  // requested > rank; only rank components returned
};

// rows: analytes x times. Rows are mean-centred internally.
PcaResult pca_project(const std::vector<std::vector<double>>& rows, std::size_t m);

}  // namespace cotc::tsa
