#include "cotc/kernels.hpp"

#include <cmath>
#include <numbers>

namespace cotc::kernels {

namespace {

inline int sign(double v) { return (v > 0.0) - (v < 0.0); }

// Offset of row a in the flattened upper triangle of an n x n pair table.
inline std::size_t row_offset(std::size_t a, std::size_t n) { return a * (2 * n - a - 1) / 2; }

// Two-pass sum of squares about the mean over y[lo, hi).
inline double segment_ss(std::span<const double> y, std::size_t lo, std::size_t hi) {
    double mean = 0.0;
    for (std::size_t i = lo; i < hi; ++i) mean += y[i];
    mean /= static_cast<double>(hi - lo);
    double ss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) ss += (y[i] - mean) * (y[i] - mean);
    return ss;
}

double loglik_at(std::span<const double> y, std::size_t tau, double var_floor) {
    const std::size_t n = y.size();
    const double ss = segment_ss(y, 0, tau) + segment_ss(y, tau, n);
    const double dn = static_cast<double>(n);
    double var = ss / dn;
    if (var < var_floor) var = var_floor;
    return -0.5 * dn * std::log(2.0 * std::numbers::pi * var) - ss / (2.0 * var);
}

}  // namespace

std::vector<double> pairwise_slopes(std::span<const double> t, std::span<const double> y) {
    const std::size_t n = y.size();
    std::vector<double> out(n < 2 ? 0 : n * (n - 1) / 2);
    const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16) if (out.size() > kParallelThreshold)
    for (std::int64_t ai = 0; ai < rows; ++ai) {
        const auto a = static_cast<std::size_t>(ai);
        std::size_t k = row_offset(a, n);
        for (std::size_t b = a + 1; b < n; ++b) out[k++] = (y[b] - y[a]) / (t[b] - t[a]);
    }
    return out;
}

std::int64_t mann_kendall_s(std::span<const double> y) {
    const auto n = static_cast<std::int64_t>(y.size());
    std::int64_t s = 0;
#pragma omp parallel for reduction(+ : s) schedule(dynamic, 16) if (y.size() * y.size() / 2 > kParallelThreshold)
    for (std::int64_t a = 0; a < n; ++a) {
        for (std::int64_t b = a + 1; b < n; ++b) s += sign(y[b] - y[a]);
    }
    return s;
}

std::vector<double> change_point_loglik(std::span<const double> y, double var_floor) {
    const std::size_t n = y.size();
    if (n < 2) return {};
    std::vector<double> out(n - 1);
    const auto m = static_cast<std::int64_t>(n - 1);
#pragma omp parallel for if (out.size() > kParallelThreshold)
    for (std::int64_t k = 0; k < m; ++k) out[k] = loglik_at(y, static_cast<std::size_t>(k) + 1, var_floor);
    return out;
}

namespace serial {

std::vector<double> pairwise_slopes(std::span<const double> t, std::span<const double> y) {
    std::vector<double> out;
    for (std::size_t a = 0; a < y.size(); ++a)
        for (std::size_t b = a + 1; b < y.size(); ++b) out.push_back((y[b] - y[a]) / (t[b] - t[a]));
    return out;
}

std::int64_t mann_kendall_s(std::span<const double> y) {
    std::int64_t s = 0;
    for (std::size_t a = 0; a < y.size(); ++a)
        for (std::size_t b = a + 1; b < y.size(); ++b) s += sign(y[b] - y[a]);
    return s;
}

std::vector<double> change_point_loglik(std::span<const double> y, double var_floor) {
    const std::size_t n = y.size();
    if (n < 2) return {};
    std::vector<double> out;
    for (std::size_t tau = 1; tau < n; ++tau) out.push_back(loglik_at(y, tau, var_floor));
    return out;
}

}  // namespace serial

}  // namespace cotc::kernels
