#pragma once
// Data-parallel inner loops. Each kernel has an OpenMP implementation in
// cotc::kernels and a plain serial reference in cotc::kernels::serial that
// tests compare against and cotc_bench times. Both produce identical results:
// reductions are either integer-valued or written to fixed output slots.

#include <cstdint>
#include <span>
#include <vector>

namespace cotc::kernels {

// Below this many work items the OpenMP versions run single-threaded.
inline constexpr std::size_t kParallelThreshold = 256;

// All pairwise slopes (y[b]-y[a])/(t[b]-t[a]) for a<b, in row-major pair order.
std::vector<double> pairwise_slopes(std::span<const double> t, std::span<const double> y);

// Mann-Kendall statistic S = sum_{a<b} sign(y[b]-y[a]).
std::int64_t mann_kendall_s(std::span<const double> y);

// Log-likelihood of a single change after index tau (1-based, tau = 1..T-1)
// under Gaussian segments with plug-in means and one pooled variance,
// floored at `var_floor`. Element k holds tau = k+1.
std::vector<double> change_point_loglik(std::span<const double> y, double var_floor);

namespace serial {

std::vector<double> pairwise_slopes(std::span<const double> t, std::span<const double> y);
std::int64_t mann_kendall_s(std::span<const double> y);
std::vector<double> change_point_loglik(std::span<const double> y, double var_floor);

}  // namespace serial

}  // namespace cotc::kernels
