#include "cotc/tsa.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cotc/kernels.hpp"

namespace cotc::tsa {

// ---- series ---------------------------------------------------------------

TimeSeries::TimeSeries(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) throw ValidationError("time series needs at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!std::isfinite(points_[i].t) || !std::isfinite(points_[i].y))
            throw ValidationError("time series point " + std::to_string(i) + " is not finite");
        if (i > 0 && !(points_[i].t > points_[i - 1].t))
            throw ValidationError("time series timestamps must be strictly increasing (index " + std::to_string(i) +
                                  ")");
    }
}

TimeSeries TimeSeries::from_severity(std::vector<SeverityPoint> levels) {
    std::vector<Point> pts;
    pts.reserve(levels.size());
    for (const auto& s : levels) pts.push_back({s.t, static_cast<double>(ordinal(s.level))});
    TimeSeries ts(std::move(pts));
    ts.severity_ = std::move(levels);
    return ts;
}

std::vector<double> TimeSeries::times() const {
    std::vector<double> out;
    out.reserve(points_.size());
    for (const auto& p : points_) out.push_back(p.t);
    return out;
}

std::vector<double> TimeSeries::values() const {
    std::vector<double> out;
    out.reserve(points_.size());
    for (const auto& p : points_) out.push_back(p.y);
    return out;
}

double parse_iso8601_days(const std::string& text) {
    int y = 0, mo = 0, d = 0, hh = 0, mm = 0;
    double ss = 0.0;
    char sep = 0;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) != 3 || consumed != 10)
        throw ValidationError("bad ISO-8601 date '" + text + "'");
    std::string rest = text.substr(10);
    if (!rest.empty()) {
        int n2 = 0;
        if (std::sscanf(rest.c_str(), "%c%2d:%2d%n", &sep, &hh, &mm, &n2) != 3 || (sep != 'T' && sep != ' '))
            throw ValidationError("bad ISO-8601 time in '" + text + "'");
        rest = rest.substr(static_cast<std::size_t>(n2));
        if (!rest.empty() && rest[0] == ':') {
            int n3 = 0;
            if (std::sscanf(rest.c_str(), ":%lf%n", &ss, &n3) != 1) throw ValidationError("bad seconds in '" + text + "'");
            rest = rest.substr(static_cast<std::size_t>(n3));
        }
        if (rest == "Z") rest.clear();
        if (!rest.empty()) throw ValidationError("unsupported ISO-8601 suffix in '" + text + "'");
        if (hh > 23 || mm > 59 || ss < 0.0 || ss >= 61.0) throw ValidationError("time out of range in '" + text + "'");
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw ValidationError("invalid calendar date '" + text + "'");
    const double days = static_cast<double>(sys_days{ymd}.time_since_epoch().count());
    return days + (hh * 3600.0 + mm * 60.0 + ss) / 86400.0;
}

std::size_t Panel::total_points() const {
    std::size_t n = 0;
    for (const auto& [_, s] : patients) n += s.size();
    return n;
}

std::size_t Panel::min_points() const {
    std::size_t n = std::numeric_limits<std::size_t>::max();
    for (const auto& [_, s] : patients) n = std::min(n, s.size());
    return patients.empty() ? 0 : n;
}

TimeSeries Panel::pooled() const {
    std::map<double, std::pair<double, int>> acc;
    for (const auto& [_, s] : patients) {
        for (const auto& p : s.points()) {
            auto& [sum, count] = acc[p.t];
            sum += p.y;
            ++count;
        }
    }
    std::vector<Point> pts;
    for (const auto& [t, sc] : acc) pts.push_back({t, sc.first / sc.second});
    return TimeSeries(std::move(pts));
}

// ---- robust trend ---------------------------------------------------------

namespace {

double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

double theil_sen(const TimeSeries& series) {
    if (series.size() < 2) throw ValidationError("theil_sen needs at least 2 points");
    const auto t = series.times();
    const auto y = series.values();
    auto slopes = kernels::pairwise_slopes(t, y);
    return median_inplace(slopes);
}

MannKendallResult mann_kendall(const TimeSeries& series, double z_threshold) {
    const std::size_t n = series.size();
    if (n < 3) throw ValidationError("mann_kendall needs at least 3 points");
    auto y = series.values();
    MannKendallResult r;
    r.s = kernels::mann_kendall_s(y);

    std::sort(y.begin(), y.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && y[j] == y[i]) ++j;
        const double g = static_cast<double>(j - i);
        tie_term += g * (g - 1.0) * (2.0 * g + 5.0);
        i = j;
    }
    const double dn = static_cast<double>(n);
    r.variance = (dn * (dn - 1.0) * (2.0 * dn + 5.0) - tie_term) / 18.0;
    if (r.variance > 0.0) {
        const double s = static_cast<double>(r.s);
        if (r.s > 0)
            r.z = (s - 1.0) / std::sqrt(r.variance);
        else if (r.s < 0)
            r.z = (s + 1.0) / std::sqrt(r.variance);
    }
    r.p_proxy = std::erfc(std::fabs(r.z) / std::sqrt(2.0));
    if (std::fabs(r.z) < z_threshold)
        r.direction = Direction::flat;
    else
        r.direction = r.s > 0 ? Direction::up : Direction::down;
    return r;
}

OlsSlope simple_slope(const TimeSeries& series) {
    const std::size_t n = series.size();
    if (n < 2) throw ValidationError("simple_slope needs at least 2 points");
    double tm = 0.0, ym = 0.0;
    for (const auto& p : series.points()) {
        tm += p.t;
        ym += p.y;
    }
    tm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : series.points()) {
        sxx += (p.t - tm) * (p.t - tm);
        sxy += (p.t - tm) * (p.y - ym);
    }
    OlsSlope r;
    r.slope = sxy / sxx;
    r.intercept = ym - r.slope * tm;
    if (n > 2) {
        double rss = 0.0;
        for (const auto& p : series.points()) {
            const double e = p.y - r.intercept - r.slope * p.t;
            rss += e * e;
        }
        r.slope_variance = rss / static_cast<double>(n - 2) / sxx;
    }
    return r;
}

// ---- mixed effects --------------------------------------------------------

namespace {

struct Row {
    double x0, x1, y;
};

struct Group {
    std::string id;
    std::vector<Row> rows;
};

struct ProfileEval {
    double loglik = 0.0;
    double beta0 = 0.0, beta1 = 0.0;
    double sigma_eps2 = 0.0;
    double var_beta1_unit = 0.0;  // (A^-1)_11
};

// Closed-form GLS given lambda; rows carry the (possibly transformed)
// design, z is the loading of the random intercept.
ProfileEval evaluate_profile(const std::vector<Group>& groups, double z, double lambda, std::size_t n_total) {
    double a00 = 0, a01 = 0, a11 = 0, b0 = 0, b1 = 0;
    const double lz2 = lambda * z * z;
    for (const auto& g : groups) {
        const double ni = static_cast<double>(g.rows.size());
        const double c = lz2 / (1.0 + ni * lz2);
        double s0 = 0, s1 = 0, sy = 0;
        for (const auto& r : g.rows) {
            a00 += r.x0 * r.x0;
            a01 += r.x0 * r.x1;
            a11 += r.x1 * r.x1;
            b0 += r.x0 * r.y;
            b1 += r.x1 * r.y;
            s0 += r.x0;
            s1 += r.x1;
            sy += r.y;
        }
        a00 -= c * s0 * s0;
        a01 -= c * s0 * s1;
        a11 -= c * s1 * s1;
        b0 -= c * s0 * sy;
        b1 -= c * s1 * sy;
    }
    const double det = a00 * a11 - a01 * a01;
    ProfileEval ev;
    ev.beta0 = (a11 * b0 - a01 * b1) / det;
    ev.beta1 = (a00 * b1 - a01 * b0) / det;
    ev.var_beta1_unit = a00 / det;

    double q = 0.0, logdet = 0.0;
    for (const auto& g : groups) {
        const double ni = static_cast<double>(g.rows.size());
        const double c = lz2 / (1.0 + ni * lz2);
        double rr = 0.0, rs = 0.0;
        for (const auto& r : g.rows) {
            const double e = r.y - ev.beta0 * r.x0 - ev.beta1 * r.x1;
            rr += e * e;
            rs += e;
        }
        q += rr - c * rs * rs;
        logdet += std::log1p(ni * lz2);
    }
    const double dn = static_cast<double>(n_total);
    ev.sigma_eps2 = std::max(q / dn, 0.0);
    const double var = std::max(ev.sigma_eps2, kVarianceFloor);
    ev.loglik = -0.5 * dn * (std::log(2.0 * std::numbers::pi * var) + 1.0) - 0.5 * logdet;
    return ev;
}

struct CoreFit {
    ProfileEval eval;
    double lambda = 0.0;
    bool converged = true;
    bool upper_boundary = false;
};

CoreFit profile_fit(const std::vector<Group>& groups, double z, double lambda_max) {
    std::size_t n_total = 0;
    double ysq = 0.0;
    for (const auto& g : groups) {
        n_total += g.rows.size();
        for (const auto& r : g.rows) ysq += r.y * r.y;
    }
    CoreFit out;
    const ProfileEval at_zero = evaluate_profile(groups, z, 0.0, n_total);
    // Exact fit: residuals vanish at lambda = 0, so OLS is the answer.
    if (at_zero.sigma_eps2 * static_cast<double>(n_total) <= 1e-24 * std::max(1.0, ysq)) {
        out.eval = at_zero;
        return out;
    }

    std::vector<double> grid{0.0};
    for (double e = -6.0; std::pow(10.0, e) <= lambda_max * (1.0 + 1e-12); e += 0.25) grid.push_back(std::pow(10.0, e));
    std::size_t best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double ll = evaluate_profile(groups, z, grid[i], n_total).loglik;
        if (ll > best_ll) {
            best_ll = ll;
            best = i;
        }
    }
    if (best + 1 == grid.size()) {
        out.lambda = grid.back();
        out.eval = evaluate_profile(groups, z, out.lambda, n_total);
        out.converged = false;
        out.upper_boundary = true;
        return out;
    }

    // Golden-section refinement between the neighbours of the best grid
    // point; log-lambda scale away from zero, linear scale next to it.
    const bool near_zero = best <= 1;
    const double lo = near_zero ? 0.0 : std::log(grid[best - 1]);
    const double hi = near_zero ? grid[best + 1] : std::log(grid[best + 1]);
    auto to_lambda = [&](double x) { return near_zero ? x : std::exp(x); };
    auto f = [&](double x) { return evaluate_profile(groups, z, to_lambda(x), n_total).loglik; };
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && (b - a) > 1e-12 * std::max(1.0, std::fabs(a) + std::fabs(b)); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    double x = 0.5 * (a + b);
    double lambda = to_lambda(x);
    ProfileEval ev = evaluate_profile(groups, z, lambda, n_total);
    // keep the grid point if refinement did not improve on it
    if (ev.loglik < best_ll) {
        lambda = grid[best];
        ev = evaluate_profile(groups, z, lambda, n_total);
    }
    out.lambda = lambda;
    out.eval = ev;
    return out;
}

std::vector<Group> groups_from_panel(const Panel& panel) {
    std::vector<Group> groups;
    for (const auto& [id, s] : panel.patients) {
        Group g{id, {}};
        for (const auto& p : s.points()) g.rows.push_back({1.0, p.t, p.y});
        groups.push_back(std::move(g));
    }
    return groups;
}

}  // namespace

MixedEffectsFit fit_mixed_effects(const Panel& panel, const MixedEffectsOptions& opts) {
    if (panel.patients.empty()) throw ValidationError("mixed effects: empty panel");
    const std::size_t total = panel.total_points();
    if (panel.patients.size() < 2 && total < 4)
        throw ValidationError("mixed effects: need >= 2 patients or >= 4 points");
    if (panel.patients.size() >= 2 && panel.min_points() < 2)
        throw ValidationError("mixed effects: every patient needs >= 2 points");
    {
        double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
        for (const auto& [_, s] : panel.patients) {
            tmin = std::min(tmin, s.t_start());
            tmax = std::max(tmax, s.t_end());
        }
        if (!(tmax > tmin)) throw ValidationError("mixed effects: degenerate design (all timestamps equal)");
    }

    // Centre time for conditioning; beta0 is shifted back afterwards.
    double tbar = 0.0;
    for (const auto& [_, s] : panel.patients)
        for (const auto& p : s.points()) tbar += p.t;
    tbar /= static_cast<double>(total);

    auto groups = groups_from_panel(panel);
    for (auto& g : groups)
        for (auto& r : g.rows) r.x1 -= tbar;

    double z = 1.0;
    std::optional<double> rho;
    CoreFit core = profile_fit(groups, z, opts.lambda_max);

    if (opts.use_ar1 && panel.min_points() >= opts.ar1_min_points) {
        const auto& ev = core.eval;
        double num = 0.0, den = 0.0;
        for (const auto& g : groups) {
            std::vector<double> e;
            for (const auto& r : g.rows) e.push_back(r.y - ev.beta0 * r.x0 - ev.beta1 * r.x1);
            const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
            for (std::size_t j = 0; j < e.size(); ++j) {
                const double w = e[j] - mean;
                den += w * w;
                if (j > 0) num += w * (e[j - 1] - mean);
            }
        }
        const double r = den > 1e-300 ? std::clamp(num / den, -0.99, 0.99) : 0.0;
        rho = r;
        // single Cochrane-Orcutt pass: drop each patient's first observation
        std::vector<Group> transformed;
        for (const auto& g : groups) {
            Group t{g.id, {}};
            for (std::size_t j = 1; j < g.rows.size(); ++j) {
                const auto& cur = g.rows[j];
                const auto& prev = g.rows[j - 1];
                t.rows.push_back({1.0 - r, cur.x1 - r * prev.x1, cur.y - r * prev.y});
            }
            transformed.push_back(std::move(t));
        }
        groups = std::move(transformed);
        z = 1.0 - r;
        core = profile_fit(groups, z, opts.lambda_max);
    }

    MixedEffectsFit fit;
    fit.beta1 = core.eval.beta1;
    fit.beta0 = core.eval.beta0 - core.eval.beta1 * tbar;
    fit.sigma_eps2 = core.eval.sigma_eps2;
    fit.beta1_se = std::sqrt(std::max(core.eval.sigma_eps2, 0.0) * core.eval.var_beta1_unit);
    fit.lambda = core.lambda;
    fit.ar1_rho = rho;
    fit.log_likelihood = core.eval.loglik;
    fit.converged = core.converged;

    const double lz2 = core.lambda * z * z;
    double umean = 0.0;
    double between_ss = 0.0;
    for (const auto& g : groups) {
        const double ni = static_cast<double>(g.rows.size());
        double rs = 0.0;
        for (const auto& r : g.rows) rs += r.y - core.eval.beta0 * r.x0 - core.eval.beta1 * r.x1;
        const double u = core.lambda * z * rs / (1.0 + ni * lz2);
        fit.per_patient_u[g.id] = u;
        umean += u;
        const double rbar = rs / (ni * z);
        between_ss += rbar * rbar;
    }
    umean /= static_cast<double>(groups.size());
    for (auto& [_, u] : fit.per_patient_u) u -= umean;

    if (core.upper_boundary) {
        // sigma_eps2 -> 0: report the limiting between-patient variance.
        fit.sigma_u2 = between_ss / static_cast<double>(groups.size());
    } else {
        fit.sigma_u2 = core.lambda * fit.sigma_eps2;
    }
    return fit;
}

// ---- change point ---------------------------------------------------------

ChangePointResult change_point_posterior(const TimeSeries& series) {
    const std::size_t n = series.size();
    if (n < 4) throw ValidationError("change point needs at least 4 points");
    const auto y = series.values();
    const auto ll = kernels::change_point_loglik(y, kVarianceFloor);
    const double mx = *std::max_element(ll.begin(), ll.end());
    ChangePointResult r;
    r.posterior.resize(ll.size());
    double z = 0.0;
    for (std::size_t k = 0; k < ll.size(); ++k) {
        r.posterior[k] = std::exp(ll[k] - mx);
        z += r.posterior[k];
    }
    for (auto& p : r.posterior) p /= z;
    std::size_t best = 0;
    for (std::size_t k = 1; k < r.posterior.size(); ++k)
        if (r.posterior[k] > r.posterior[best]) best = k;
    r.mode = best + 1;
    r.mode_mass = r.posterior[best];
    r.mean_before = std::accumulate(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(r.mode), 0.0) /
                    static_cast<double>(r.mode);
    r.mean_after = std::accumulate(y.begin() + static_cast<std::ptrdiff_t>(r.mode), y.end(), 0.0) /
                   static_cast<double>(n - r.mode);
    return r;
}

// ---- Gaussian process -----------------------------------------------------

void KernelParams::validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) throw ValidationError("GP lengthscale must be > 0");
    if (!(signal_var > 0.0) || !std::isfinite(signal_var)) throw ValidationError("GP signal variance must be > 0");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) throw ValidationError("GP noise variance must be >= 0");
}

double se_kernel(double a, double b, const KernelParams& p) {
    const double d = a - b;
    return p.signal_var * std::exp(-(d * d) / (2.0 * p.lengthscale * p.lengthscale));
}

std::vector<GpPosterior> gp_posterior_many(std::span<const Point> train, std::span<const double> query_t,
                                           const KernelParams& params) {
    params.validate();
    std::vector<GpPosterior> out;
    out.reserve(query_t.size());
    const auto n = static_cast<Eigen::Index>(train.size());
    if (n == 0) {
        for (double q : query_t) out.push_back({0.0, se_kernel(q, q, params), params, 0.0});
        return out;
    }
    Eigen::MatrixXd k(n, n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = train[static_cast<std::size_t>(i)].y;
        for (Eigen::Index j = 0; j < n; ++j)
            k(i, j) = se_kernel(train[static_cast<std::size_t>(i)].t, train[static_cast<std::size_t>(j)].t, params);
        k(i, i) += params.noise_var;
    }

    double jitter = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt;
    for (int attempt = 0;; ++attempt) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        llt.compute(kj);
        bool ok = llt.info() == Eigen::Success;
        if (ok) {
            const Eigen::MatrixXd l = llt.matrixL();
            const double dmax = kj.diagonal().maxCoeff();
            for (Eigen::Index i = 0; i < n && ok; ++i) ok = l(i, i) * l(i, i) > 1e-14 * dmax;
        }
        if (ok) break;
        if (attempt >= 7) throw NumericalError("GP factorization failed even with jitter escalation");
        jitter = jitter == 0.0 ? 1e-9 : jitter * 10.0;
    }

    const Eigen::VectorXd alpha = llt.solve(y);
    for (double q : query_t) {
        Eigen::VectorXd ks(n);
        for (Eigen::Index i = 0; i < n; ++i) ks(i) = se_kernel(q, train[static_cast<std::size_t>(i)].t, params);
        const Eigen::VectorXd v = llt.matrixL().solve(ks);
        GpPosterior post;
        post.mean = ks.dot(alpha);
        post.variance = se_kernel(q, q, params) - v.squaredNorm();
        if (post.variance < 0.0) {
            if (post.variance < -1e-10) throw NumericalError("GP posterior variance is negative");
            post.variance = 0.0;
        }
        post.kernel_params = params;
        post.jitter = jitter;
        if (!std::isfinite(post.mean)) throw NumericalError("GP posterior mean is not finite");
        out.push_back(post);
    }
    return out;
}

GpPosterior gp_posterior(std::span<const Point> train, double query_t, const KernelParams& params) {
    const double q[1] = {query_t};
    return gp_posterior_many(train, q, params).front();
}

GpPosterior gp_posterior(const TimeSeries& train, double query_t, const KernelParams& params) {
    return gp_posterior(std::span<const Point>(train.points()), query_t, params);
}

// ---- imputation -----------------------------------------------------------

PooledEstimate rubin_pool(std::span<const StackEstimate> estimates) {
    const std::size_t k = estimates.size();
    if (k < 2) throw ValidationError("Rubin pooling needs K >= 2 estimates");
    PooledEstimate p;
    for (const auto& e : estimates) {
        p.point += e.estimate;
        p.within += e.within_variance;
    }
    const double dk = static_cast<double>(k);
    p.point /= dk;
    p.within /= dk;
    for (const auto& e : estimates) p.between += (e.estimate - p.point) * (e.estimate - p.point);
    p.between /= dk - 1.0;
    p.total = p.within + (1.0 + 1.0 / dk) * p.between;
    return p;
}

namespace {

double interpolate(const std::vector<Point>& pts, double t) {
    auto it = std::lower_bound(pts.begin(), pts.end(), t, [](const Point& p, double v) { return p.t < v; });
    if (it == pts.end()) return pts.back().y;
    if (it->t == t || it == pts.begin()) return it->y;
    const auto& b = *it;
    const auto& a = *(it - 1);
    return a.y + (b.y - a.y) * (t - a.t) / (b.t - a.t);
}

}  // namespace

ImputationStacks impute_stacks(const TimeSeries& series, std::span<const double> grid, std::size_t k,
                               std::uint64_t seed) {
    if (k < 2) throw ValidationError("imputation needs K >= 2 stacks");
    if (series.size() < 2) throw ValidationError("imputation needs at least 2 observed points");
    const auto& pts = series.points();
    std::vector<double> targets;
    for (double g : grid) {
        if (!(g >= series.t_start() && g <= series.t_end()))
            throw ValidationError("imputation grid point outside the observed span (no extrapolation)");
        const bool observed =
            std::binary_search(pts.begin(), pts.end(), Point{g, 0.0}, [](const Point& a, const Point& b) { return a.t < b.t; });
        if (!observed) targets.push_back(g);
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    ImputationStacks out;
    out.k = k;
    if (pts.size() >= 3) {
        double sum = 0.0;
        for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
            const auto& a = pts[i - 1];
            const auto& b = pts[i + 1];
            const double pred = a.y + (b.y - a.y) * (pts[i].t - a.t) / (b.t - a.t);
            sum += (pts[i].y - pred) * (pts[i].y - pred);
        }
        out.noise_variance = sum / static_cast<double>(pts.size() - 2);
    }
    const double sd = std::sqrt(out.noise_variance);
    for (std::size_t s = 0; s < k; ++s) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(s)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::vector<Point> merged = pts;
        for (double g : targets) {
            const double base = interpolate(pts, g);
            merged.push_back({g, sd > 0.0 ? base + sd * noise(rng) : base});
        }
        std::sort(merged.begin(), merged.end(), [](const Point& a, const Point& b) { return a.t < b.t; });
        out.stacks.emplace_back(std::move(merged));
    }
    return out;
}

std::vector<double> gap_grid(const TimeSeries& series, double gap_factor) {
    const auto& pts = series.points();
    if (pts.size() < 3) return {};
    std::vector<double> diffs;
    for (std::size_t i = 1; i < pts.size(); ++i) diffs.push_back(pts[i].t - pts[i - 1].t);
    auto tmp = diffs;
    const double step = median_inplace(tmp);
    std::vector<double> grid;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (diffs[i - 1] > gap_factor * step) {
            for (double g = pts[i - 1].t + step; g < pts[i].t - 0.5 * step; g += step) grid.push_back(g);
        }
    }
    return grid;
}

bool has_gaps(const TimeSeries& series, double gap_factor) { return !gap_grid(series, gap_factor).empty(); }

// ---- cohort ---------------------------------------------------------------

ZScore cohort_zscore(double value, const CohortStats& stats) {
    if (!(stats.sigma > 0.0)) throw ValidationError("cohort sigma must be > 0");
    ZScore z;
    z.z = (value - stats.mu) / stats.sigma;
    z.anomalous = std::fabs(z.z) > kAnomalyThreshold;
    return z;
}

// ---- PCA ------------------------------------------------------------------

PcaResult pca_project(const std::vector<std::vector<double>>& rows, std::size_t m) {
    const std::size_t p = rows.size();
    if (p == 0) throw ValidationError("PCA needs at least one analyte row");
    const std::size_t n = rows.front().size();
    if (n < 2) throw ValidationError("PCA needs at least two time columns");
    for (const auto& r : rows)
        if (r.size() != n) throw ValidationError("PCA rows must have equal length");
    if (m == 0 || m > p) throw ValidationError("PCA component count must lie in 1..analytes");

    Eigen::MatrixXd y(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < p; ++i) {
        const double mean = std::accumulate(rows[i].begin(), rows[i].end(), 0.0) / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j)
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j] - mean;
    }
    const Eigen::MatrixXd cov = (y * y.transpose()) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericalError("PCA eigendecomposition failed");

    const Eigen::VectorXd evals = es.eigenvalues();  // ascending
    const double top = std::max(evals.maxCoeff(), 0.0);
    PcaResult out;
    out.requested = m;
    for (Eigen::Index i = 0; i < evals.size(); ++i)
        if (evals(i) > std::max(1e-12, 1e-10 * top)) ++out.rank;
    const std::size_t keep = std::min(m, out.rank);
    out.truncated = keep < m;
    for (std::size_t c = 0; c < keep; ++c) {
        const Eigen::Index col = static_cast<Eigen::Index>(p - 1 - c);
        Eigen::VectorXd w = es.eigenvectors().col(col);
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < w.size(); ++i)
            if (std::fabs(w(i)) > std::fabs(w(arg)) + 1e-12) arg = i;
        if (w(arg) < 0.0) w = -w;
        const Eigen::VectorXd z = y.transpose() * w;
        out.components.emplace_back(w.data(), w.data() + w.size());
        out.eigenvalues.push_back(evals(col));
        out.projected.emplace_back(z.data(), z.data() + z.size());
    }
    return out;
}

}  // namespace cotc::tsa
