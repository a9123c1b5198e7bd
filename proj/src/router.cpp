#include "cotc/router.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cotc/text.hpp"

namespace cotc::router {

namespace {

const std::vector<std::string> kRegistered{"impute_stacks", "mixed_effects",          "theil_sen",
                                           "change_point_grid", "gp_sweep",           "cohort_z",
                                           "mann_kendall_piecewise", "simple_slope"};
const std::vector<std::string> kUnavailable{"bsts", "var", "cox", "wavelet"};

using text::contains_phrase;

Direction direction_from(double v, double eps) {
    if (std::fabs(v) < eps) return Direction::flat;
    return v > 0 ? Direction::up : Direction::down;
}

struct Estimate {
    Estimand estimand = Estimand::slope;
    double value = 0.0;
    double within_var = 0.0;
    double trend = 0.0;  // quantity the direction is read from
    bool direction_fixed = false;
    Direction direction = Direction::flat;
    std::pair<double, double> span{0.0, 0.0};
};

struct Output {
    std::vector<Estimate> estimates;
    json detail = json::object();
};

struct RunContext {
    const RouterConfig& config;
    const ExecutionContext& exec;
    std::size_t attempt = 1;
    const std::vector<Estimate>* prior = nullptr;
};

tsa::TimeSeries as_series(const SeriesData& data) {
    if (const auto* s = std::get_if<tsa::TimeSeries>(&data)) return *s;
    return std::get<tsa::Panel>(data).pooled();
}

tsa::Panel as_panel(const SeriesData& data) {
    if (const auto* p = std::get_if<tsa::Panel>(&data)) return *p;
    tsa::Panel panel;
    panel.patients.emplace("series", std::get<tsa::TimeSeries>(data));
    return panel;
}

std::pair<double, double> span_of(const tsa::TimeSeries& s) { return {s.t_start(), s.t_end()}; }

Estimate slope_estimate(double slope, double var, std::pair<double, double> span) {
    Estimate e;
    e.estimand = Estimand::slope;
    e.value = slope;
    e.within_var = var;
    e.trend = slope;
    e.span = span;
    return e;
}

Output run_mixed_effects(const SeriesData& data, const json& params, const RunContext& ctx) {
    tsa::MixedEffectsOptions opts;
    opts.use_ar1 = params.value("use_ar1", true);
    opts.lambda_max = ctx.config.lambda_max;
    // widen the profile grid on retries
    for (std::size_t a = 1; a < ctx.attempt; ++a) opts.lambda_max *= 100.0;
    const auto panel = as_panel(data);
    const auto fit = tsa::fit_mixed_effects(panel, opts);
    if (!fit.converged) throw NumericalError("mixed effects did not converge (lambda at upper boundary)");
    const auto pooled = panel.pooled();
    Output out;
    out.estimates.push_back(slope_estimate(fit.beta1, fit.beta1_se * fit.beta1_se, span_of(pooled)));
    out.detail = {{"beta1", fit.beta1},         {"beta1_se", fit.beta1_se}, {"sigma_u2", fit.sigma_u2},
                  {"sigma_eps2", fit.sigma_eps2}, {"lambda", fit.lambda},   {"lambda_max", opts.lambda_max}};
    if (fit.ar1_rho) out.detail["ar1_rho"] = *fit.ar1_rho;
    return out;
}

Output run_theil_sen(const SeriesData& data, const json&, const RunContext&) {
    const auto s = as_series(data);
    Output out;
    out.estimates.push_back(slope_estimate(tsa::theil_sen(s), 0.0, span_of(s)));
    return out;
}

Output run_simple_slope(const SeriesData& data, const json&, const RunContext&) {
    const auto s = as_series(data);
    const auto fit = tsa::simple_slope(s);
    Output out;
    out.estimates.push_back(slope_estimate(fit.slope, fit.slope_variance, span_of(s)));
    return out;
}

Output run_mk_piecewise(const SeriesData& data, const json&, const RunContext&) {
    const auto s = as_series(data);
    const auto& pts = s.points();
    if (pts.size() < 3) throw ValidationError("piecewise Mann-Kendall needs at least 3 points");
    std::vector<std::pair<std::size_t, std::size_t>> segments;
    if (pts.size() <= 10) {
        segments.emplace_back(0, pts.size());
    } else {
        segments.emplace_back(0, pts.size() / 2);
        segments.emplace_back(pts.size() / 2, pts.size());
    }
    Output out;
    out.detail["segments"] = json::array();
    for (auto [lo, hi] : segments) {
        tsa::TimeSeries seg(std::vector<tsa::Point>(pts.begin() + static_cast<std::ptrdiff_t>(lo),
                                                    pts.begin() + static_cast<std::ptrdiff_t>(hi)));
        const auto mk = tsa::mann_kendall(seg);
        Estimate e = slope_estimate(tsa::theil_sen(seg), 0.0, span_of(seg));
        e.direction_fixed = true;
        e.direction = mk.direction;
        out.estimates.push_back(e);
        out.detail["segments"].push_back({{"s", mk.s}, {"z", mk.z}, {"direction", to_string(mk.direction)}});
    }
    return out;
}

Output run_change_point(const SeriesData& data, const json&, const RunContext&) {
    const auto s = as_series(data);
    const auto cp = tsa::change_point_posterior(s);
    const auto& pts = s.points();
    Estimate e;
    e.estimand = Estimand::change_point_mass;
    e.value = cp.mode_mass;
    e.trend = cp.mean_after - cp.mean_before;
    e.span = {pts[cp.mode - 1].t, pts[cp.mode].t};
    Output out;
    out.estimates.push_back(e);
    out.detail = {{"mode", cp.mode},
                  {"mode_mass", cp.mode_mass},
                  {"mean_before", cp.mean_before},
                  {"mean_after", cp.mean_after},
                  {"posterior", cp.posterior}};
    return out;
}

Output run_gp_sweep(const SeriesData& data, const json&, const RunContext& ctx) {
    const auto s = as_series(data);
    if (s.size() < 2) throw ValidationError("GP sweep needs at least 2 points");
    const auto t = s.times();
    auto y = s.values();
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - ybar) * (v - ybar);
    var /= static_cast<double>(y.size() - 1);

    const auto& g = ctx.config.gp;
    tsa::KernelParams kp;
    kp.lengthscale = g.lengthscale > 0 ? g.lengthscale : (s.t_end() - s.t_start()) / 4.0;
    kp.signal_var = g.signal_var > 0 ? g.signal_var : (var > 0 ? var : 1.0);
    kp.noise_var = g.noise_var > 0 ? g.noise_var : 0.1 * kp.signal_var;

    std::vector<tsa::Point> centred;
    for (const auto& p : s.points()) centred.push_back({p.t, p.y - ybar});
    const auto post = tsa::gp_posterior_many(centred, t, kp);
    const double f_first = post.front().mean + ybar;
    const double f_last = post.back().mean + ybar;

    Estimate e;
    e.estimand = Estimand::smooth_residual;
    e.value = y.back() - f_last;
    e.within_var = post.back().variance;
    e.trend = (f_last - f_first) / (s.t_end() - s.t_start());
    e.span = span_of(s);
    Output out;
    out.estimates.push_back(e);
    out.detail = {{"lengthscale", kp.lengthscale},
                  {"signal_var", kp.signal_var},
                  {"noise_var", kp.noise_var},
                  {"jitter", post.back().jitter},
                  {"net_change_per_day", e.trend}};
    return out;
}

Output run_cohort_z(const SeriesData&, const json&, const RunContext& ctx) {
    if (!ctx.exec.cohort) throw ValidationError("cohort z-score needs cohort statistics");
    if (ctx.prior == nullptr) throw ValidationError("cohort z-score needs a fitted slope");
    const auto it = std::find_if(ctx.prior->begin(), ctx.prior->end(),
                                 [](const Estimate& e) { return e.estimand == Estimand::slope; });
    if (it == ctx.prior->end()) throw ValidationError("cohort z-score needs a fitted slope");
    const auto z = tsa::cohort_zscore(it->value, *ctx.exec.cohort);
    Estimate e;
    e.estimand = Estimand::cohort_z;
    e.value = z.z;
    e.direction_fixed = true;
    e.direction = z.anomalous ? (z.z > 0 ? Direction::up : Direction::down) : Direction::flat;
    e.span = it->span;
    Output out;
    out.estimates.push_back(e);
    out.detail = {{"z", z.z}, {"anomalous", z.anomalous}};
    return out;
}

using EstimatorFn = Output (*)(const SeriesData&, const json&, const RunContext&);

EstimatorFn lookup(const std::string& id) {
    static const std::map<std::string, EstimatorFn> table{
        {"mixed_effects", run_mixed_effects},
        {"theil_sen", run_theil_sen},
        {"simple_slope", run_simple_slope},
        {"mann_kendall_piecewise", run_mk_piecewise},
        {"change_point_grid", run_change_point},
        {"gp_sweep", run_gp_sweep},
        {"cohort_z", run_cohort_z},
    };
    const auto it = table.find(id);
    if (it == table.end()) throw ValidationError("estimator '" + id + "' is not runnable");
    return it->second;
}

// Runs the head on every imputation stack and pools matching estimates.
Output run_pooled(EstimatorFn fn, const tsa::ImputationStacks& stacks, const json& params, const RunContext& ctx) {
    std::vector<Output> outs;
    for (const auto& stack : stacks.stacks) outs.push_back(fn(SeriesData{stack}, params, ctx));
    Output pooled = outs.front();
    for (const auto& o : outs) {
        if (o.estimates.size() != pooled.estimates.size())
            throw NumericalError("imputation stacks disagree on the estimate layout");
    }
    pooled.detail["stacks"] = stacks.stacks.size();
    pooled.detail["pooled"] = json::array();
    for (std::size_t i = 0; i < pooled.estimates.size(); ++i) {
        std::vector<tsa::StackEstimate> values, trends;
        for (const auto& o : outs) {
            if (o.estimates[i].estimand != pooled.estimates[i].estimand)
                throw NumericalError("imputation stacks disagree on estimands");
            values.push_back({o.estimates[i].value, o.estimates[i].within_var});
            trends.push_back({o.estimates[i].trend, 0.0});
        }
        const auto pv = tsa::rubin_pool(values);
        auto& e = pooled.estimates[i];
        e.value = pv.point;
        e.within_var = pv.total;
        e.trend = tsa::rubin_pool(trends).point;
        if (e.estimand == Estimand::slope) e.trend = pv.point;
        pooled.detail["pooled"].push_back({{"point", pv.point}, {"within", pv.within}, {"between", pv.between},
                                           {"total", pv.total}});
    }
    return pooled;
}

std::string error_text(const std::exception& e) { return e.what(); }

}  // namespace

// ---- enums / config -------------------------------------------------------

std::string_view to_string(Bucket b) {
    switch (b) {
        case Bucket::change_point: return "change_point";
        case Bucket::population_norm: return "population_norm";
        case Bucket::smooth_trajectory: return "smooth_trajectory";
        case Bucket::trend_test: return "trend_test";
    }
    return "trend_test";
}

Bucket parse_bucket(std::string_view s) {
    if (s == "change_point") return Bucket::change_point;
    if (s == "population_norm") return Bucket::population_norm;
    if (s == "smooth_trajectory") return Bucket::smooth_trajectory;
    if (s == "trend_test") return Bucket::trend_test;
    throw ValidationError("unknown intent bucket '" + std::string(s) + "'");
}

json to_json(const RouterConfig& c) {
    return {{"keywords",
             {{"change_point", c.keywords.change_point},
              {"population_norm", c.keywords.population_norm},
              {"smooth_trajectory", c.keywords.smooth_trajectory}}},
            {"slope_epsilon", c.slope_epsilon},
            {"budget", c.budget},
            {"impute_k", c.impute_k},
            {"gap_factor", c.gap_factor},
            {"lambda_max", c.lambda_max},
            {"gp", {{"lengthscale", c.gp.lengthscale}, {"signal_var", c.gp.signal_var}, {"noise_var", c.gp.noise_var}}},
            {"seed", c.seed}};
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ValidationError("unknown key '" + k + "' in " + where);
    }
}

}  // namespace

RouterConfig router_config_from_json(const json& j) {
    reject_unknown(j, {"keywords", "slope_epsilon", "budget", "impute_k", "gap_factor", "lambda_max", "gp", "seed"},
                   "router config");
    RouterConfig c;
    try {
        if (j.contains("keywords")) {
            const auto& k = j.at("keywords");
            reject_unknown(k, {"change_point", "population_norm", "smooth_trajectory"}, "router.keywords");
            if (k.contains("change_point")) c.keywords.change_point = k.at("change_point").get<std::vector<std::string>>();
            if (k.contains("population_norm"))
                c.keywords.population_norm = k.at("population_norm").get<std::vector<std::string>>();
            if (k.contains("smooth_trajectory"))
                c.keywords.smooth_trajectory = k.at("smooth_trajectory").get<std::vector<std::string>>();
        }
        c.slope_epsilon = j.value("slope_epsilon", c.slope_epsilon);
        c.budget = j.value("budget", c.budget);
        c.impute_k = j.value("impute_k", c.impute_k);
        c.gap_factor = j.value("gap_factor", c.gap_factor);
        c.lambda_max = j.value("lambda_max", c.lambda_max);
        c.seed = j.value("seed", c.seed);
        if (j.contains("gp")) {
            const auto& g = j.at("gp");
            reject_unknown(g, {"lengthscale", "signal_var", "noise_var"}, "router.gp");
            c.gp.lengthscale = g.value("lengthscale", 0.0);
            c.gp.signal_var = g.value("signal_var", 0.0);
            c.gp.noise_var = g.value("noise_var", 0.0);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("router config: ") + e.what());
    }
    if (!(c.slope_epsilon >= 0.0)) throw ValidationError("router.slope_epsilon must be >= 0");
    if (c.budget < 1) throw ValidationError("router.budget must be >= 1");
    if (c.impute_k < 2) throw ValidationError("router.impute_k must be >= 2");
    if (!(c.gap_factor > 1.0)) throw ValidationError("router.gap_factor must be > 1");
    if (!(c.lambda_max > 0.0)) throw ValidationError("router.lambda_max must be > 0");
    return c;
}

// ---- intent / plan --------------------------------------------------------

Intent parse_intent(const std::string& query, const KeywordRules& rules) {
    if (query.find_first_not_of(" \t\n\r\f\v") == std::string::npos) throw ValidationError("analysis query is empty");
    const auto tokens = text::words(query);
    Intent intent;
    intent.raw_query = query;
    const std::pair<Bucket, const std::vector<std::string>*> order[] = {
        {Bucket::change_point, &rules.change_point},
        {Bucket::population_norm, &rules.population_norm},
        {Bucket::smooth_trajectory, &rules.smooth_trajectory},
    };
    for (const auto& [bucket, phrases] : order) {
        for (const auto& phrase : *phrases) {
            if (contains_phrase(tokens, text::words(phrase))) intent.matched_keywords.push_back(phrase);
        }
        if (!intent.matched_keywords.empty()) {
            intent.bucket = bucket;
            return intent;
        }
    }
    intent.bucket = Bucket::trend_test;
    return intent;
}

const PlanStep& AnalysisPlan::head() const {
    for (const auto& s : steps)
        if (s.estimator != "impute_stacks") return s;
    throw ValidationError("plan has no estimator step");
}

json to_json(const AnalysisPlan& p) {
    json steps = json::array();
    for (const auto& s : p.steps) steps.push_back({{"estimator", s.estimator}, {"params", s.params}});
    return {{"steps", steps}, {"fallback", p.fallback}, {"budget", p.budget}};
}

AnalysisPlan plan_from_json(const json& j) {
    reject_unknown(j, {"steps", "fallback", "budget"}, "analysis plan");
    AnalysisPlan p;
    try {
        p.steps.clear();
        for (const auto& s : j.at("steps")) {
            reject_unknown(s, {"estimator", "params"}, "plan step");
            PlanStep step{s.at("estimator").get<std::string>(), s.value("params", json::object())};
            if (!step.params.is_object()) throw ValidationError("plan step params must be an object");
            p.steps.push_back(std::move(step));
        }
        if (j.contains("fallback")) p.fallback = j.at("fallback").get<std::vector<std::string>>();
        if (j.contains("budget")) p.budget = j.at("budget").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("analysis plan: ") + e.what());
    }
    return p;
}

std::vector<std::string> registered_estimators() { return kRegistered; }
std::vector<std::string> unavailable_estimators() { return kUnavailable; }

bool estimator_available(const std::string& id) {
    return std::find(kRegistered.begin(), kRegistered.end(), id) != kRegistered.end();
}

void validate_plan(const AnalysisPlan& plan) {
    if (plan.steps.empty()) throw ValidationError("plan has no steps");
    if (plan.budget < 1) throw ValidationError("plan budget must be >= 1");
    for (const auto& s : plan.steps) {
        if (!estimator_available(s.estimator)) throw ValidationError("estimator '" + s.estimator + "' is not registered");
    }
    (void)plan.head();
    bool seen_head = false;
    for (const auto& s : plan.steps) {
        if (s.estimator == "impute_stacks" && seen_head) throw ValidationError("impute_stacks must precede the head");
        if (s.estimator != "impute_stacks") seen_head = true;
    }
    if (plan.head().estimator == "cohort_z") throw ValidationError("cohort_z cannot head a plan");
    if (plan.fallback.empty() || plan.fallback.back() != "simple_slope")
        throw ValidationError("fallback chain must end in simple_slope");
    for (const auto& f : plan.fallback) {
        if (!estimator_available(f) || f == "impute_stacks" || f == "cohort_z")
            throw ValidationError("fallback estimator '" + f + "' is not usable");
    }
}

AnalysisPlan select_plan(const Intent& intent, const SeriesMeta& meta, const RouterConfig& config) {
    AnalysisPlan plan;
    plan.budget = config.budget;
    if (meta.has_gaps) plan.steps.push_back({"impute_stacks", {{"k", config.impute_k}}});
    const PlanStep slope_head = meta.n_points > 6 ? PlanStep{"mixed_effects", {{"use_ar1", true}}}
                                                  : PlanStep{"theil_sen", json::object()};
    switch (intent.bucket) {
        case Bucket::trend_test: plan.steps.push_back(slope_head); break;
        case Bucket::change_point: plan.steps.push_back({"change_point_grid", json::object()}); break;
        case Bucket::population_norm:
            plan.steps.push_back(slope_head);
            plan.steps.push_back({"cohort_z", json::object()});
            break;
        case Bucket::smooth_trajectory: plan.steps.push_back({"gp_sweep", json::object()}); break;
    }
    return plan;
}

SeriesMeta describe(const SeriesData& data, const ExecutionContext& ctx, const RouterConfig& config) {
    SeriesMeta m;
    m.has_cohort_stats = ctx.cohort.has_value();
    if (const auto* s = std::get_if<tsa::TimeSeries>(&data)) {
        m.n_points = s->size();
        m.has_gaps = tsa::has_gaps(*s, config.gap_factor);
    } else {
        m.n_points = std::get<tsa::Panel>(data).min_points();
    }
    return m;
}

json to_json(const ExecutionLog& log) {
    json entries = json::array();
    for (const auto& e : log.entries)
        entries.push_back({{"step", e.step},
                           {"estimator", e.estimator},
                           {"attempt", e.attempt},
                           {"ok", e.ok},
                           {"message", e.message}});
    return {{"plan_source", log.plan_source},
            {"plan", to_json(log.plan)},
            {"entries", entries},
            {"downgrades", log.downgrades},
            {"details", log.details}};
}

// ---- execution ------------------------------------------------------------

std::vector<TrendPredicate> execute_plan(const AnalysisPlan& plan, const SeriesData& data, const ExecutionContext& ctx,
                                         const RouterConfig& config, ExecutionLog& log) {
    log.plan = plan;
    const auto observed = as_series(data);
    const bool sparse = observed.size() < 4;

    std::vector<Estimate> estimates;
    bool head_ok = false;
    bool plan_valid = true;
    try {
        validate_plan(plan);
    } catch (const ValidationError& e) {
        // nothing runnable; go straight to the fallback chain
        log.entries.push_back({"head", "", 0, false, error_text(e)});
        ++log.downgrades;
        plan_valid = false;
    }

    if (plan_valid) {
        std::optional<tsa::ImputationStacks> stacks;
        std::size_t idx = 0;
        for (; idx < plan.steps.size() && plan.steps[idx].estimator == "impute_stacks"; ++idx) {
            const auto& step = plan.steps[idx];
            try {
                const auto* series = std::get_if<tsa::TimeSeries>(&data);
                if (series == nullptr) throw ValidationError("imputation applies to single series only");
                const auto grid = tsa::gap_grid(*series, config.gap_factor);
                if (grid.empty()) {
                    log.entries.push_back({"pre", step.estimator, 1, true, "no gaps to fill"});
                    continue;
                }
                const std::size_t k = step.params.value("k", config.impute_k);
                stacks = tsa::impute_stacks(*series, grid, k, config.seed);
                log.entries.push_back(
                    {"pre", step.estimator, 1, true, std::to_string(grid.size()) + " grid points, K=" + std::to_string(k)});
            } catch (const std::exception& e) {
                log.entries.push_back({"pre", step.estimator, 1, false, error_text(e)});
                ++log.downgrades;
            }
        }

        const auto& head = plan.steps[idx];
        const EstimatorFn fn = lookup(head.estimator);
        for (std::size_t attempt = 1; attempt <= plan.budget && !head_ok; ++attempt) {
            RunContext rc{config, ctx, attempt, nullptr};
            try {
                Output out = stacks ? run_pooled(fn, *stacks, head.params, rc) : fn(data, head.params, rc);
                estimates = std::move(out.estimates);
                log.details[head.estimator] = std::move(out.detail);
                log.entries.push_back({"head", head.estimator, attempt, true, ""});
                head_ok = true;
            } catch (const std::exception& e) {
                log.entries.push_back({"head", head.estimator, attempt, false, error_text(e)});
            }
        }

        if (head_ok) {
            for (std::size_t i = idx + 1; i < plan.steps.size(); ++i) {
                const auto& step = plan.steps[i];
                RunContext rc{config, ctx, 1, &estimates};
                try {
                    Output out = lookup(step.estimator)(data, step.params, rc);
                    for (auto& e : out.estimates) estimates.push_back(e);
                    log.details[step.estimator] = std::move(out.detail);
                    log.entries.push_back({"post", step.estimator, 1, true, ""});
                } catch (const std::exception& e) {
                    log.entries.push_back({"post", step.estimator, 1, false, error_text(e)});
                    ++log.downgrades;
                }
            }
        } else {
            ++log.downgrades;
        }
    }

    if (!head_ok) {
        const std::vector<std::string> chain =
            plan.fallback.empty() ? std::vector<std::string>{"mann_kendall_piecewise", "simple_slope"} : plan.fallback;
        for (const auto& id : chain) {
            RunContext rc{config, ctx, 1, nullptr};
            try {
                Output out = lookup(id)(data, json::object(), rc);
                estimates = std::move(out.estimates);
                log.details[id] = std::move(out.detail);
                log.entries.push_back({"fallback", id, 1, true, ""});
                break;
            } catch (const std::exception& e) {
                log.entries.push_back({"fallback", id, 1, false, error_text(e)});
            }
        }
    }

    std::vector<TrendPredicate> preds;
    if (estimates.empty()) {
        TrendPredicate p;
        p.span = span_of(observed);
        p.estimand = Estimand::slope;
        p.value = 0.0;
        p.qual = {QualFlag::UNSTABLE, QualFlag::SPARSE};
        p.direction = Direction::flat;
        p.signal = ctx.signal;
        if (log.downgrades == 0) ++log.downgrades;
        preds.push_back(p);
        return preds;
    }
    for (const auto& e : estimates) {
        TrendPredicate p;
        p.span = e.span;
        p.estimand = e.estimand;
        p.value = e.value;
        p.direction = e.direction_fixed ? e.direction : direction_from(e.trend, config.slope_epsilon);
        p.signal = ctx.signal;
        if (sparse) p.qual.insert(QualFlag::SPARSE);
        if (log.downgrades > 0) p.qual.insert(QualFlag::UNSTABLE);
        preds.push_back(p);
    }
    return preds;
}

RouterResult run_query(const std::string& query, const SeriesData& data, const ExecutionContext& ctx,
                       const RouterConfig& config, Planner* planner) {
    RouterResult r;
    r.intent = parse_intent(query, config.keywords);
    const auto meta = describe(data, ctx, config);
    AnalysisPlan plan = select_plan(r.intent, meta, config);
    if (planner != nullptr) {
        try {
            if (auto external = planner->plan(r.intent, meta)) {
                validate_plan(*external);
                plan = std::move(*external);
                r.log.plan_source = "external";
            }
        } catch (const ValidationError& e) {
            r.log.entries.push_back({"plan", "", 0, false, std::string("external plan rejected: ") + e.what()});
        }
    }
    r.predicates = execute_plan(plan, data, ctx, config, r.log);
    return r;
}

}  // namespace cotc::router
